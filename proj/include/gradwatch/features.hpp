#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "series.hpp"

namespace gradwatch {

enum class FeatureKind { mean, autocov, covmat, second_moment, custom };

/// Finite ordered family of scalar moment maps f_k on d-vectors.
/// The time-variation of E[f_k(X_t)] over k characterizes the feature
/// under study (mean, autocovariances, covariance matrix, second moment).
struct FeatureFamily {
    FeatureKind kind = FeatureKind::custom;
    int input_dim = 1;
    std::vector<std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>> maps;
    std::vector<std::string> names;

    int size() const { return static_cast<int>(maps.size()); }
};

inline FeatureFamily mean_family() {
    FeatureFamily f;
    f.kind = FeatureKind::mean;
    f.input_dim = 1;
    f.maps.push_back([](const Eigen::Ref<const Eigen::VectorXd>& x) { return x(0); });
    f.names.push_back("mean");
    return f;
}

inline FeatureFamily second_moment_family() {
    FeatureFamily f;
    f.kind = FeatureKind::second_moment;
    f.input_dim = 1;
    f.maps.push_back([](const Eigen::Ref<const Eigen::VectorXd>& x) { return x(0) * x(0); });
    f.names.push_back("x^2");
    return f;
}

/// Lagged products f_l(x) = x_0 * x_l on (p+1)-vectors; K = p+1.
inline FeatureFamily autocov_family(int p) {
    if (p < 0) throw std::invalid_argument("autocov_family: p must be >= 0");
    FeatureFamily f;
    f.kind = FeatureKind::autocov;
    f.input_dim = p + 1;
    for (int l = 0; l <= p; ++l) {
        f.maps.push_back([l](const Eigen::Ref<const Eigen::VectorXd>& x) { return x(0) * x(l); });
        f.names.push_back("lag" + std::to_string(l));
    }
    return f;
}

/// Pairwise products f_ij(x) = x_i * x_j, row-major over 1 <= i <= j <= d;
/// K = d(d+1)/2. The fixed order matters for the Setting II normalization.
inline FeatureFamily covmat_family(int d) {
    if (d < 1) throw std::invalid_argument("covmat_family: d must be >= 1");
    FeatureFamily f;
    f.kind = FeatureKind::covmat;
    f.input_dim = d;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            f.maps.push_back([i, j](const Eigen::Ref<const Eigen::VectorXd>& x) { return x(i) * x(j); });
            f.names.push_back("x" + std::to_string(i + 1) + "*x" + std::to_string(j + 1));
        }
    return f;
}

inline FeatureFamily custom_family(std::vector<std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>> maps,
                                   int input_dim) {
    if (maps.empty()) throw std::invalid_argument("custom_family: empty map list");
    FeatureFamily f;
    f.kind = FeatureKind::custom;
    f.input_dim = input_dim;
    f.maps = std::move(maps);
    for (std::size_t k = 0; k < f.maps.size(); ++k) f.names.push_back("f" + std::to_string(k + 1));
    return f;
}

/// Parse the CLI spelling: mean | autocov:p | covmat | second-moment.
/// covmat needs the series dimension d to size the family.
inline FeatureFamily parse_family(const std::string& spec, int d) {
    if (spec == "mean") return mean_family();
    if (spec == "second-moment") return second_moment_family();
    if (spec == "covmat") return covmat_family(d);
    if (spec.rfind("autocov:", 0) == 0) {
        int p = std::stoi(spec.substr(8));
        return autocov_family(p);
    }
    throw std::invalid_argument("unknown feature family '" + spec + "' (expected mean|autocov:p|covmat|second-moment)");
}

/// T x K matrix with entry (t,k) = f_k(X_t), row-aligned with the series.
struct FeatureMatrix {
    Eigen::MatrixXd values;  // T x K
    FeatureFamily family;

    Eigen::Index T() const { return values.rows(); }
    int K() const { return static_cast<int>(values.cols()); }
};

inline FeatureMatrix evaluate(const FeatureFamily& family, const TimeSeries& series) {
    if (series.d() != family.input_dim)
        throw std::invalid_argument("evaluate: series dimension " + std::to_string(series.d()) +
                                    " does not match family input_dim " + std::to_string(family.input_dim));
    const Eigen::Index T = series.T();
    const int K = family.size();
    Eigen::MatrixXd m(T, K);
    for (Eigen::Index t = 0; t < T; ++t) {
        auto row = series.values.row(t).transpose();
        for (int k = 0; k < K; ++k) m(t, k) = family.maps[static_cast<std::size_t>(k)](row);
    }
    if (!m.allFinite()) throw std::runtime_error("evaluate: feature map produced a non-finite value");
    return FeatureMatrix{std::move(m), family};
}

}  // namespace gradwatch
