#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "features.hpp"

namespace gradwatch {

/// Grid of evaluation times t_i/T with t_1 < ... < t_n <= T.
/// The full grid is t = 1..T; coarse grids are subsets of it.
struct Grid {
    int T = 0;
    std::vector<int> t;  // ascending, values in 1..T

    int size() const { return static_cast<int>(t.size()); }
    double u(int i) const { return static_cast<double>(t[static_cast<std::size_t>(i)]) / T; }

    static Grid full(int T) {
        Grid g;
        g.T = T;
        g.t.resize(static_cast<std::size_t>(T));
        for (int i = 0; i < T; ++i) g.t[static_cast<std::size_t>(i)] = i + 1;
        return g;
    }

    // Roughly n equispaced points of the full grid, always including T.
    static Grid subgrid(int T, int n) {
        if (n >= T) return full(T);
        Grid g;
        g.T = T;
        int prev = 0;
        for (int i = 1; i <= n; ++i) {
            int ti = static_cast<int>(std::llround(static_cast<double>(i) * T / n));
            ti = std::clamp(ti, prev + 1, T);
            g.t.push_back(ti);
            prev = ti;
        }
        g.t.back() = T;
        return g;
    }
};

/// Triangular array of CUSUM contrasts
///   D(u_i, u_j, f_k) = S_k(t_j)/T - (t_j/t_i) S_k(t_i)/T,   j <= i,
/// together with the per-point supremum curve and its running maximum.
struct CusumField {
    Grid grid;
    int K = 0;
    std::vector<std::vector<double>> field;  // per feature, lower-triangular
    std::vector<double> sup_curve;           // max_{k, j<=i} |D|
    std::vector<double> runmax_curve;        // nondecreasing envelope of sup_curve
    bool scaled = false;
    std::string normalization;

    static std::size_t tri(int i, int j) { return static_cast<std::size_t>(i) * (i + 1) / 2 + j; }

    double at(int i, int j, int k) const {
        if (j > i) throw std::invalid_argument("CusumField::at: need j <= i");
        return field[static_cast<std::size_t>(k)][tri(i, j)];
    }
};

namespace detail {

inline void fill_curves(CusumField& f) {
    const int n = f.grid.size();
    f.sup_curve.assign(static_cast<std::size_t>(n), 0.0);
    f.runmax_curve.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double m = 0.0;
        for (int k = 0; k < f.K; ++k)
            for (int j = 0; j <= i; ++j) m = std::max(m, std::abs(f.field[static_cast<std::size_t>(k)][CusumField::tri(i, j)]));
        f.sup_curve[static_cast<std::size_t>(i)] = m;
        f.runmax_curve[static_cast<std::size_t>(i)] = (i == 0) ? m : std::max(m, f.runmax_curve[static_cast<std::size_t>(i - 1)]);
    }
}

}  // namespace detail

/// Build the field from prefix sums in one pass: O(n^2 K) total.
/// Written as (t_i S(t_j) - t_j S(t_i)) / (t_i T) so that the diagonal
/// vanishes exactly and integer-valued data cancels an additive shift exactly.
inline CusumField cusum_field(const FeatureMatrix& features, const Grid& grid) {
    const int T = static_cast<int>(features.T());
    if (grid.T != T) throw std::invalid_argument("cusum_field: grid sample size does not match features");
    const int n = grid.size();
    if (n < 1) throw std::invalid_argument("cusum_field: empty grid");
    for (int i = 0; i < n; ++i) {
        int ti = grid.t[static_cast<std::size_t>(i)];
        if (ti < 1 || ti > T || (i > 0 && ti <= grid.t[static_cast<std::size_t>(i - 1)]))
            throw std::invalid_argument("cusum_field: grid point not on {t/T} or not ascending");
    }

    CusumField f;
    f.grid = grid;
    f.K = features.K();
    f.field.resize(static_cast<std::size_t>(f.K));

    for (int k = 0; k < f.K; ++k) {
        // prefix sums S(m) = sum_{t<=m} f_k(X_t)
        std::vector<double> S(static_cast<std::size_t>(T) + 1, 0.0);
        for (int t = 1; t <= T; ++t) S[static_cast<std::size_t>(t)] = S[static_cast<std::size_t>(t - 1)] + features.values(t - 1, k);

        auto& fk = f.field[static_cast<std::size_t>(k)];
        fk.resize(CusumField::tri(n - 1, n - 1) + 1);
        for (int i = 0; i < n; ++i) {
            const double ti = grid.t[static_cast<std::size_t>(i)];
            const double Si = S[static_cast<std::size_t>(grid.t[static_cast<std::size_t>(i)])];
            const double denom = ti * static_cast<double>(T);
            for (int j = 0; j <= i; ++j) {
                const double tj = grid.t[static_cast<std::size_t>(j)];
                const double Sj = S[static_cast<std::size_t>(grid.t[static_cast<std::size_t>(j)])];
                fk[CusumField::tri(i, j)] = (ti * Sj - tj * Si) / denom;
            }
        }
    }
    detail::fill_curves(f);
    return f;
}

/// Setting I scaling: divide everything by the long-run standard deviation.
inline CusumField scale_setting1(const CusumField& field, double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("scale_setting1: sigma must be > 0, got " + std::to_string(sigma));
    if (field.scaled) throw std::invalid_argument("scale_setting1: field is already scaled");
    if (field.K != 1) throw std::invalid_argument("scale_setting1: requires K = 1");
    CusumField out = field;
    for (auto& v : out.field[0]) v /= sigma;
    for (auto& v : out.sup_curve) v /= sigma;
    for (auto& v : out.runmax_curve) v /= sigma;
    out.scaled = true;
    out.normalization = "setting1 sigma=" + std::to_string(sigma);
    return out;
}

/// Setting II scaling: left-multiply the K-vector of field values at each
/// (u_i, v_j) by the inverse of the factor A-hat, then refill the curves.
inline CusumField scale_setting2(const CusumField& field, const Eigen::MatrixXd& A, double cond_threshold = 1e12) {
    if (field.scaled) throw std::invalid_argument("scale_setting2: field is already scaled");
    if (A.rows() != field.K || A.cols() != field.K)
        throw std::invalid_argument("scale_setting2: factor must be K x K with K = " + std::to_string(field.K));

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    const double smax = svd.singularValues()(0);
    if (smin <= 0.0 || smax / smin > cond_threshold)
        throw std::runtime_error("scale_setting2: factor is singular or ill-conditioned (cond ~ " +
                                 std::to_string(smin > 0 ? smax / smin : std::numeric_limits<double>::infinity()) +
                                 "); consider a larger kernel bandwidth");

    Eigen::MatrixXd Ainv = A.fullPivLu().inverse();
    CusumField out = field;
    out.scaled = true;
    out.normalization = "setting2 A-hat^-1";

    const int n = field.grid.size();
    Eigen::VectorXd d(field.K), ds(field.K);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            const std::size_t idx = CusumField::tri(i, j);
            for (int k = 0; k < field.K; ++k) d(k) = field.field[static_cast<std::size_t>(k)][idx];
            ds.noalias() = Ainv * d;
            for (int k = 0; k < field.K; ++k) out.field[static_cast<std::size_t>(k)][idx] = ds(k);
        }
    detail::fill_curves(out);
    return out;
}

/// Dump (u, sup_curve) and (u, runmax_curve) as a small CSV for plotting.
inline void dump_curves(const CusumField& field, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump_curves: cannot open '" + path + "'");
    out << "u,sup,runmax\n";
    char buf[96];
    for (int i = 0; i < field.grid.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", field.grid.u(i),
                      field.sup_curve[static_cast<std::size_t>(i)], field.runmax_curve[static_cast<std::size_t>(i)]);
        out << buf;
    }
}

}  // namespace gradwatch
