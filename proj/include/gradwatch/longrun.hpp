#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "features.hpp"
#include "psd.hpp"

namespace gradwatch {

/// Epanechnikov kernel K(x) = 0.75 (1 - x^2) on [-1, 1].
inline double epanechnikov(double x) { return std::abs(x) <= 1.0 ? 0.75 * (1.0 - x * x) : 0.0; }

struct SmootherConfig {
    double h = 0.2;  // bandwidth in rescaled time
};

enum class LagWindow { bartlett, flattop };

inline double lag_window_weight(LagWindow w, double x) {
    const double a = std::abs(x);
    if (a > 1.0) return 0.0;
    switch (w) {
        case LagWindow::bartlett: return 1.0 - a;
        case LagWindow::flattop: return a <= 0.5 ? 1.0 : 2.0 * (1.0 - a);
    }
    return 0.0;
}

struct HacConfig {
    LagWindow window = LagWindow::bartlett;
    int bandwidth = 10;  // b; b = 0 means lag 0 only
};

struct NwFit {
    Eigen::MatrixXd residuals;  // Z-hat, T x K
    Eigen::MatrixXd fitted;     // smoothed means, T x K
};

/// Nadaraya-Watson centering of a feature matrix. Boundary handling is the
/// estimator's own ratio form: divide by the realized kernel mass in the window.
inline NwFit nw_center(const FeatureMatrix& features, const SmootherConfig& cfg) {
    const int T = static_cast<int>(features.T());
    const int K = features.K();
    if (cfg.h <= 0.0 || cfg.h > 1.0) throw std::invalid_argument("nw_center: need 0 < h <= 1");
    if (cfg.h * T < 4.0) throw std::invalid_argument("nw_center: bandwidth window h*T < 4 points");

    NwFit fit;
    fit.fitted.resize(T, K);
    fit.residuals.resize(T, K);
    const int half = static_cast<int>(std::floor(cfg.h * T));
    for (int t = 0; t < T; ++t) {
        const int lo = std::max(0, t - half);
        const int hi = std::min(T - 1, t + half);
        double mass = 0.0;
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(K);
        for (int s = lo; s <= hi; ++s) {
            const double w = epanechnikov((static_cast<double>(t - s) / T) / cfg.h);
            if (w == 0.0) continue;
            mass += w;
            acc += w * features.values.row(s);
        }
        if (mass <= 0.0) throw std::runtime_error("nw_center: empty kernel window at t = " + std::to_string(t + 1));
        fit.fitted.row(t) = acc / mass;
        fit.residuals.row(t) = features.values.row(t) - fit.fitted.row(t);
    }
    return fit;
}

namespace detail {

// Gamma_l(u, f_k, f_k2) = T^-1 sum_{t} Z_t(k) Z_{t-l}(k2), l >= 0,
// t running over max(1, l+1) .. floor(uT).
inline double hac_gamma(const Eigen::MatrixXd& Z, double u, int k, int k2, int l) {
    const int T = static_cast<int>(Z.rows());
    const int m = std::min(T, static_cast<int>(std::floor(u * T + 1e-9)));
    double s = 0.0;
    for (int t = l + 1; t <= m; ++t) s += Z(t - 1, k) * Z(t - l - 1, k2);
    return s / T;
}

}  // namespace detail

/// HAC long-run covariance estimate
///   sigma2(u, f_k, f_k2) = sum_{|l| <= b} W(l/b) Gamma_l(u, k, k2),
/// with negative lags via Gamma_{-l}(f, f') = Gamma_l(f', f).
inline double hac_sigma2(const Eigen::MatrixXd& residuals, double u, int k, int k2, const HacConfig& cfg) {
    if (u <= 0.0 || u > 1.0) throw std::invalid_argument("hac_sigma2: need 0 < u <= 1");
    if (k < 0 || k2 < 0 || k >= residuals.cols() || k2 >= residuals.cols())
        throw std::invalid_argument("hac_sigma2: feature index out of range");
    double s = detail::hac_gamma(residuals, u, k, k2, 0);
    for (int l = 1; l <= cfg.bandwidth; ++l) {
        const double w = lag_window_weight(cfg.window, static_cast<double>(l) / cfg.bandwidth);
        if (w == 0.0) continue;
        s += w * (detail::hac_gamma(residuals, u, k, k2, l) + detail::hac_gamma(residuals, u, k2, k, l));
    }
    return s;
}

/// Symmetric long-run matrix with its factor A-hat (Sigma = A A^T).
struct LongRunMatrix {
    Eigen::MatrixXd sigma2;  // K x K, symmetric
    Eigen::MatrixXd factor;  // K x K, Sigma = factor * factor^T
    double cond = 0.0;       // eigenvalue ratio of sigma2
};

/// Setting II matrix: lag-window sum of kernel-weighted covariances near
/// rescaled time 0,
///   c_l(0, k, k2) = sum_{t=l+1}^T K_h(t/T) Z_t(k) Z_{t-l}(k2) / sum_t K_h(t/T),
/// symmetrized and factored through its spectral square root.
inline LongRunMatrix setting2_matrix(const Eigen::MatrixXd& residuals, const SmootherConfig& smoother,
                                     const HacConfig& hac) {
    const int T = static_cast<int>(residuals.rows());
    const int K = static_cast<int>(residuals.cols());
    if (smoother.h <= 0.0 || smoother.h > 1.0) throw std::invalid_argument("setting2_matrix: need 0 < h <= 1");
    if (smoother.h * T < 4.0) throw std::invalid_argument("setting2_matrix: bandwidth window h*T < 4 points");

    Eigen::VectorXd w(T);
    double mass = 0.0;
    for (int t = 1; t <= T; ++t) {
        w(t - 1) = epanechnikov((static_cast<double>(t) / T) / smoother.h) / smoother.h;
        mass += w(t - 1);
    }
    if (mass <= 0.0) throw std::runtime_error("setting2_matrix: kernel mass near time 0 is empty");

    auto chat = [&](int l, int k, int k2) {
        double s = 0.0;
        for (int t = l + 1; t <= T; ++t) s += w(t - 1) * residuals(t - 1, k) * residuals(t - l - 1, k2);
        return s / mass;
    };

    Eigen::MatrixXd S(K, K);
    for (int k = 0; k < K; ++k)
        for (int k2 = k; k2 < K; ++k2) {
            double v = chat(0, k, k2);
            for (int l = 1; l <= hac.bandwidth; ++l) {
                const double lw = lag_window_weight(hac.window, static_cast<double>(l) / hac.bandwidth);
                if (lw == 0.0) continue;
                v += lw * (chat(l, k, k2) + chat(l, k2, k));
            }
            S(k, k2) = v;
            S(k2, k) = v;
        }
    S = 0.5 * (S + S.transpose()).eval();

    PsdRepair rep = psd_repair(S, 1e-10);
    if (rep.rank < K)
        throw std::runtime_error("setting2_matrix: Sigma-hat numerically singular after repair (rank " +
                                 std::to_string(rep.rank) + " of " + std::to_string(K) +
                                 "); consider a larger kernel bandwidth");

    LongRunMatrix out;
    out.sigma2 = rep.matrix;
    out.factor = rep.eigvecs * rep.eigvals.cwiseSqrt().asDiagonal() * rep.eigvecs.transpose();
    out.cond = rep.eigvals.maxCoeff() / rep.eigvals.minCoeff();
    return out;
}

/// First-difference variance estimate sigma2 = T^-1 sum_{t=2}^T (X_t - X_{t-1})^2 / 2
/// for i.i.d. errors under a smooth mean.
inline double diff_variance(const TimeSeries& series) {
    if (series.d() != 1) throw std::invalid_argument("diff_variance: series must be univariate");
    const int T = static_cast<int>(series.T());
    double s = 0.0;
    for (int t = 1; t < T; ++t) {
        const double d = series.values(t, 0) - series.values(t - 1, 0);
        s += d * d;
    }
    return s / (2.0 * T);
}

}  // namespace gradwatch
