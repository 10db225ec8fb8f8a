#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "cusum.hpp"
#include "longrun.hpp"
#include "quantiles.hpp"

namespace gradwatch {

enum class Direction { from_left, from_right };
enum class Mode { setting1, setting2, general };
enum class VarianceEstimator { hac, diff };

/// Two-step estimate with all intermediate values recorded.
struct ChangeEstimate {
    double u0_prelim = 1.0;   // u0-hat from the conservative threshold q_alpha(1)
    double tau_prelim = 0.0;  // q_alpha(1)
    double tau_refined = 0.0; // q_alpha(u0_prelim), read left-continuously
    double u0 = 1.0;          // final estimate
    double alpha = 0.1;
    Direction direction = Direction::from_left;
    bool prelim_zero = false; // statistic exceeded even the conservative threshold everywhere
    double sigma = 0.0;       // Setting I long-run sd (0 otherwise)
    double cond = 0.0;        // Setting II condition estimate (0 otherwise)
    std::uint64_t seed = 0;
    std::vector<double> curve_u;    // field grid (in the analysis orientation)
    std::vector<double> curve_sup;  // sqrt(T)-scaled sup curve
};

/// Left-endpoint Riemann sum of the indicator 1(sqrt(T) D-hat(u_i) <= tau)
/// over the field grid, with u_0 := 0.
inline double u0_at_threshold(const CusumField& field, double tau) {
    if (tau < 0.0) throw std::invalid_argument("u0_at_threshold: tau must be >= 0");
    const int n = field.grid.size();
    if (n == 0 || field.grid.t.back() != field.grid.T)
        throw std::invalid_argument("u0_at_threshold: field grid must end at u = 1");
    const double rootT = std::sqrt(static_cast<double>(field.grid.T));
    double acc = 0.0;
    double prev = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = field.grid.u(i);
        if (rootT * field.sup_curve[static_cast<std::size_t>(i)] <= tau) acc += u - prev;
        prev = u;
    }
    return acc;
}

/// Quantile curve value at the largest grid point <= u (left-continuous step
/// read); falls back to the first grid point below the grid minimum.
inline double quantile_at(const QuantileCurve& qc, double u) {
    if (qc.u.empty()) throw std::invalid_argument("quantile_at: empty quantile curve");
    double val = qc.q.front();
    for (std::size_t i = 0; i < qc.u.size(); ++i) {
        if (qc.u[i] <= u + 1e-12) val = qc.q[i];
        else break;
    }
    return val;
}

/// Steps 1(b)-(c) and 2: preliminary threshold q_alpha(1), pilot estimate,
/// refined threshold q_alpha(u0-prelim), final estimate.
inline ChangeEstimate two_step_estimate(const CusumField& field, const QuantileCurve& qcurve, double alpha) {
    if (std::abs(qcurve.alpha - alpha) > 1e-12)
        throw std::invalid_argument("two_step_estimate: quantile curve level does not match alpha");
    if (std::abs(qcurve.u.back() - 1.0) > 1e-9)
        throw std::invalid_argument("two_step_estimate: quantile grid must end at u = 1");

    ChangeEstimate est;
    est.alpha = alpha;
    est.tau_prelim = qcurve.q.back();
    est.u0_prelim = u0_at_threshold(field, est.tau_prelim);
    est.prelim_zero = est.u0_prelim == 0.0;
    est.tau_refined = quantile_at(qcurve, est.u0_prelim);
    est.u0 = u0_at_threshold(field, est.tau_refined);
    return est;
}

struct DetectConfig {
    Mode mode = Mode::setting1;
    Direction direction = Direction::from_left;
    double alpha = 0.1;
    std::optional<double> h;     // smoother bandwidth; default 0.2 (setting1) / 0.1 (setting2, general)
    HacConfig hac;
    VarianceEstimator var_est = VarianceEstimator::hac;  // setting1 only
    bool center = false;         // subtract a Nadaraya-Watson mean fit before feature evaluation
    int sim_grid = 50;
    int draws = 5000;
    std::uint64_t seed = 1;
    const QuantileCurve* precomputed_quantiles = nullptr;
    bool keep_curves = true;
};

inline double resolve_bandwidth(const DetectConfig& cfg) {
    if (cfg.h) return *cfg.h;
    return cfg.mode == Mode::setting1 ? 0.2 : 0.1;
}

namespace detail {

template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string(name) + ": " + e.what());
    }
}

}  // namespace detail

/// Full pipeline: (optional reversal) -> features -> mode-specific scaling ->
/// CUSUM field -> quantile curve -> two-step estimate. From-right results are
/// mapped back as u0 = 1 - u0(reversed).
inline ChangeEstimate detect(const TimeSeries& series, const FeatureFamily& family, const DetectConfig& cfg) {
    TimeSeries work = cfg.direction == Direction::from_right ? reverse_time(series) : series;

    const SmootherConfig smoother{resolve_bandwidth(cfg)};

    if (cfg.center) {
        // subtract a Nadaraya-Watson mean fit from every column
        FeatureMatrix raw{work.values, FeatureFamily{}};
        NwFit fit = detail::stage("center", [&] { return nw_center(raw, smoother); });
        work.values = fit.residuals;
    }

    // lag-embed automatically for the autocovariance family on univariate input
    if (family.kind == FeatureKind::autocov && work.d() == 1 && family.input_dim > 1)
        work = detail::stage("embed", [&] { return embed_lags(work, family.input_dim - 1); });

    FeatureMatrix feats = detail::stage("features", [&] { return evaluate(family, work); });
    const int T = static_cast<int>(feats.T());
    // Evaluate the statistic on the same grid the quantiles are simulated on:
    // a sup over a finer grid would be stochastically larger than the simulated
    // threshold and inflate the rejection rate above alpha.
    Grid grid = T <= cfg.sim_grid ? Grid::full(T) : Grid::subgrid(T, cfg.sim_grid);

    CusumField field = detail::stage("cusum", [&] { return cusum_field(feats, grid); });

    ChangeEstimate est;
    QuantileCurve local_q;
    const QuantileCurve* qcurve = cfg.precomputed_quantiles;

    switch (cfg.mode) {
        case Mode::setting1: {
            if (feats.K() != 1) throw std::invalid_argument("detect: setting1 requires a single-feature family");
            double sigma2;
            if (cfg.var_est == VarianceEstimator::diff) {
                if (work.d() != 1) throw std::invalid_argument("detect: diff variance needs a univariate series");
                sigma2 = detail::stage("longrun", [&] { return diff_variance(work); });
            } else {
                NwFit fit = detail::stage("longrun", [&] { return nw_center(feats, smoother); });
                sigma2 = detail::stage("longrun", [&] { return hac_sigma2(fit.residuals, 1.0, 0, 0, cfg.hac); });
            }
            if (sigma2 <= 0.0) throw std::runtime_error("longrun: nonpositive variance estimate");
            est.sigma = std::sqrt(sigma2);
            field = detail::stage("scale", [&] { return scale_setting1(field, est.sigma); });
            if (!qcurve) {
                local_q = detail::stage("quantiles", [&] {
                    return simulate_quantiles(CovKernel::known_kernel(), equispaced_grid(cfg.sim_grid), 1, cfg.alpha,
                                              cfg.draws, cfg.seed);
                });
                qcurve = &local_q;
            }
            break;
        }
        case Mode::setting2: {
            NwFit fit = detail::stage("longrun", [&] { return nw_center(feats, smoother); });
            LongRunMatrix lr = detail::stage("longrun", [&] { return setting2_matrix(fit.residuals, smoother, cfg.hac); });
            est.cond = lr.cond;
            field = detail::stage("scale", [&] { return scale_setting2(field, lr.factor); });
            if (!qcurve) {
                local_q = detail::stage("quantiles", [&] {
                    return simulate_quantiles(CovKernel::known_kernel(), equispaced_grid(cfg.sim_grid), feats.K(),
                                              cfg.alpha, cfg.draws, cfg.seed);
                });
                qcurve = &local_q;
            }
            break;
        }
        case Mode::general: {
            NwFit fit = detail::stage("longrun", [&] { return nw_center(feats, smoother); });
            if (!qcurve) {
                Eigen::MatrixXd resid = fit.residuals;
                HacConfig hac = cfg.hac;
                auto sigma2_fn = [resid, hac](double u, int k, int k2) { return hac_sigma2(resid, u, k, k2, hac); };
                local_q = detail::stage("quantiles", [&] {
                    return simulate_quantiles(CovKernel::plugin_kernel(sigma2_fn), equispaced_grid(cfg.sim_grid),
                                              feats.K(), cfg.alpha, cfg.draws, cfg.seed);
                });
                qcurve = &local_q;
            }
            break;
        }
    }

    ChangeEstimate two = detail::stage("estimate", [&] { return two_step_estimate(field, *qcurve, cfg.alpha); });
    est.u0_prelim = two.u0_prelim;
    est.tau_prelim = two.tau_prelim;
    est.tau_refined = two.tau_refined;
    est.u0 = two.u0;
    est.prelim_zero = two.prelim_zero;
    est.alpha = cfg.alpha;
    est.direction = cfg.direction;
    est.seed = cfg.seed;

    if (cfg.keep_curves) {
        const double rootT = std::sqrt(static_cast<double>(field.grid.T));
        est.curve_u.resize(static_cast<std::size_t>(field.grid.size()));
        est.curve_sup.resize(static_cast<std::size_t>(field.grid.size()));
        for (int i = 0; i < field.grid.size(); ++i) {
            est.curve_u[static_cast<std::size_t>(i)] = field.grid.u(i);
            est.curve_sup[static_cast<std::size_t>(i)] = rootT * field.sup_curve[static_cast<std::size_t>(i)];
        }
    }

    if (cfg.direction == Direction::from_right) {
        est.u0 = 1.0 - est.u0;
        est.u0_prelim = 1.0 - est.u0_prelim;
    }
    return est;
}

}  // namespace gradwatch
