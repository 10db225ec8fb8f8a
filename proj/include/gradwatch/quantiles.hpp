#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "psd.hpp"
#include "rng.hpp"

namespace gradwatch {

/// Closed-form covariance of the normalized limit process,
///   C(u,u',v,v') = (v v'/(u u')) min{u,u'} - (v'/u') min{v,u'}
///                  - (v/u) min{u,v'} + min{v,v'}.
/// Degenerate on the diagonal: C(u,u,u,u) = 0.
inline double known_cov(double u, double u2, double v, double v2) {
    return (v * v2 / (u * u2)) * std::min(u, u2) - (v2 / u2) * std::min(v, u2) - (v / u) * std::min(u, v2) +
           std::min(v, v2);
}

enum class KernelMode { known, plugin };

/// Covariance kernel for the limit process. In plug-in mode the sigma2_fn
/// supplies the estimated long-run covariances sigma2(u, k, k2) and the
/// kernel is assembled term by term from the same four-piece structure.
struct CovKernel {
    KernelMode mode = KernelMode::known;
    std::function<double(double, int, int)> sigma2;  // (u, k, k2) -> sigma2 estimate

    static CovKernel known_kernel() { return CovKernel{KernelMode::known, {}}; }
    static CovKernel plugin_kernel(std::function<double(double, int, int)> fn) {
        return CovKernel{KernelMode::plugin, std::move(fn)};
    }
};

inline double plugin_cov(const CovKernel& kernel, double u, double u2, double v, double v2, int k, int k2) {
    const auto& s = kernel.sigma2;
    return (v * v2 / (u * u2)) * s(std::min(u, u2), k, k2) - (v2 / u2) * s(std::min(v, u2), k, k2) -
           (v / u) * s(std::min(u, v2), k, k2) + s(std::min(v, v2), k, k2);
}

/// Triangular pair layout over a grid of n points: (i, j) with j <= i,
/// flattened as i(i+1)/2 + j.
inline std::size_t pair_count(std::size_t n) { return n * (n + 1) / 2; }

/// Covariance matrix over the index set {(k, i, j): j <= i}, feature-major.
/// In known mode the cross-feature blocks are zero and the diagonal blocks
/// are identical copies of the closed-form kernel.
inline Eigen::MatrixXd assemble_covariance(const CovKernel& kernel, const std::vector<double>& grid, int K) {
    const std::size_t n = grid.size();
    if (n == 0) throw std::invalid_argument("assemble_covariance: empty grid");
    for (std::size_t i = 0; i < n; ++i)
        if (grid[i] <= 0.0 || grid[i] > 1.0 || (i > 0 && grid[i] <= grid[i - 1]))
            throw std::invalid_argument("assemble_covariance: grid must be ascending in (0,1]");
    if (kernel.mode == KernelMode::plugin && !kernel.sigma2)
        throw std::invalid_argument("assemble_covariance: plug-in kernel needs sigma2_fn");

    const std::size_t P = pair_count(n);
    const std::size_t dim = P * static_cast<std::size_t>(K);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));

    auto fill_block = [&](int k, int k2, auto cov) {
        std::size_t r = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j, ++r) {
                std::size_t c = 0;
                for (std::size_t i2 = 0; i2 < n; ++i2)
                    for (std::size_t j2 = 0; j2 <= i2; ++j2, ++c)
                        M(static_cast<Eigen::Index>(static_cast<std::size_t>(k) * P + r),
                          static_cast<Eigen::Index>(static_cast<std::size_t>(k2) * P + c)) =
                            cov(grid[i], grid[i2], grid[j], grid[j2]);
            }
    };

    if (kernel.mode == KernelMode::known) {
        for (int k = 0; k < K; ++k)
            fill_block(k, k, [](double u, double u2, double v, double v2) { return known_cov(u, u2, v, v2); });
    } else {
        for (int k = 0; k < K; ++k)
            for (int k2 = 0; k2 < K; ++k2)
                fill_block(k, k2, [&kernel, k, k2](double u, double u2, double v, double v2) {
                    return plugin_cov(kernel, u, u2, v, v2, k, k2);
                });
    }
    return M;
}

/// Per-grid-point empirical quantiles of the simulated sup process.
struct QuantileCurve {
    double alpha = 0.1;
    std::vector<double> u;  // ascending, last point 1
    std::vector<double> q;  // nonnegative, nondecreasing
    int draws = 0;
    std::uint64_t seed = 0;
    KernelMode mode = KernelMode::known;
    bool tail_warning = false;  // alpha * draws < 5
};

inline std::vector<double> equispaced_grid(int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) g[static_cast<std::size_t>(i - 1)] = static_cast<double>(i) / n;
    return g;
}

namespace detail {

// Per-draw running sup statistic over the triangle {j <= i' <= i}, maximized
// across features; H holds one P-vector per feature.
inline void accumulate_sup(const std::vector<Eigen::VectorXd>& H, std::size_t n, std::vector<double>& stat) {
    stat.assign(n, 0.0);
    for (std::size_t k = 0; k < H.size(); ++k) {
        std::size_t r = 0;
        double run = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j, ++r) run = std::max(run, std::abs(H[k](static_cast<Eigen::Index>(r))));
            stat[i] = std::max(stat[i], run);
        }
    }
    // combined curve must stay nondecreasing across features
    for (std::size_t i = 1; i < n; ++i) stat[i] = std::max(stat[i], stat[i - 1]);
}

}  // namespace detail

/// Monte Carlo quantiles of the sup of the limiting Gaussian process.
/// Draws are generated from per-draw substreams of the seed, so the result
/// is bit-reproducible and independent of evaluation order. In known mode
/// the K feature blocks are independent copies of one factored block.
inline QuantileCurve simulate_quantiles(const CovKernel& kernel, const std::vector<double>& grid, int K, double alpha,
                                        int draws, std::uint64_t seed) {
    if (draws < 100) throw std::invalid_argument("simulate_quantiles: need draws >= 100");
    if (alpha <= 0.0 || alpha >= 1.0) throw std::invalid_argument("simulate_quantiles: need 0 < alpha < 1");
    const std::size_t n = grid.size();
    const std::size_t P = pair_count(n);

    // factor the repaired covariance once
    Eigen::MatrixXd factor;
    int blocks = 1;
    if (kernel.mode == KernelMode::known) {
        factor = psd_repair(assemble_covariance(kernel, grid, 1)).factor;
        blocks = K;
    } else {
        factor = psd_repair(assemble_covariance(kernel, grid, K)).factor;
    }
    const Eigen::Index dim = factor.cols();

    std::vector<std::vector<double>> stats(n, std::vector<double>(static_cast<std::size_t>(draws)));
    std::vector<Eigen::VectorXd> H;
    std::vector<double> stat;
    Eigen::VectorXd z(dim);
    for (int d = 0; d < draws; ++d) {
        auto gen = make_rng(substream_seed(seed, static_cast<std::uint64_t>(d)));
        std::normal_distribution<double> normal(0.0, 1.0);
        H.clear();
        for (int b = 0; b < blocks; ++b) {
            for (Eigen::Index i = 0; i < dim; ++i) z(i) = normal(gen);
            Eigen::VectorXd v = factor * z;
            if (kernel.mode == KernelMode::plugin) {
                // split the feature-major vector into per-feature P-blocks
                for (int k = 0; k < K; ++k) H.push_back(v.segment(static_cast<Eigen::Index>(static_cast<std::size_t>(k) * P), static_cast<Eigen::Index>(P)));
            } else {
                H.push_back(std::move(v));
            }
        }
        detail::accumulate_sup(H, n, stat);
        for (std::size_t i = 0; i < n; ++i) stats[i][static_cast<std::size_t>(d)] = stat[i];
    }

    QuantileCurve out;
    out.alpha = alpha;
    out.u = grid;
    out.draws = draws;
    out.seed = seed;
    out.mode = kernel.mode;
    out.tail_warning = alpha * draws < 5.0;
    out.q.resize(n);
    // type-1 inverse CDF: ceiling-index order statistic
    const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(draws) - 1,
                                                  static_cast<std::size_t>(std::ceil((1.0 - alpha) * draws)) - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::sort(stats[i].begin(), stats[i].end());
        out.q[i] = stats[i][idx];
    }
    return out;
}

/// Export (u, q) as a two-column CSV.
inline void write_quantiles_csv(const QuantileCurve& qc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_quantiles_csv: cannot open '" + path + "'");
    out << "u,q\n";
    char buf[64];
    for (std::size_t i = 0; i < qc.u.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", qc.u[i], qc.q[i]);
        out << buf;
    }
}

}  // namespace gradwatch
