#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "estimator.hpp"
#include "rng.hpp"

namespace gradwatch {

/// Closed-form simulation design: a mean (or volatility) path over rescaled
/// time plus an error law. AR(1) errors start from their stationary law.
struct Design {
    std::string name;
    int T = 500;
    double u0_true = 0.5;
    std::function<double(double)> path;  // mean(u), or vol(u) when multiplicative
    bool multiplicative = false;         // X = path(u) * eps instead of path(u) + eps
    double ar_coef = 0.0;
    double innov_sd = 0.2;
};

/// Build one of the named designs:
///   mu1, mu2 (AR(1) errors 0.25 / sd 0.5), mu4, mu5, nochange (i.i.d. sd 0.2),
///   returns (vol constant on [0.6, 1], i.i.d. standard normal factors),
///   piecewise (jump at jump_at, AR(1) errors, smooth drift afterwards).
inline Design make_design(const std::string& name, int T, double jump_at = 0.5) {
    Design d;
    d.name = name;
    d.T = T;
    if (name == "mu1") {
        d.path = [](double u) { return u > 0.5 ? 1.0 : 0.0; };
        d.ar_coef = 0.25;
        d.innov_sd = 0.5;
    } else if (name == "mu2") {
        d.path = [](double u) {
            if (u > 0.5 && u < 0.6) return 10.0 * (u - 0.5);
            return u > 0.6 ? 1.0 : 0.0;
        };
        d.ar_coef = 0.25;
        d.innov_sd = 0.5;
    } else if (name == "mu4") {
        d.path = [](double u) { return u > 0.5 ? 2.0 * (u - 0.5) : 0.0; };
        d.innov_sd = 0.2;
    } else if (name == "mu5") {
        d.path = [](double u) {
            if (u > 0.5 && u < 0.6) return 10.0 * (u - 0.5);
            return u >= 0.6 ? 1.0 : 0.0;
        };
        d.innov_sd = 0.2;
    } else if (name == "nochange") {
        d.path = [](double) { return 0.0; };
        d.innov_sd = 0.2;
        d.u0_true = 1.0;
    } else if (name == "returns") {
        // vol decreases linearly from 4 to 1 and is constant on [0.6, 1]
        d.path = [](double u) { return u < 0.6 ? 1.0 + 5.0 * (0.6 - u) : 1.0; };
        d.multiplicative = true;
        d.innov_sd = 1.0;
        d.u0_true = 0.6;
    } else if (name == "piecewise") {
        d.path = [jump_at](double u) { return u > jump_at ? 1.0 + (u - jump_at) : 0.0; };
        d.ar_coef = 0.25;
        d.innov_sd = 0.5;
        d.u0_true = jump_at;
    } else {
        throw std::invalid_argument("make_design: unknown design '" + name + "'");
    }
    return d;
}

inline TimeSeries generate(const Design& design, std::uint64_t seed) {
    if (design.T < 10) throw std::invalid_argument("generate: need T >= 10");
    auto gen = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(design.T, 1);
    double eps = 0.0;
    if (design.ar_coef != 0.0 && design.innov_sd > 0.0) {
        // stationary warm start
        eps = normal(gen) * design.innov_sd / std::sqrt(1.0 - design.ar_coef * design.ar_coef);
    }
    for (int t = 1; t <= design.T; ++t) {
        const double u = static_cast<double>(t) / design.T;
        double innov = design.innov_sd > 0.0 ? normal(gen) * design.innov_sd : 0.0;
        eps = design.ar_coef * eps + innov;
        if (design.ar_coef == 0.0) eps = innov;
        x(t - 1, 0) = design.multiplicative ? design.path(u) * eps : design.path(u) + eps;
    }
    return make_series(std::move(x));
}

/// Monte Carlo replication summary.
struct McReport {
    std::string design;
    int T = 0;
    int N = 0;
    double alpha = 0.1;
    double u0_true = 0.5;
    std::uint64_t base_seed = 0;
    std::vector<double> estimates;       // final u0 per replication
    std::vector<double> prelim;          // preliminary u0 per replication
    std::vector<std::uint64_t> seeds;
    int errors = 0;
    double median = 0.0;
    double mean = 0.0;
    double underestimation_fraction = 0.0;
    std::vector<int> histogram;          // 50 bins of width 0.02 on [0, 1]
};

namespace detail {

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline void summarize(McReport& r) {
    r.median = detail::median_of(r.estimates);
    r.mean = r.estimates.empty() ? 0.0 : std::accumulate(r.estimates.begin(), r.estimates.end(), 0.0) / r.estimates.size();
    int under = 0;
    for (double e : r.estimates)
        if (e < r.u0_true) ++under;
    r.underestimation_fraction = r.estimates.empty() ? 0.0 : static_cast<double>(under) / r.estimates.size();
    r.histogram.assign(50, 0);
    for (double e : r.estimates) {
        int bin = std::min(49, static_cast<int>(std::floor(e / 0.02)));
        r.histogram[static_cast<std::size_t>(std::max(0, bin))] += 1;
    }
}

/// Run N independent replications of detect on fresh draws from the design.
/// The quantile curve for known-kernel modes is simulated once and shared;
/// per-replication failures are recorded and skipped.
inline McReport run_mc(const Design& design, const FeatureFamily& family, const DetectConfig& cfg, int N,
                       std::uint64_t base_seed) {
    if (N < 1) throw std::invalid_argument("run_mc: need N >= 1");
    McReport r;
    r.design = design.name;
    r.T = design.T;
    r.N = N;
    r.alpha = cfg.alpha;
    r.u0_true = design.u0_true;
    r.base_seed = base_seed;

    DetectConfig local = cfg;
    local.keep_curves = false;
    QuantileCurve shared_q;
    if (!local.precomputed_quantiles && local.mode != Mode::general) {
        shared_q = simulate_quantiles(CovKernel::known_kernel(), equispaced_grid(local.sim_grid), family.size(),
                                      local.alpha, local.draws, substream_seed(base_seed, 0xabcdefULL));
        local.precomputed_quantiles = &shared_q;
    }

    for (int rep = 0; rep < N; ++rep) {
        const std::uint64_t s = substream_seed(base_seed, static_cast<std::uint64_t>(rep) + 1);
        try {
            TimeSeries x = generate(design, s);
            DetectConfig c = local;
            c.seed = s;
            ChangeEstimate est = detect(x, family, c);
            r.estimates.push_back(est.u0);
            r.prelim.push_back(est.u0_prelim);
            r.seeds.push_back(s);
        } catch (const std::exception&) {
            ++r.errors;
        }
    }
    summarize(r);
    return r;
}

/// Write summary JSON, per-replication CSV, and histogram CSV, deterministic
/// given the report.
inline void emit(const McReport& r, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("emit: cannot create directory '" + out_dir + "': " + ec.message());

    {
        nlohmann::json j;
        j["design"] = r.design;
        j["T"] = r.T;
        j["N"] = r.N;
        j["alpha"] = r.alpha;
        j["u0_true"] = r.u0_true;
        j["base_seed"] = r.base_seed;
        j["median"] = r.median;
        j["mean"] = r.mean;
        j["underestimation_fraction"] = r.underestimation_fraction;
        j["errors"] = r.errors;
        j["replications_completed"] = r.estimates.size();
        std::ofstream out(out_dir + "/summary.json");
        if (!out) throw std::runtime_error("emit: cannot write '" + out_dir + "/summary.json'");
        out << j.dump(2) << "\n";
    }
    {
        std::ofstream out(out_dir + "/estimates.csv");
        if (!out) throw std::runtime_error("emit: cannot write '" + out_dir + "/estimates.csv'");
        out << "rep,seed,u0_prelim,u0\n";
        char buf[128];
        for (std::size_t i = 0; i < r.estimates.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%llu,%.17g,%.17g\n", i,
                          static_cast<unsigned long long>(r.seeds[i]), r.prelim[i], r.estimates[i]);
            out << buf;
        }
    }
    {
        std::ofstream out(out_dir + "/histogram.csv");
        if (!out) throw std::runtime_error("emit: cannot write '" + out_dir + "/histogram.csv'");
        out << "bin_left,count\n";
        char buf[64];
        for (std::size_t b = 0; b < r.histogram.size(); ++b) {
            std::snprintf(buf, sizeof(buf), "%.2f,%d\n", 0.02 * static_cast<double>(b), r.histogram[b]);
            out << buf;
        }
    }
}

}  // namespace gradwatch
