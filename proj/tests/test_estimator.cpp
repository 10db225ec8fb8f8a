#include <doctest.h>

#include <random>

#include <gradwatch/estimator.hpp>
#include <gradwatch/harness.hpp>

using namespace gradwatch;

namespace {

CusumField random_field(int T, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd m(T, 1);
    for (int t = 0; t < T; ++t) m(t, 0) = normal(gen);
    return cusum_field(FeatureMatrix{std::move(m), FeatureFamily{}}, Grid::full(T));
}

}  // namespace

TEST_CASE("u0_at_threshold endpoints") {
    CusumField f = random_field(60, 7);
    CHECK(u0_at_threshold(f, 1e12) == doctest::Approx(1.0).epsilon(1e-14));
    // sup curve is strictly positive except at the first point, so tau = 0
    // keeps only cells with a zero statistic
    double at_zero = u0_at_threshold(f, 0.0);
    CHECK(at_zero <= 2.0 / 60 + 1e-14);
}

TEST_CASE("u0_at_threshold is nondecreasing in tau") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        CusumField f = random_field(40, seed);
        double prev = -1.0;
        for (double tau = 0.0; tau <= 3.0; tau += 0.1) {
            double v = u0_at_threshold(f, tau);
            CHECK(v >= prev);
            prev = v;
        }
    }
}

TEST_CASE("quantile_at reads the curve left-continuously") {
    QuantileCurve qc;
    qc.alpha = 0.1;
    qc.u = {0.25, 0.5, 0.75, 1.0};
    qc.q = {1.0, 2.0, 3.0, 4.0};
    CHECK(quantile_at(qc, 0.1) == 1.0);   // below grid minimum: first value
    CHECK(quantile_at(qc, 0.25) == 1.0);
    CHECK(quantile_at(qc, 0.6) == 2.0);
    CHECK(quantile_at(qc, 1.0) == 4.0);
}

TEST_CASE("two_step_estimate orders its thresholds and estimates") {
    QuantileCurve qc = simulate_quantiles(CovKernel::known_kernel(), equispaced_grid(20), 1, 0.1, 500, 3);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        CusumField f = random_field(80, seed);
        ChangeEstimate est = two_step_estimate(f, qc, 0.1);
        CHECK(est.tau_refined <= est.tau_prelim);
        CHECK(est.u0 <= est.u0_prelim);
        CHECK(est.u0 >= 0.0);
        CHECK(est.u0 <= 1.0);
    }
}

TEST_CASE("setting1 u0 estimate is invariant under affine data maps") {
    Design d = make_design("mu1", 300);
    TimeSeries x = generate(d, 404);

    DetectConfig cfg;
    cfg.mode = Mode::setting1;
    cfg.draws = 800;
    cfg.sim_grid = 25;
    cfg.seed = 11;

    ChangeEstimate base = detect(x, mean_family(), cfg);
    TimeSeries mapped = x;
    mapped.values = 5.0 * mapped.values.array() + 3.0;
    ChangeEstimate aff = detect(mapped, mean_family(), cfg);
    CHECK(aff.u0 == doctest::Approx(base.u0).epsilon(1e-12));
    CHECK(aff.u0_prelim == doctest::Approx(base.u0_prelim).epsilon(1e-12));
}

TEST_CASE("from-right estimate matches one minus the from-left estimate on the reversed series") {
    Design d = make_design("returns", 300);
    TimeSeries x = generate(d, 505);

    QuantileCurve qc = simulate_quantiles(CovKernel::known_kernel(), equispaced_grid(25), 1, 0.1, 800, 21);
    DetectConfig cfg;
    cfg.mode = Mode::setting2;
    cfg.hac.bandwidth = 0;
    cfg.precomputed_quantiles = &qc;

    cfg.direction = Direction::from_right;
    ChangeEstimate right = detect(x, second_moment_family(), cfg);

    cfg.direction = Direction::from_left;
    ChangeEstimate left_on_reversed = detect(reverse_time(x), second_moment_family(), cfg);

    CHECK(right.u0 == doctest::Approx(1.0 - left_on_reversed.u0).epsilon(1e-12));
}

TEST_CASE("detect reports the failing pipeline stage") {
    Design d = make_design("nochange", 100);
    TimeSeries x = generate(d, 3);
    DetectConfig cfg;
    cfg.mode = Mode::setting1;
    cfg.h = 0.005;  // window too small
    CHECK_THROWS_WITH_AS(detect(x, mean_family(), cfg), doctest::Contains("longrun"), std::runtime_error);
}

TEST_CASE("general mode runs the plug-in pipeline end to end") {
    Design d = make_design("mu1", 150);
    TimeSeries x = generate(d, 8);
    DetectConfig cfg;
    cfg.mode = Mode::general;
    cfg.sim_grid = 12;
    cfg.draws = 300;
    cfg.hac.bandwidth = 5;
    ChangeEstimate est = detect(x, mean_family(), cfg);
    CHECK(est.u0 >= 0.0);
    CHECK(est.u0 <= 1.0);
}
