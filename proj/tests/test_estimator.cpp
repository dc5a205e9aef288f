#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "swent/bounds.hpp"
#include "swent/estimator.hpp"

using namespace swent;
using Eigen::MatrixXd;

namespace {

flow::SwitchedSystem scalar_system(std::vector<double> rates,
                                   std::vector<signals::Segment> segs) {
    std::vector<MatrixXd> mats;
    for (double a : rates) {
        MatrixXd m(1, 1);
        m(0, 0) = a;
        mats.push_back(m);
    }
    return flow::SwitchedSystem(
        lie::ModeSet(std::move(mats)),
        signals::SwitchingSignal(static_cast<int>(rates.size()), std::move(segs),
                                 signals::Repeat::periodic));
}

flow::SwitchedSystem zero_system() { return scalar_system({0.0}, {{1, 1.0}}); }

MatrixXd diag2(double a, double b) {
    MatrixXd m = MatrixXd::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

flow::SwitchedSystem diag_example_system() {
    return flow::SwitchedSystem(
        lie::ModeSet({diag2(2, 0), diag2(2, -1)}),
        signals::SwitchingSignal(2, {{1, 1.0}, {2, 1.0}}, signals::Repeat::periodic));
}

flow::SwitchedSystem random_diag_system(std::mt19937& rng, double amp) {
    std::uniform_real_distribution<double> rate(-amp, amp);
    std::uniform_real_distribution<double> dur(0.6, 1.4);
    return flow::SwitchedSystem(
        lie::ModeSet({diag2(rate(rng), rate(rng)), diag2(rate(rng), rate(rng))}),
        signals::SwitchingSignal(2, {{1, dur(rng)}, {2, dur(rng)}},
                                 signals::Repeat::periodic));
}

estimator::EstimationConfig config_with(std::vector<double> horizons,
                                        std::vector<double> epsilons, int res,
                                        estimator::Method method) {
    estimator::EstimationConfig cfg;
    cfg.horizons = std::move(horizons);
    cfg.epsilons = std::move(epsilons);
    cfg.grid_resolution = res;
    cfg.method = method;
    return cfg;
}

// 1-D interval cover count: the independent oracle for scalar systems.
long long interval_cover_oracle(double growth, double eps) {
    return static_cast<long long>(std::ceil(growth / (2.0 * eps)));
}

} // namespace

TEST_CASE("spanning count: static system needs a couple of points") {
    auto cfg = config_with({1.0}, {0.5}, 63, estimator::Method::spanning_greedy);
    const long long count = estimator::spanning_count(zero_system(), 1.0, 0.5, cfg);
    CHECK(count >= 1);
    CHECK(count <= 2);
}

TEST_CASE("spanning count: expanding scalar within a factor two of the cover oracle") {
    auto sys = scalar_system({1.0}, {{1, 1.0}});
    auto cfg = config_with({3.0}, {0.25}, 64, estimator::Method::spanning_greedy);
    const long long count = estimator::spanning_count(sys, 3.0, 0.25, cfg);
    const long long oracle = interval_cover_oracle(std::exp(3.0), 0.25); // 41
    CHECK(oracle == 41);
    CHECK(2 * count >= oracle);
    CHECK(count <= 2 * oracle);
}

TEST_CASE("spanning count: diagonal pair against the per-coordinate oracle") {
    auto sys = diag_example_system();
    auto cfg = config_with({2.0}, {0.25}, 64, estimator::Method::spanning_greedy);
    const long long count = estimator::spanning_count(sys, 2.0, 0.25, cfg);
    // per-coordinate peaks over [0,2]: kappa_1 = 4 at t = 2, kappa_2 = 0 at t = 0
    const long long oracle =
        interval_cover_oracle(std::exp(4.0), 0.25) * interval_cover_oracle(1.0, 0.25);
    CHECK(oracle == 220);
    CHECK(4 * count >= oracle);
    CHECK(count <= 4 * oracle);
}

TEST_CASE("separated count: static packing on the exact half-spacing lattice") {
    auto cfg = config_with({1.0}, {0.5}, 63, estimator::Method::separated_greedy);
    // candidates at 0, 0.5, 1 are pairwise exactly 0.5 apart
    CHECK(estimator::separated_count(zero_system(), 1.0, 0.5, cfg) == 3);
}

TEST_CASE("config validation rejects degenerate lattices and bad lists") {
    estimator::EstimationConfig cfg;
    cfg.horizons = {1.0};
    cfg.grid_resolution = 2;
    CHECK_THROWS_AS(cfg.validate(1), std::invalid_argument);
    cfg.grid_resolution = 513;
    CHECK_THROWS_AS(cfg.validate(1), std::invalid_argument);
    cfg.grid_resolution = 65; // 65^3 exceeds the total lattice cap
    CHECK_THROWS_AS(cfg.validate(3), std::invalid_argument);
    CHECK_NOTHROW(cfg.validate(2));
    cfg.grid_resolution = 33;
    CHECK_THROWS_AS(cfg.validate(4), std::invalid_argument);
    cfg.epsilons = {0.5, 0.6};
    CHECK_THROWS_AS(cfg.validate(1), std::invalid_argument);
    cfg.epsilons = {0.5, 0.25};
    cfg.horizons = {2.0, 1.0};
    CHECK_THROWS_AS(cfg.validate(1), std::invalid_argument);
    cfg.horizons = {1.0, 2.0};
    CHECK_NOTHROW(cfg.validate(1));
    cfg.horizons = {1.0, 2.0};
    CHECK_THROWS_AS(cfg.validate(1, true), std::invalid_argument); // rate fit needs 3
}

TEST_CASE("overflow-poisoned separations raise the coarse-lattice error") {
    auto sys = scalar_system({200.0}, {{1, 1.0}});
    auto cfg = config_with({10.0}, {0.5}, 16, estimator::Method::spanning_greedy);
    CHECK_THROWS_AS(estimator::spanning_count(sys, 10.0, 0.5, cfg),
                    estimator::LatticeTooCoarse);
}

TEST_CASE("spanning and separated counts sandwich each other") {
    auto sys = scalar_system({1.0}, {{1, 1.0}});
    auto cfg = config_with({2.0}, {0.45}, 64, estimator::Method::spanning_greedy);
    const long long sep2 = estimator::separated_count(sys, 2.0, 0.9, cfg);
    const long long span = estimator::spanning_count(sys, 2.0, 0.45, cfg);
    const long long sep = estimator::separated_count(sys, 2.0, 0.45, cfg);
    CHECK(sep2 <= span);
    CHECK(span <= 2 * sep);
}

TEST_CASE("sandwich holds for random diagonal systems") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        auto sys = random_diag_system(rng, 0.7);
        auto cfg = config_with({2.0}, {0.3}, 33, estimator::Method::spanning_greedy);
        const long long sep2 = estimator::separated_count(sys, 2.0, 0.6, cfg);
        const long long span = estimator::spanning_count(sys, 2.0, 0.3, cfg);
        const long long sep = estimator::separated_count(sys, 2.0, 0.3, cfg);
        CHECK(sep2 <= span);
        CHECK(span <= 4 * sep);
    }
}

TEST_CASE("spanning counts are monotone in horizon and tolerance") {
    auto sys = flow::SwitchedSystem(
        lie::ModeSet({diag2(0.6, -0.3), diag2(0.2, 0.4)}),
        signals::SwitchingSignal(2, {{1, 1.0}, {2, 1.0}}, signals::Repeat::periodic));
    auto cfg = config_with({1.0}, {0.4}, 33, estimator::Method::spanning_greedy);
    long long prev = 0;
    for (double T : {1.0, 2.0, 3.0}) {
        const long long c = estimator::spanning_count(sys, T, 0.4, cfg);
        CHECK(c >= prev);
        prev = c;
    }
    long long prev_eps = 0;
    for (double eps : {0.45, 0.3, 0.2}) {
        const long long c = estimator::spanning_count(sys, 2.0, eps, cfg);
        CHECK(c >= prev_eps);
        prev_eps = c;
    }
}

TEST_CASE("grid formula: closed-form counts") {
    auto scalar = scalar_system({1.0}, {{1, 1.0}});
    auto st = lie::classify(scalar.modes);
    CHECK(estimator::grid_formula_count(scalar, st, 3.0, 0.25) == 41);

    auto zero = zero_system();
    auto st0 = lie::classify(zero.modes);
    CHECK(estimator::grid_formula_count(zero, st0, 5.0, 0.25) == 2);

    auto sys = diag_example_system();
    auto st1 = lie::classify(sys.modes);
    CHECK(estimator::grid_formula_count(sys, st1, 2.0, 0.25) == 220);
}

TEST_CASE("grid formula rejects non-diagonal structure") {
    MatrixXd jordan(2, 2);
    jordan << 1, 1, 0, 1;
    flow::SwitchedSystem sys(
        lie::ModeSet({jordan}),
        signals::SwitchingSignal(1, {{1, 1.0}}, signals::Repeat::periodic));
    auto st = lie::classify(sys.modes);
    CHECK_THROWS_AS(estimator::grid_formula_count(sys, st, 2.0, 0.25),
                    std::invalid_argument);
}

TEST_CASE("greedy spanning tracks the closed form on diagonal systems") {
    std::mt19937 rng(19);
    for (int trial = 0; trial < 6; ++trial) {
        auto sys = random_diag_system(rng, 0.6);
        auto st = lie::classify(sys.modes);
        auto cfg = config_with({2.5}, {0.3}, 33, estimator::Method::spanning_greedy);
        const long long greedy = estimator::spanning_count(sys, 2.5, 0.3, cfg);
        const long long formula = estimator::grid_formula_count(sys, st, 2.5, 0.3);
        CHECK(4 * greedy >= formula);
        CHECK(greedy <= 4 * formula);
    }
}

TEST_CASE("entropy rate: alternating scalar lands on the weighted exponent") {
    auto sys = scalar_system({2.0, -1.0}, {{1, 1.0}, {2, 1.0}});
    auto cfg = config_with({4.0, 8.0, 12.0, 16.0}, {0.5, 0.25}, 64,
                           estimator::Method::grid_formula);
    auto res = estimator::entropy_rate(sys, cfg);
    CHECK(std::abs(res.rate - 0.5) <= 0.1);
    // the additive log term cancels in the slope, so eps barely matters
    CHECK(std::abs(res.slopes[0] - res.slopes[1]) <=
          0.05 * (1.0 + std::abs(res.rate)));
}

TEST_CASE("entropy rate: static system has rate zero") {
    auto cfg = config_with({2.0, 4.0, 6.0}, {0.5, 0.25}, 33,
                           estimator::Method::spanning_greedy);
    auto res = estimator::entropy_rate(zero_system(), cfg);
    CHECK(std::abs(res.rate) <= 0.01);
}

TEST_CASE("entropy rate: LTI diagonal matches the eigenvalue sum") {
    flow::SwitchedSystem sys(
        lie::ModeSet({diag2(1.0, -1.0)}),
        signals::SwitchingSignal(1, {{1, 1.0}}, signals::Repeat::periodic));
    auto cfg = config_with({4.0, 8.0, 12.0}, {0.5, 0.25}, 64,
                           estimator::Method::grid_formula);
    auto res = estimator::entropy_rate(sys, cfg);
    CHECK(std::abs(res.rate - 1.0) <= 0.1);
}

TEST_CASE("entropy rate: greedy estimate stays within the analytic bounds") {
    flow::SwitchedSystem sys(
        lie::ModeSet({diag2(0.5, -0.5)}),
        signals::SwitchingSignal(1, {{1, 1.0}}, signals::Repeat::periodic));
    auto cfg = config_with({2.0, 3.0, 4.0}, {0.5, 0.35}, 48,
                           estimator::Method::spanning_greedy);
    auto res = estimator::entropy_rate(sys, cfg);
    auto an = bounds::analyze(sys);
    CHECK(res.rate >= *an.report.lower - 0.15);
    CHECK(res.rate <= *an.report.upper + 0.15);
}

TEST_CASE("entropy rate: counts respect table monotonicity") {
    auto sys = diag_example_system();
    auto cfg = config_with({0.5, 1.0, 1.5}, {0.45, 0.3}, 33,
                           estimator::Method::spanning_greedy);
    auto res = estimator::entropy_rate(sys, cfg);
    for (std::size_t ei = 0; ei < res.epsilons.size(); ++ei) {
        for (std::size_t ti = 0; ti < res.horizons.size(); ++ti) {
            CHECK(res.counts[ei][ti] >= 1);
            if (ti > 0) CHECK(res.counts[ei][ti] >= res.counts[ei][ti - 1]);
            if (ei > 0) CHECK(res.counts[ei][ti] >= res.counts[ei - 1][ti]);
        }
    }
}

TEST_CASE("identical runs produce identical counts") {
    auto sys = diag_example_system();
    auto cfg = config_with({1.0, 2.0, 3.0}, {0.5, 0.3}, 33,
                           estimator::Method::spanning_greedy);
    auto a = estimator::entropy_rate(sys, cfg);
    auto b = estimator::entropy_rate(sys, cfg);
    CHECK(a.counts == b.counts);
    CHECK(a.rate == b.rate);
}

TEST_CASE("three-dimensional lattices work end to end") {
    MatrixXd a = MatrixXd::Zero(3, 3);
    a(0, 0) = 0.5;
    a(1, 1) = -0.3;
    a(2, 2) = 0.1;
    flow::SwitchedSystem sys(
        lie::ModeSet({a}),
        signals::SwitchingSignal(1, {{1, 1.0}}, signals::Repeat::periodic));
    auto cfg = config_with({1.5}, {0.4}, 9, estimator::Method::spanning_greedy);

    auto st = lie::classify(sys.modes);
    const long long formula = estimator::grid_formula_count(sys, st, 1.5, 0.4);
    CHECK(formula == 12); // 3 * 2 * 2 from the per-axis peaks

    const long long span = estimator::spanning_count(sys, 1.5, 0.4, cfg);
    CHECK(8 * span >= formula);
    CHECK(span <= 8 * formula);

    const long long sep2 = estimator::separated_count(sys, 1.5, 0.8, cfg);
    const long long sep = estimator::separated_count(sys, 1.5, 0.4, cfg);
    CHECK(sep2 <= span);
    CHECK(span <= 8 * sep);
}

TEST_CASE("results are bitwise identical across thread counts") {
    auto sys = diag_example_system();
    auto cfg = config_with({1.0, 2.0, 3.0}, {0.5, 0.3}, 64,
                           estimator::Method::spanning_greedy);
    setenv("SWENT_THREADS", "1", 1);
    auto serial = estimator::entropy_rate(sys, cfg);
    setenv("SWENT_THREADS", "4", 1);
    auto parallel = estimator::entropy_rate(sys, cfg);
    unsetenv("SWENT_THREADS");
    CHECK(serial.counts == parallel.counts);
    CHECK(serial.rate == parallel.rate);
    for (std::size_t i = 0; i < serial.slopes.size(); ++i) {
        CHECK(serial.slopes[i] == parallel.slopes[i]);
    }
}
