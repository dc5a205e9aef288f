#include <benchmark/benchmark.h>

#include <random>

#include "swent/bounds.hpp"
#include "swent/estimator.hpp"
#include "swent/flow.hpp"
#include "swent/lie.hpp"

using namespace swent;
using Eigen::MatrixXd;

namespace {

MatrixXd random_matrix(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) m(i, j) = u(rng);
    }
    return m;
}

flow::SwitchedSystem random_system(int n, int k, unsigned seed) {
    std::mt19937 rng(seed);
    std::vector<MatrixXd> mats;
    for (int j = 0; j < k; ++j) mats.push_back(0.5 * random_matrix(rng, n));
    std::uniform_real_distribution<double> dur(0.4, 1.2);
    std::uniform_int_distribution<int> mode(1, k);
    std::vector<signals::Segment> segs;
    for (int i = 0; i < 3; ++i) segs.push_back({mode(rng), dur(rng)});
    return flow::SwitchedSystem(
        lie::ModeSet(std::move(mats)),
        signals::SwitchingSignal(k, std::move(segs), signals::Repeat::periodic));
}

void BM_TransitionMatrix(benchmark::State& state) {
    auto sys = random_system(static_cast<int>(state.range(0)), 2, 42);
    flow::FlowPropagator prop(sys);
    double t = 1.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(prop.transition(t));
        t += 0.37;
        if (t > 50.0) t = 1.0;
    }
}
BENCHMARK(BM_TransitionMatrix)->Arg(2)->Arg(3);

void BM_VolumeGrowth(benchmark::State& state) {
    auto sys = random_system(2, 2, 43);
    for (auto _ : state) {
        benchmark::DoNotOptimize(flow::volume_growth(sys, 10.0));
    }
}
BENCHMARK(BM_VolumeGrowth);

void BM_LieClassifyTriangular(benchmark::State& state) {
    std::mt19937 rng(44);
    const int n = static_cast<int>(state.range(0));
    MatrixXd q = Eigen::HouseholderQR<MatrixXd>(random_matrix(rng, n))
                     .householderQ() *
                 MatrixXd::Identity(n, n);
    MatrixXd a = random_matrix(rng, n);
    MatrixXd b = random_matrix(rng, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < i; ++j) {
            a(i, j) = 0.0;
            b(i, j) = 0.0;
        }
    }
    lie::ModeSet modes({q * a * q.transpose(), q * b * q.transpose()});
    for (auto _ : state) {
        benchmark::DoNotOptimize(lie::classify(modes));
    }
}
BENCHMARK(BM_LieClassifyTriangular)->Arg(2)->Arg(3)->Arg(4);

void BM_SpanningCount(benchmark::State& state) {
    auto sys = random_system(2, 2, 45);
    estimator::EstimationConfig cfg;
    cfg.horizons = {2.0};
    cfg.grid_resolution = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(estimator::spanning_count(sys, 2.0, 0.4, cfg));
    }
}
BENCHMARK(BM_SpanningCount)->Arg(33)->Arg(65)->Arg(129);

void BM_EntropyRateFormula(benchmark::State& state) {
    auto sys = flow::SwitchedSystem(
        lie::ModeSet({(MatrixXd(2, 2) << 2, 0, 0, 0).finished(),
                      (MatrixXd(2, 2) << 2, 0, 0, -1).finished()}),
        signals::SwitchingSignal(2, {{1, 1.0}, {2, 1.0}}, signals::Repeat::periodic));
    estimator::EstimationConfig cfg;
    cfg.horizons = {4.0, 8.0, 12.0, 16.0};
    cfg.method = estimator::Method::grid_formula;
    for (auto _ : state) {
        benchmark::DoNotOptimize(estimator::entropy_rate(sys, cfg));
    }
}
BENCHMARK(BM_EntropyRateFormula);

} // namespace

BENCHMARK_MAIN();
