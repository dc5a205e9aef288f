// Acceptance suite: end-to-end checks of the library and CLI with pinned
// tolerances. Prints one PASS/FAIL line per criterion and exits nonzero when
// any fails. argv[1] must be the path to the switched-entropy binary (used by
// the determinism criterion).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <algorithm>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "swent/bounds.hpp"
#include "swent/estimator.hpp"
#include "swent/flow.hpp"
#include "swent/lie.hpp"
#include "swent/signal.hpp"

using namespace swent;
using Eigen::MatrixXd;

namespace {

namespace fs = std::filesystem;

int g_failures = 0;

void criterion(int number, const std::string& label, double budget_seconds,
               const std::function<bool(std::string&)>& body) {
    std::string detail;
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > budget_seconds) {
        ok = false;
        detail += (detail.empty() ? "" : "; ") + std::string("runtime ") +
                  std::to_string(elapsed) + " s over budget " +
                  std::to_string(budget_seconds) + " s";
    }
    std::printf("[%s] criterion %2d (%6.2f s): %s%s%s\n", ok ? "PASS" : "FAIL", number,
                elapsed, label.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

MatrixXd diag2(double a, double b) {
    MatrixXd m = MatrixXd::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

signals::SwitchingSignal half_half() {
    return signals::SwitchingSignal(2, {{1, 1.0}, {2, 1.0}}, signals::Repeat::periodic);
}

MatrixXd random_matrix(std::mt19937& rng, int n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) m(i, j) = u(rng);
    }
    return m;
}

signals::SwitchingSignal random_periodic_signal(std::mt19937& rng, int k) {
    std::uniform_int_distribution<int> seg_count(2, 4);
    std::uniform_real_distribution<double> dur(0.4, 1.5);
    std::uniform_int_distribution<int> mode(1, k);
    std::vector<signals::Segment> segs;
    const int s = seg_count(rng);
    for (int i = 0; i < s; ++i) segs.push_back({mode(rng), dur(rng)});
    return signals::SwitchingSignal(k, std::move(segs), signals::Repeat::periodic);
}

double inf_norm(const MatrixXd& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string g_cli_path;

bool criterion_diag_pair(std::string& detail) {
    auto an1 = bounds::analyze(
        flow::SwitchedSystem(lie::ModeSet({diag2(2, 0), diag2(2, -1)}), half_half()));
    auto an2 = bounds::analyze(
        flow::SwitchedSystem(lie::ModeSet({diag2(2, 0), diag2(-1, 2)}), half_half()));
    const bool ok1 = an1.report.exact && an1.report.lower && an1.report.upper &&
                     std::abs(*an1.report.lower - 2.0) <= 1e-12 &&
                     std::abs(*an1.report.upper - 2.0) <= 1e-12;
    const bool ok2 = an2.report.lower && an2.report.upper &&
                     std::abs(*an2.report.lower - 1.0) <= 1e-12 &&
                     std::abs(*an2.report.upper - 1.5) <= 1e-12;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "pair 1: [%g, %g] exact=%d; pair 2: [%g, %g]",
                  an1.report.lower.value_or(-1), an1.report.upper.value_or(-1),
                  an1.report.exact ? 1 : 0, an2.report.lower.value_or(-1),
                  an2.report.upper.value_or(-1));
    detail = buf;
    return ok1 && ok2;
}

bool criterion_scalar_rate(std::string& detail) {
    MatrixXd a(1, 1), b(1, 1);
    a(0, 0) = 2.0;
    b(0, 0) = -1.0;
    flow::SwitchedSystem sys(lie::ModeSet({a, b}), half_half());
    estimator::EstimationConfig cfg;
    cfg.horizons = {4.0, 8.0, 12.0, 16.0};
    cfg.epsilons = {0.5, 0.25};
    cfg.grid_resolution = 64;
    cfg.method = estimator::Method::grid_formula;
    auto res = estimator::entropy_rate(sys, cfg);
    detail = "rate = " + std::to_string(res.rate) + " (target 0.5 +/- 0.1)";
    return std::abs(res.rate - 0.5) <= 0.1;
}

bool criterion_lti_rates(std::string& detail) {
    flow::SwitchedSystem diag_sys(
        lie::ModeSet({diag2(1.0, -1.0)}),
        signals::SwitchingSignal(1, {{1, 1.0}}, signals::Repeat::periodic));
    estimator::EstimationConfig cfg;
    cfg.horizons = {4.0, 8.0, 12.0};
    cfg.epsilons = {0.5, 0.25};
    cfg.grid_resolution = 64;
    cfg.method = estimator::Method::grid_formula;
    auto res_diag = estimator::entropy_rate(diag_sys, cfg);

    MatrixXd jordan(2, 2);
    jordan << 1, 1, 0, 1;
    flow::SwitchedSystem jordan_sys(
        lie::ModeSet({jordan}),
        signals::SwitchingSignal(1, {{1, 1.0}}, signals::Repeat::periodic));
    estimator::EstimationConfig jcfg;
    jcfg.horizons = {1.6, 2.0, 2.4, 2.8, 3.2, 3.6};
    jcfg.epsilons = {0.5, 0.4};
    jcfg.grid_resolution = 512;
    jcfg.method = estimator::Method::spanning_greedy;
    auto res_jordan = estimator::entropy_rate(jordan_sys, jcfg);

    detail = "diag rate = " + std::to_string(res_diag.rate) +
             " (1 +/- 0.1), jordan rate = " + std::to_string(res_jordan.rate) +
             " (2 +/- 0.2)";
    return std::abs(res_diag.rate - 1.0) <= 0.1 &&
           std::abs(res_jordan.rate - 2.0) <= 0.2;
}

bool criterion_volume_identity(std::string& detail) {
    std::mt19937 rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        flow::SwitchedSystem sys(
            lie::ModeSet({random_matrix(rng, 2, -1.0, 1.0), random_matrix(rng, 2, -1.0, 1.0)}),
            random_periodic_signal(rng, 2));
        for (double T : {1.0, 5.0, 10.0}) {
            auto vg = flow::volume_growth(sys, T);
            const double rel =
                std::abs(vg.determinant_value - vg.formula_value) / vg.formula_value;
            worst = std::max(worst, rel);
            if (rel > 1e-9) {
                detail = "relative mismatch " + std::to_string(rel) + " at T = " +
                         std::to_string(T);
                return false;
            }
        }
    }
    detail = "worst relative mismatch " + std::to_string(worst);
    return true;
}

bool criterion_classifier(std::string& detail) {
    std::mt19937 rng(202);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MatrixXd e12 = MatrixXd::Zero(2, 2), e21 = MatrixXd::Zero(2, 2);
    e12(0, 1) = 1.0;
    e21(1, 0) = 1.0;
    for (int trial = 0; trial < 50; ++trial) {
        if (lie::classify(lie::ModeSet({e12, e21})).classification !=
            lie::Classification::unstructured) {
            detail = "nilpotent pair misclassified";
            return false;
        }
        auto diag_rep = lie::classify(
            lie::ModeSet({diag2(u(rng), u(rng)), diag2(u(rng), u(rng))}));
        if (diag_rep.classification != lie::Classification::commuting_diagonalizable) {
            detail = "commuting diagonal pair misclassified at trial " + std::to_string(trial);
            return false;
        }
        MatrixXd t1 = random_matrix(rng, 2, -1.0, 1.0);
        MatrixXd t2 = random_matrix(rng, 2, -1.0, 1.0);
        t1(1, 0) = 0.0;
        t2(1, 0) = 0.0;
        auto tri_rep = lie::classify(lie::ModeSet({t1, t2}));
        const double scale = std::max(1.0, std::max(t1.norm(), t2.norm()));
        if (tri_rep.classification != lie::Classification::solvable ||
            tri_rep.residual > 1e-8 * scale) {
            detail = "triangular pair misclassified at trial " + std::to_string(trial);
            return false;
        }
    }
    detail = "50 trials, zero misclassifications";
    return true;
}

struct TriangularCase {
    flow::SwitchedSystem system;
    double upper;
    double trace_eff;
    double rate;
};

std::vector<TriangularCase> g_triangular_cases;

bool criterion_triangular_sandwich(std::string& detail) {
    std::mt19937 rng(303);
    std::uniform_real_distribution<double> diag_rate(-0.9, 0.9);
    std::uniform_real_distribution<double> coupling(-0.5, 0.5);
    g_triangular_cases.clear();
    double worst_gap = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 10; ++trial) {
        MatrixXd a = MatrixXd::Zero(2, 2), b = MatrixXd::Zero(2, 2);
        a(0, 0) = diag_rate(rng);
        a(1, 1) = diag_rate(rng);
        a(0, 1) = coupling(rng);
        b(0, 0) = diag_rate(rng);
        b(1, 1) = diag_rate(rng);
        b(0, 1) = coupling(rng);
        flow::SwitchedSystem sys(lie::ModeSet({a, b}), random_periodic_signal(rng, 2));

        auto sub = signals::subexponential_check(sys.signal, {10.0, 100.0, 1000.0});
        if (sub.verdict != signals::Verdict::pass) {
            detail = "periodic signal failed the switching diagnostic";
            return false;
        }
        auto an = bounds::analyze(sys);
        if (!an.report.upper) {
            detail = "triangular bound missing at trial " + std::to_string(trial);
            return false;
        }
        estimator::EstimationConfig cfg;
        cfg.horizons = {1.5, 2.25, 3.0};
        cfg.epsilons = {0.5, 0.4};
        cfg.method = estimator::Method::spanning_greedy;
        // Resolution from the known per-axis expansion: about 24 lattice
        // steps across the thinnest covering cell at the top horizon.
        double peak = 0.0;
        std::vector<double> grid{0.0};
        for (double c : sys.signal.change_instants(3.0)) grid.push_back(c);
        grid.push_back(3.0);
        for (int axis = 0; axis < 2; ++axis) {
            const std::vector<double> rates{a(axis, axis), b(axis, axis)};
            for (double t : grid) {
                peak = std::max(peak, signals::kappa(sys.signal, rates, t));
            }
        }
        const double need = 24.0 * std::exp(peak) / (2.0 * cfg.epsilons.back());
        cfg.grid_resolution = std::clamp(static_cast<int>(std::ceil(need)), 48, 512);
        auto res = estimator::entropy_rate(sys, cfg);

        TriangularCase c{sys, *an.report.upper, std::max(0.0, *an.report.trace_raw),
                         res.rate};
        g_triangular_cases.push_back(c);
        worst_gap = std::min(worst_gap, c.upper + 0.15 - c.rate);
        if (c.rate > c.upper + 0.15) {
            detail = "rate " + std::to_string(c.rate) + " exceeded upper bound " +
                     std::to_string(c.upper) + " + 0.15";
            return false;
        }
    }
    detail = "10 systems, smallest upper-bound slack " + std::to_string(worst_gap);
    return true;
}

bool criterion_trace_bound(std::string& detail) {
    if (g_triangular_cases.size() != 10) {
        detail = "depends on the triangular-sandwich systems";
        return false;
    }
    double worst_gap = std::numeric_limits<double>::infinity();
    for (const auto& c : g_triangular_cases) {
        worst_gap = std::min(worst_gap, c.rate - (c.trace_eff - 0.15));
        if (c.rate < c.trace_eff - 0.15) {
            detail = "rate " + std::to_string(c.rate) + " fell below trace bound " +
                     std::to_string(c.trace_eff) + " - 0.15";
            return false;
        }
    }
    detail = "10 systems, smallest trace slack " + std::to_string(worst_gap);
    return true;
}

bool criterion_defective_growth(std::string& detail) {
    for (int n : {2, 3}) {
        for (double lambda : {-1.0, 0.0, 1.0}) {
            for (double delta : {0.1, 0.5}) {
                MatrixXd a = MatrixXd::Zero(n, n);
                for (int i = 0; i < n; ++i) {
                    a(i, i) = lambda;
                    if (i + 1 < n) a(i, i + 1) = 1.0;
                }
                double crossover = 0.0;
                for (double t = 0.25; t <= 100.0; t += 0.25) {
                    if (inf_norm(flow::matrix_exponential(a, t)) >
                        std::exp((lambda + delta) * t)) {
                        crossover = t;
                    }
                }
                if (crossover >= 95.0) {
                    detail = "no tail margin for n = " + std::to_string(n) +
                             ", delta = " + std::to_string(delta);
                    return false;
                }
            }
        }
    }
    detail = "all blocks beaten past a finite crossover up to t = 100";
    return true;
}

bool criterion_count_sandwich(std::string& detail) {
    std::mt19937 rng(404);
    std::uniform_real_distribution<double> rate(-0.7, 0.7);
    for (int trial = 0; trial < 10; ++trial) {
        flow::SwitchedSystem sys(
            lie::ModeSet({diag2(rate(rng), rate(rng)), diag2(rate(rng), rate(rng))}),
            random_periodic_signal(rng, 2));
        estimator::EstimationConfig cfg; // lattice defaults
        cfg.horizons = {2.0};
        const double eps = 0.3;
        const long long sep2 = estimator::separated_count(sys, 2.0, 2.0 * eps, cfg);
        const long long span = estimator::spanning_count(sys, 2.0, eps, cfg);
        const long long sep = estimator::separated_count(sys, 2.0, eps, cfg);
        if (!(sep2 <= span && span <= 4 * sep)) {
            detail = "sandwich violated at trial " + std::to_string(trial) + ": " +
                     std::to_string(sep2) + " <= " + std::to_string(span) +
                     " <= 4 * " + std::to_string(sep);
            return false;
        }
    }
    detail = "10 systems within the packing/covering sandwich";
    return true;
}

bool criterion_determinism(std::string& detail) {
    if (g_cli_path.empty()) {
        detail = "CLI path not supplied (argv[1])";
        return false;
    }
    const fs::path work = fs::path("acceptance_tmp");
    fs::remove_all(work);
    fs::create_directories(work);
    const fs::path cfg_path = work / "config.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({
  "modes": [[[2]], [[-1]]],
  "signal": {"k": 2, "repeat": "periodic", "segments": [[1, 1.0], [2, 1.0]]},
  "estimation": {"horizons": [2, 4, 6], "epsilons": [0.5, 0.25],
                 "grid_resolution": 512, "method": "spanning_greedy"}
})";
    }
    for (const char* sub : {"a", "b"}) {
        const std::string cmd = "\"" + g_cli_path + "\" estimate --config \"" +
                                cfg_path.string() + "\" --out \"" +
                                (work / sub).string() + "\" > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        if (rc != 0) {
            detail = std::string("estimate run '") + sub + "' exited nonzero";
            return false;
        }
    }
    const std::string csv_a = slurp(work / "a" / "counts.csv");
    const std::string csv_b = slurp(work / "b" / "counts.csv");
    const std::string json_a = slurp(work / "a" / "estimate.json");
    const std::string json_b = slurp(work / "b" / "estimate.json");
    fs::remove_all(work);
    if (csv_a.empty() || json_a.empty()) {
        detail = "outputs missing";
        return false;
    }
    if (csv_a != csv_b || json_a != json_b) {
        detail = "outputs differ between identical runs";
        return false;
    }
    detail = "counts.csv and estimate.json byte-identical across runs";
    return true;
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli_path = argv[1];

    criterion(1, "worked diagonal pair: exact 2 and [1, 1.5]", 1.0, criterion_diag_pair);
    criterion(2, "alternating scalar rate lands on 0.5", 10.0, criterion_scalar_rate);
    criterion(3, "LTI rates: diagonal and defective block", 30.0, criterion_lti_rates);
    criterion(4, "trace/determinant volume identity", 5.0, criterion_volume_identity);
    criterion(5, "structure classifier on randomized families", 5.0, criterion_classifier);
    criterion(6, "estimated rate below the triangular bound", 60.0,
              criterion_triangular_sandwich);
    criterion(7, "estimated rate above the clamped trace bound", 60.0,
              criterion_trace_bound);
    criterion(8, "defective-block growth beaten by any margin", 30.0,
              criterion_defective_growth);
    criterion(9, "packing/covering sandwich", 30.0, criterion_count_sandwich);
    criterion(10, "byte-identical estimate outputs", 30.0, criterion_determinism);

    if (g_failures == 0) {
        std::printf("acceptance: all criteria passed\n");
    } else {
        std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
    }
    return g_failures == 0 ? 0 : 1;
}
