// switched-entropy — CLI for entropy bounds and empirical entropy estimates
// of switched linear systems.
//
// Commands:
//   analyze            classification, kappa_bar table, bound report
//   estimate           lattice/closed-form count table and fitted rate
//   flow               trajectory CSV from an initial state
//   reproduce-example  built-in diagonal pair with known exact answers
//
// Config schema (JSON):
// {
//   "modes":  [[[2,0],[0,0]], [[2,0],[0,-1]]],          // k row-major n x n
//   "signal": {"k": 2, "repeat": "periodic",
//              "segments": [[1, 1.0], [2, 1.0]]},       // 1-based modes
//   "estimation": {"horizons": [4,8,12,16], "epsilons": [0.5,0.25],
//                  "grid_resolution": 64, "sample_density": 20,
//                  "method": "grid_formula"},           // estimate only
//   "flow": {"x0": [1.0, 1.0], "t_end": 2.0}            // flow only
// }
//
// Exit codes: 0 ok, 1 I/O, 2 config, 3 numerical diagnostic,
//             4 estimate outside bounds, 5 reproduction failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "swent/bounds.hpp"
#include "swent/estimator.hpp"
#include "swent/flow.hpp"
#include "swent/lie.hpp"
#include "swent/signal.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace swent;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitBoundViolation = 4;
constexpr int kExitReproduction = 5;

struct ConfigError : std::runtime_error {
    ConfigError(const std::string& path, const std::string& message)
        : std::runtime_error("config error at " + path + ": " + message) {}
};

std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string fmt_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const json& require(const json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw ConfigError(path.empty() ? key : path + "." + key, "missing field");
    }
    return *it;
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
    return j.get<int>();
}

struct FlowOptions {
    Eigen::VectorXd x0;
    std::vector<double> times; // empty: derive a grid from t_end
    double t_end = 0.0;
    int per_segment = 20;
};

struct LoadedConfig {
    std::optional<flow::SwitchedSystem> system;
    std::optional<estimator::EstimationConfig> estimation;
    std::optional<FlowOptions> flow_options;
};

signals::SwitchingSignal parse_signal(const json& j) {
    if (!j.is_object()) throw ConfigError("signal", "expected an object");
    const int k = as_int(require(j, "k", "signal"), "signal.k");
    const json& rep_field = require(j, "repeat", "signal");
    if (!rep_field.is_string()) {
        throw ConfigError("signal.repeat", "expected \"periodic\" or \"truncated\"");
    }
    const std::string rep = rep_field.get<std::string>();
    signals::Repeat repeat;
    if (rep == "periodic") {
        repeat = signals::Repeat::periodic;
    } else if (rep == "truncated") {
        repeat = signals::Repeat::truncated;
    } else {
        throw ConfigError("signal.repeat", "expected \"periodic\" or \"truncated\"");
    }
    const json& segs = require(j, "segments", "signal");
    if (!segs.is_array() || segs.empty()) {
        throw ConfigError("signal.segments", "expected a nonempty array");
    }
    std::vector<signals::Segment> segments;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const std::string path = "signal.segments[" + std::to_string(i) + "]";
        const json& s = segs[i];
        if (!s.is_array() || s.size() != 2) {
            throw ConfigError(path, "expected [mode, duration]");
        }
        const int mode = as_int(s[0], path + "[0]");
        const double dur = as_number(s[1], path + "[1]");
        if (mode < 1 || mode > k) throw ConfigError(path + "[0]", "mode index out of 1..k");
        if (!(dur > 0.0)) throw ConfigError(path + "[1]", "duration must be > 0");
        segments.push_back({mode, dur});
    }
    return signals::SwitchingSignal(k, std::move(segments), repeat);
}

lie::ModeSet parse_modes(const json& j, int k_expected) {
    if (!j.is_array() || j.empty()) throw ConfigError("modes", "expected a nonempty array");
    if (static_cast<int>(j.size()) != k_expected) {
        throw ConfigError("modes", "mode matrix count must equal signal.k");
    }
    std::vector<Eigen::MatrixXd> mats;
    std::size_t n = 0;
    for (std::size_t m = 0; m < j.size(); ++m) {
        const std::string path = "modes[" + std::to_string(m) + "]";
        const json& mat = j[m];
        if (!mat.is_array() || mat.empty()) throw ConfigError(path, "expected a matrix");
        if (m == 0) {
            n = mat.size();
        } else if (mat.size() != n) {
            throw ConfigError(path, "all mode matrices must share one dimension");
        }
        Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t r = 0; r < mat.size(); ++r) {
            const std::string rpath = path + "[" + std::to_string(r) + "]";
            const json& row = mat[r];
            if (!row.is_array() || row.size() != n) {
                throw ConfigError(rpath, "expected a square row-major matrix");
            }
            for (std::size_t c = 0; c < n; ++c) {
                out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    as_number(row[c], rpath + "[" + std::to_string(c) + "]");
            }
        }
        if (!out.allFinite()) throw ConfigError(path, "entries must be finite");
        mats.push_back(std::move(out));
    }
    return lie::ModeSet(std::move(mats));
}

estimator::EstimationConfig parse_estimation(const json& j) {
    if (!j.is_object()) throw ConfigError("estimation", "expected an object");
    estimator::EstimationConfig cfg;
    const json& hs = require(j, "horizons", "estimation");
    if (!hs.is_array()) throw ConfigError("estimation.horizons", "expected an array");
    cfg.horizons.clear();
    for (std::size_t i = 0; i < hs.size(); ++i) {
        cfg.horizons.push_back(
            as_number(hs[i], "estimation.horizons[" + std::to_string(i) + "]"));
    }
    if (j.contains("epsilons")) {
        const json& es = j["epsilons"];
        if (!es.is_array()) throw ConfigError("estimation.epsilons", "expected an array");
        cfg.epsilons.clear();
        for (std::size_t i = 0; i < es.size(); ++i) {
            cfg.epsilons.push_back(
                as_number(es[i], "estimation.epsilons[" + std::to_string(i) + "]"));
        }
    }
    if (j.contains("grid_resolution")) {
        cfg.grid_resolution = as_int(j["grid_resolution"], "estimation.grid_resolution");
    }
    if (j.contains("sample_density")) {
        cfg.sample_density = as_int(j["sample_density"], "estimation.sample_density");
    }
    if (j.contains("method")) {
        const json& m = j["method"];
        if (!m.is_string()) throw ConfigError("estimation.method", "expected a string");
        const std::string name = m.get<std::string>();
        if (name == "spanning_greedy") {
            cfg.method = estimator::Method::spanning_greedy;
        } else if (name == "separated_greedy") {
            cfg.method = estimator::Method::separated_greedy;
        } else if (name == "grid_formula") {
            cfg.method = estimator::Method::grid_formula;
        } else {
            throw ConfigError("estimation.method",
                              "expected spanning_greedy, separated_greedy or grid_formula");
        }
    }
    return cfg;
}

FlowOptions parse_flow(const json& j, int dim) {
    if (!j.is_object()) throw ConfigError("flow", "expected an object");
    FlowOptions opt;
    const json& x0 = require(j, "x0", "flow");
    if (!x0.is_array() || static_cast<int>(x0.size()) != dim) {
        throw ConfigError("flow.x0", "expected a state vector of the system dimension");
    }
    opt.x0.resize(dim);
    for (int i = 0; i < dim; ++i) {
        opt.x0(i) = as_number(x0[static_cast<std::size_t>(i)],
                              "flow.x0[" + std::to_string(i) + "]");
    }
    if (j.contains("times")) {
        const json& ts = j["times"];
        if (!ts.is_array() || ts.size() < 2) {
            throw ConfigError("flow.times", "expected an array of at least two times");
        }
        for (std::size_t i = 0; i < ts.size(); ++i) {
            opt.times.push_back(as_number(ts[i], "flow.times[" + std::to_string(i) + "]"));
        }
    } else {
        opt.t_end = as_number(require(j, "t_end", "flow"), "flow.t_end");
        if (!(opt.t_end > 0.0)) throw ConfigError("flow.t_end", "must be > 0");
        if (j.contains("sample_density")) {
            opt.per_segment = as_int(j["sample_density"], "flow.sample_density");
            if (opt.per_segment < 1) throw ConfigError("flow.sample_density", "must be >= 1");
        }
    }
    return opt;
}

LoadedConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) {
        throw std::ios_base::failure("cannot open config file: " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
    LoadedConfig cfg;
    auto signal = parse_signal(require(j, "signal", ""));
    auto modes = parse_modes(require(j, "modes", ""), signal.mode_count());
    cfg.system.emplace(std::move(modes), std::move(signal));
    if (j.contains("estimation")) {
        cfg.estimation = parse_estimation(j["estimation"]);
    }
    if (j.contains("flow")) {
        cfg.flow_options = parse_flow(j["flow"], cfg.system->dim());
    }
    return cfg;
}

json complex_matrix_to_json(const Eigen::MatrixXcd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back({m(i, c).real(), m(i, c).imag()});
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

const char* verdict_name(signals::Verdict v) {
    switch (v) {
    case signals::Verdict::pass: return "pass";
    case signals::Verdict::fail: return "fail";
    case signals::Verdict::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

json analysis_to_json(const bounds::Analysis& an) {
    const bounds::BoundReport& rep = an.report;
    json j;
    j["classification"] = rep.classification;
    j["lower"] = rep.lower ? json(*rep.lower) : json(nullptr);
    j["upper"] = rep.upper ? json(*rep.upper) : json(nullptr);
    j["exact"] = rep.exact;
    j["rules"] = rep.rules;
    j["kappa_bars"] = rep.kappa_bars;
    j["ordering"] = rep.ordering;
    j["warnings"] = rep.warnings;
    j["estimated"] = rep.estimated;
    j["trace_raw"] = rep.trace_raw ? json(*rep.trace_raw) : json(nullptr);

    json st;
    st["classification"] = lie::to_string(an.structure.classification);
    st["closure_dim"] = an.structure.closure_dim;
    st["derived_depth"] =
        an.structure.derived_depth ? json(*an.structure.derived_depth) : json(nullptr);
    st["residual"] = an.structure.residual;
    st["transform"] = complex_matrix_to_json(an.structure.transform);
    json tm = json::array();
    for (const auto& m : an.structure.transformed_modes) {
        tm.push_back(complex_matrix_to_json(m));
    }
    st["transformed_modes"] = std::move(tm);
    j["structure"] = std::move(st);

    json sw;
    sw["verdict"] = verdict_name(an.switching.verdict);
    sw["samples"] = an.switching.samples;
    j["switching"] = std::move(sw);
    return j;
}

bool write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out.is_open()) return false;
    out << text;
    return static_cast<bool>(out);
}

int ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        std::cerr << "cannot create output directory: " << dir.string() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

void print_analysis(const bounds::Analysis& an) {
    const bounds::BoundReport& rep = an.report;
    std::cout << "classification: " << rep.classification << "\n";
    for (std::size_t i = 0; i < rep.kappa_bars.size(); ++i) {
        std::cout << "kappa_bar[" << i + 1 << "] = " << fmt_num(rep.kappa_bars[i]) << "\n";
    }
    if (rep.trace_raw) {
        std::cout << "trace bound = " << fmt_num(*rep.trace_raw) << " (effective "
                  << fmt_num(std::max(0.0, *rep.trace_raw)) << ")\n";
    }
    std::cout << "rules:";
    for (const auto& r : rep.rules) std::cout << " " << r;
    std::cout << "\n";
    if (rep.lower) std::cout << "lower = " << fmt_num(*rep.lower) << "\n";
    if (rep.upper) {
        std::cout << "upper = " << fmt_num(*rep.upper) << "\n";
    } else {
        std::cout << "no upper bound\n";
    }
    bool lti = false;
    for (const auto& r : rep.rules) lti = lti || r == "lti-exact";
    if (rep.exact && rep.upper) {
        if (lti) {
            std::cout << "LTI: h = " << fmt_num(*rep.upper) << "\n";
        }
        std::cout << "exact h = " << fmt_num(*rep.upper) << "\n";
    }
    for (const auto& w : rep.warnings) {
        std::cout << "warning: " << w << "\n";
    }
}

int run_analysis(const flow::SwitchedSystem& system, const bounds::AnalyzeOptions& opts,
                 const fs::path& out_dir, bounds::Analysis* out_analysis) {
    if (int rc = ensure_out_dir(out_dir); rc != kExitOk) return rc;
    bounds::Analysis an = bounds::analyze(system, opts);
    print_analysis(an);
    if (!write_text(out_dir / "bounds.json", analysis_to_json(an).dump(2) + "\n")) {
        std::cerr << "cannot write " << (out_dir / "bounds.json").string() << "\n";
        return kExitIo;
    }
    if (out_analysis != nullptr) *out_analysis = an;
    return an.structure.diagnostic.empty() ? kExitOk : kExitNumerical;
}

int cmd_analyze(const LoadedConfig& cfg, const bounds::AnalyzeOptions& opts,
                const fs::path& out_dir) {
    return run_analysis(*cfg.system, opts, out_dir, nullptr);
}

std::string counts_csv(const estimator::EstimationResult& res) {
    std::string text = "T,eps,count,log_count_over_T\n";
    for (std::size_t ei = 0; ei < res.epsilons.size(); ++ei) {
        for (std::size_t ti = 0; ti < res.horizons.size(); ++ti) {
            const double logc =
                std::log(static_cast<double>(res.counts[ei][ti])) / res.horizons[ti];
            text += fmt_full(res.horizons[ti]);
            text += ",";
            text += fmt_full(res.epsilons[ei]);
            text += ",";
            text += std::to_string(res.counts[ei][ti]);
            text += ",";
            text += fmt_full(logc);
            text += "\n";
        }
    }
    return text;
}

const char* method_name(estimator::Method m) {
    switch (m) {
    case estimator::Method::spanning_greedy: return "spanning_greedy";
    case estimator::Method::separated_greedy: return "separated_greedy";
    case estimator::Method::grid_formula: return "grid_formula";
    }
    return "spanning_greedy";
}

int cmd_estimate(const LoadedConfig& cfg, const bounds::AnalyzeOptions& opts,
                 const fs::path& out_dir) {
    if (!cfg.estimation) {
        throw ConfigError("estimation", "estimate requires an estimation block");
    }
    if (int rc = ensure_out_dir(out_dir); rc != kExitOk) return rc;
    const auto& system = *cfg.system;
    cfg.estimation->validate(system.dim(), true);

    bounds::Analysis an = bounds::analyze(system, opts);
    estimator::EstimationResult res = estimator::entropy_rate(system, *cfg.estimation);

    std::cout << "T\teps\tcount\tlog(count)/T\n";
    for (std::size_t ei = 0; ei < res.epsilons.size(); ++ei) {
        for (std::size_t ti = 0; ti < res.horizons.size(); ++ti) {
            const double logc =
                std::log(static_cast<double>(res.counts[ei][ti])) / res.horizons[ti];
            std::cout << fmt_num(res.horizons[ti]) << "\t" << fmt_num(res.epsilons[ei])
                      << "\t" << res.counts[ei][ti] << "\t" << fmt_num(logc) << "\n";
        }
    }
    for (std::size_t ei = 0; ei < res.epsilons.size(); ++ei) {
        std::cout << "slope(eps=" << fmt_num(res.epsilons[ei])
                  << ") = " << fmt_num(res.slopes[ei]) << "\n";
    }
    std::cout << "rate = " << fmt_num(res.rate) << " (eps = "
              << fmt_num(res.epsilons.back()) << ")\n";

    std::optional<bool> within;
    if (an.report.lower && an.report.upper) {
        within = res.rate >= *an.report.lower - 0.15 && res.rate <= *an.report.upper + 0.15;
        std::cout << "bounds: lower = " << fmt_num(*an.report.lower)
                  << ", upper = " << fmt_num(*an.report.upper) << " -> rate "
                  << (*within ? "within" : "OUTSIDE") << " [lower-0.15, upper+0.15]\n";
    } else if (an.report.lower) {
        std::cout << "bounds: lower = " << fmt_num(*an.report.lower) << ", no upper\n";
    }

    json j;
    j["rate"] = res.rate;
    j["rate_eps"] = res.epsilons.back();
    j["epsilons"] = res.epsilons;
    j["slopes"] = res.slopes;
    j["residuals"] = res.residuals;
    j["horizons"] = res.horizons;
    j["method"] = method_name(cfg.estimation->method);
    j["lower"] = an.report.lower ? json(*an.report.lower) : json(nullptr);
    j["upper"] = an.report.upper ? json(*an.report.upper) : json(nullptr);
    j["within_bounds"] = within ? json(*within) : json(nullptr);
    if (!write_text(out_dir / "counts.csv", counts_csv(res)) ||
        !write_text(out_dir / "estimate.json", j.dump(2) + "\n")) {
        std::cerr << "cannot write estimate outputs under " << out_dir.string() << "\n";
        return kExitIo;
    }
    if (within && !*within) return kExitBoundViolation;
    return kExitOk;
}

int cmd_flow(const LoadedConfig& cfg, const fs::path& out_dir) {
    if (!cfg.flow_options) {
        throw ConfigError("flow", "flow requires a flow block");
    }
    if (int rc = ensure_out_dir(out_dir); rc != kExitOk) return rc;
    const auto& system = *cfg.system;
    const FlowOptions& opt = *cfg.flow_options;
    std::vector<double> times = opt.times;
    if (times.empty()) {
        times = flow::sample_times(system, opt.t_end, opt.per_segment);
    }
    flow::Trajectory traj = flow::solve(system, opt.x0, times);
    std::string text = "t";
    for (int i = 1; i <= system.dim(); ++i) text += ",x" + std::to_string(i);
    text += "\n";
    for (std::size_t s = 0; s < traj.times.size(); ++s) {
        text += fmt_full(traj.times[s]);
        for (int i = 0; i < system.dim(); ++i) {
            text += ",";
            text += fmt_full(traj.states[s](i));
        }
        text += "\n";
    }
    if (!write_text(out_dir / "trajectory.csv", text)) {
        std::cerr << "cannot write " << (out_dir / "trajectory.csv").string() << "\n";
        return kExitIo;
    }
    std::cout << "trajectory with " << traj.times.size() << " samples written\n";
    return kExitOk;
}

Eigen::MatrixXd diag2(double a, double b) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

int cmd_reproduce_example(const fs::path& out_dir, double perturb) {
    if (int rc = ensure_out_dir(out_dir); rc != kExitOk) return rc;
    signals::SwitchingSignal sig(2, {{1, 1.0}, {2, 1.0}}, signals::Repeat::periodic);
    Eigen::MatrixXd shared = diag2(2.0, 0.0);
    shared(0, 0) += perturb; // negative-control hook
    flow::SwitchedSystem sys1(lie::ModeSet({shared, diag2(2.0, -1.0)}), sig);
    flow::SwitchedSystem sys2(lie::ModeSet({shared, diag2(-1.0, 2.0)}), sig);

    bounds::Analysis an1 = bounds::analyze(sys1);
    bounds::Analysis an2 = bounds::analyze(sys2);

    estimator::EstimationConfig est;
    est.horizons = {4.0, 8.0, 12.0, 16.0};
    est.epsilons = {0.5, 0.25};
    est.method = estimator::Method::grid_formula;
    auto rate1 = estimator::entropy_rate(sys1, est);
    auto rate2 = estimator::entropy_rate(sys2, est);

    const double h_shared = bounds::lti_entropy(shared);
    const double h_mode2a = bounds::lti_entropy(diag2(2.0, -1.0));
    const double h_mode2b = bounds::lti_entropy(diag2(-1.0, 2.0));

    std::cout << "                       system 1        system 2\n";
    std::cout << "mode entropies         " << fmt_num(h_shared) << ", " << fmt_num(h_mode2a)
              << "            " << fmt_num(h_shared) << ", " << fmt_num(h_mode2b) << "\n";
    std::cout << "lower                  " << fmt_num(*an1.report.lower) << "               "
              << fmt_num(*an2.report.lower) << "\n";
    std::cout << "upper                  " << fmt_num(*an1.report.upper) << "               "
              << fmt_num(*an2.report.upper) << "\n";
    std::cout << "exact                  " << (an1.report.exact ? "yes" : "no")
              << "             " << (an2.report.exact ? "yes" : "no") << "\n";
    std::cout << "estimated rate         " << fmt_num(rate1.rate) << "          "
              << fmt_num(rate2.rate) << "\n";

    int failures = 0;
    auto expect = [&failures](bool ok, const std::string& what) {
        std::cout << (ok ? "ok: " : "FAIL: ") << what << "\n";
        if (!ok) ++failures;
    };
    expect(std::abs(h_shared - 2.0) <= 1e-12, "h(mode shared) = 2");
    expect(std::abs(h_mode2a - 2.0) <= 1e-12, "h(mode 2 of system 1) = 2");
    expect(std::abs(h_mode2b - 2.0) <= 1e-12, "h(mode 2 of system 2) = 2");
    expect(an1.report.exact && std::abs(*an1.report.lower - 2.0) <= 1e-12 &&
               std::abs(*an1.report.upper - 2.0) <= 1e-12,
           "system 1 entropy is exactly 2");
    expect(std::abs(*an2.report.lower - 1.0) <= 1e-12 &&
               std::abs(*an2.report.upper - 1.5) <= 1e-12,
           "system 2 bounds are [1, 1.5]");
    expect(!an1.report.exact || !an2.report.exact ||
               std::abs(*an1.report.upper - *an2.report.upper) > 1e-9,
           "equal mode entropies still give different switched entropies");

    json j;
    j["system1"] = analysis_to_json(an1);
    j["system2"] = analysis_to_json(an2);
    j["rate1"] = rate1.rate;
    j["rate2"] = rate2.rate;
    j["failures"] = failures;
    if (!write_text(out_dir / "reproduce.json", j.dump(2) + "\n")) {
        std::cerr << "cannot write " << (out_dir / "reproduce.json").string() << "\n";
        return kExitIo;
    }
    return failures == 0 ? kExitOk : kExitReproduction;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"entropy bounds and empirical entropy estimates for switched linear systems"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    bounds::AnalyzeOptions opts;
    double perturb = 0.0;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* c = cmd->add_option("--config", config_path, "system config JSON");
        if (needs_config) c->required();
        cmd->add_option("--out", out_dir, "output directory (default: .)");
        cmd->add_option("--tol-rank", opts.tol_rank, "rank-decision tolerance");
        cmd->add_option("--tol-classify", opts.tol_classify, "classification tolerance");
        cmd->add_option("--tail-fraction", opts.tail_start_fraction,
                        "tail start fraction for estimated activation fractions");
        cmd->add_option("--horizon", opts.horizon,
                        "analysis horizon (default: signal domain / 200 periods)");
    };

    CLI::App* analyze = app.add_subcommand("analyze", "classify and bound the entropy");
    add_common(analyze, true);
    CLI::App* estimate = app.add_subcommand("estimate", "spanning/separated count table and rate");
    add_common(estimate, true);
    CLI::App* flow_cmd = app.add_subcommand("flow", "emit a trajectory CSV");
    add_common(flow_cmd, true);
    CLI::App* reproduce =
        app.add_subcommand("reproduce-example", "run the built-in diagonal pair");
    add_common(reproduce, false);
    reproduce->add_option("--perturb", perturb, "perturb the built-in systems (test hook)")
        ->group(""); // hidden

    CLI11_PARSE(app, argc, argv);

    try {
        if (reproduce->parsed()) {
            return cmd_reproduce_example(out_dir, perturb);
        }
        LoadedConfig cfg = load_config(config_path);
        if (analyze->parsed()) return cmd_analyze(cfg, opts, out_dir);
        if (estimate->parsed()) return cmd_estimate(cfg, opts, out_dir);
        if (flow_cmd->parsed()) return cmd_flow(cfg, out_dir);
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const estimator::LatticeTooCoarse& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::ios_base::failure& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "numerical diagnostic: " << e.what() << "\n";
        return kExitNumerical;
    }
}
