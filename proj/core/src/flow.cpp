#include "swent/flow.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace swent::flow {

namespace {

double time_tol(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }

#if defined(__SIZEOF_FLOAT128__)
using qreal = __float128;
#else
using qreal = long double;
#endif

qreal qabs(qreal x) { return x < 0 ? -x : x; }

// Determinant by LU with partial pivoting in extended precision. The input
// entries are exact doubles; all arithmetic stays in qreal so the massive
// cancellation in det of strongly non-normal products does not hit double
// rounding.
qreal qdet(std::vector<qreal> a, int n) {
    qreal det = 1;
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r) {
            if (qabs(a[static_cast<std::size_t>(r) * n + c]) >
                qabs(a[static_cast<std::size_t>(piv) * n + c])) {
                piv = r;
            }
        }
        if (piv != c) {
            for (int j = 0; j < n; ++j) {
                std::swap(a[static_cast<std::size_t>(c) * n + j],
                          a[static_cast<std::size_t>(piv) * n + j]);
            }
            det = -det;
        }
        const qreal p = a[static_cast<std::size_t>(c) * n + c];
        if (p == 0) return 0;
        det *= p;
        for (int r = c + 1; r < n; ++r) {
            const qreal f = a[static_cast<std::size_t>(r) * n + c] / p;
            for (int j = c; j < n; ++j) {
                a[static_cast<std::size_t>(r) * n + j] -=
                    f * a[static_cast<std::size_t>(c) * n + j];
            }
        }
    }
    return det;
}

// out = E * in with E double and the accumulator in qreal.
void qmul_left(const Eigen::MatrixXd& e, std::vector<qreal>& acc, int n) {
    std::vector<qreal> out(static_cast<std::size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
            const qreal eik = static_cast<qreal>(e(i, k));
            for (int j = 0; j < n; ++j) {
                out[static_cast<std::size_t>(i) * n + j] +=
                    eik * acc[static_cast<std::size_t>(k) * n + j];
            }
        }
    }
    acc = std::move(out);
}

// Visit the constant-mode pieces of [0, T] in order.
template <typename Fn>
void for_each_piece(const signals::SwitchingSignal& sig, double T, const Fn& fn) {
    if (T < 0.0 || (!sig.periodic() && T > sig.domain_end() + time_tol(T))) {
        throw std::domain_error("flow: time beyond the signal domain");
    }
    const auto& segs = sig.segments();
    const double tol = time_tol(T);
    double t = 0.0;
    std::size_t i = 0;
    while (t < T - tol) {
        const double seg_len = segs[i].duration;
        const double dt = std::min(seg_len, T - t);
        fn(segs[i].mode, dt);
        t += dt;
        i = (i + 1) % segs.size();
        if (!sig.periodic() && i == 0 && t < T - tol) {
            throw std::domain_error("flow: time beyond the signal domain");
        }
    }
}

} // namespace

SwitchedSystem::SwitchedSystem(lie::ModeSet m, signals::SwitchingSignal s)
    : modes(std::move(m)), signal(std::move(s)) {
    if (modes.count() != signal.mode_count()) {
        throw std::invalid_argument(
            "SwitchedSystem: mode count of matrices and signal must agree");
    }
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A, double dt) {
    const Eigen::MatrixXd B = A * dt;
    const double norm = B.cwiseAbs().rowwise().sum().maxCoeff();
    if (norm <= 50.0) {
        return B.exp();
    }
    const int pieces = static_cast<int>(std::ceil(norm / 50.0));
    Eigen::MatrixXd base = (B / static_cast<double>(pieces)).exp();
    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    int p = pieces;
    while (p > 0) { // binary powering; the factors commute exactly
        if (p & 1) result = base * result;
        base = base * base;
        p >>= 1;
    }
    return result;
}

FlowPropagator::FlowPropagator(const SwitchedSystem& system)
    : n_(system.dim()),
      mode_matrices_(system.modes.matrices),
      signal_(system.signal) {
    segment_exp_.reserve(signal_.segments().size());
    for (const auto& seg : signal_.segments()) {
        segment_exp_.push_back(
            matrix_exponential(mode_matrices_[static_cast<std::size_t>(seg.mode - 1)],
                               seg.duration));
    }
    if (signal_.periodic()) {
        cycle_product_ = Eigen::MatrixXd::Identity(n_, n_);
        for (const auto& e : segment_exp_) {
            cycle_product_ = e * cycle_product_;
        }
    }
}

const Eigen::MatrixXd& FlowPropagator::mode_matrix(int mode) const {
    return mode_matrices_[static_cast<std::size_t>(mode - 1)];
}

Eigen::MatrixXd FlowPropagator::transition(double t) const {
    if (t < 0.0 || (!signal_.periodic() && t > signal_.domain_end() + time_tol(t))) {
        throw std::domain_error("transition: time beyond the signal domain");
    }
    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n_, n_);
    double rem = t;
    if (signal_.periodic()) {
        const double period = signal_.period();
        double q = std::floor(t / period);
        rem = t - q * period;
        if (rem < 0.0) {
            rem += period;
            q -= 1.0;
        }
        long long cycles = static_cast<long long>(q);
        Eigen::MatrixXd base = cycle_product_;
        while (cycles > 0) {
            if (cycles & 1) result = base * result;
            base = base * base;
            cycles >>= 1;
        }
    }
    const double tol = time_tol(t);
    double start = 0.0;
    for (std::size_t i = 0; i < signal_.segments().size() && start < rem - tol; ++i) {
        const auto& seg = signal_.segments()[i];
        const double end = start + seg.duration;
        if (end <= rem + tol) {
            result = segment_exp_[i] * result;
        } else {
            result = matrix_exponential(mode_matrix(seg.mode), rem - start) * result;
        }
        start = end;
    }
    return result;
}

template <typename State, typename Apply>
void FlowPropagator::walk(const std::vector<double>& times, State& state,
                          const Apply& apply, std::vector<State>& out) const {
    double t = 0.0;
    // Reuse the last partial-step exponential: uniform grids repeat (mode, dt).
    int cached_mode = -1;
    double cached_dt = -1.0;
    Eigen::MatrixXd cached_exp;

    const auto& segs = signal_.segments();
    std::size_t seg_idx = 0;
    double seg_left = segs[0].duration;

    auto step = [&](int mode, double dt) {
        if (dt <= 0.0) return;
        if (mode != cached_mode || dt != cached_dt) {
            cached_exp = matrix_exponential(mode_matrix(mode), dt);
            cached_mode = mode;
            cached_dt = dt;
        }
        state = apply(cached_exp, state);
    };

    for (double target : times) {
        if (target < t - time_tol(target)) {
            throw std::invalid_argument("flow: sample times must be nondecreasing");
        }
        while (t < target - time_tol(target)) {
            const double remaining = target - t;
            const int mode = segs[seg_idx].mode;
            if (seg_left <= remaining + time_tol(target)) {
                step(mode, seg_left);
                t += seg_left;
                seg_idx = (seg_idx + 1) % segs.size();
                if (!signal_.periodic() && seg_idx == 0 && t < target - time_tol(target)) {
                    throw std::domain_error("flow: time beyond the signal domain");
                }
                seg_left = segs[seg_idx].duration;
            } else {
                step(mode, remaining);
                t = target;
                seg_left -= remaining;
            }
        }
        out.push_back(state);
    }
}

std::vector<Eigen::MatrixXd>
FlowPropagator::transitions(const std::vector<double>& times) const {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(times.size());
    Eigen::MatrixXd state = Eigen::MatrixXd::Identity(n_, n_);
    walk(times, state,
         [](const Eigen::MatrixXd& e, const Eigen::MatrixXd& s) { return (e * s).eval(); },
         out);
    return out;
}

std::vector<Eigen::VectorXd>
FlowPropagator::propagate(const Eigen::VectorXd& v,
                          const std::vector<double>& times) const {
    if (v.size() != n_) {
        throw std::invalid_argument("propagate: vector dimension mismatch");
    }
    std::vector<Eigen::VectorXd> out;
    out.reserve(times.size());
    Eigen::VectorXd state = v;
    walk(times, state,
         [](const Eigen::MatrixXd& e, const Eigen::VectorXd& s) { return (e * s).eval(); },
         out);
    return out;
}

Eigen::MatrixXd transition_matrix(const SwitchedSystem& system, double t) {
    return FlowPropagator(system).transition(t);
}

Trajectory solve(const SwitchedSystem& system, const Eigen::VectorXd& x0,
                 std::vector<double> times) {
    if (x0.size() != system.dim()) {
        throw std::invalid_argument("solve: initial state dimension mismatch");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw std::invalid_argument("solve: times must be strictly increasing");
        }
    }
    if (times.empty() || times.front() > 0.0) {
        times.insert(times.begin(), 0.0);
    }
    if (times.front() < 0.0) {
        throw std::domain_error("solve: times must be >= 0");
    }
    Trajectory traj;
    traj.x0 = x0;
    traj.times = times;
    FlowPropagator prop(system);
    traj.states = prop.propagate(x0, traj.times);
    return traj;
}

std::vector<double> sample_times(const SwitchedSystem& system, double T,
                                 int per_segment) {
    if (T < 0.0) {
        throw std::domain_error("sample_times: horizon must be >= 0");
    }
    if (per_segment < 1) {
        throw std::invalid_argument("sample_times: per_segment must be >= 1");
    }
    std::vector<double> boundaries{0.0};
    for (double c : system.signal.change_instants(T)) {
        if (c < T) boundaries.push_back(c);
    }
    boundaries.push_back(T);
    std::vector<double> grid;
    grid.reserve(boundaries.size() * static_cast<std::size_t>(per_segment));
    for (std::size_t i = 0; i + 1 < boundaries.size(); ++i) {
        const double a = boundaries[i];
        const double b = boundaries[i + 1];
        for (int j = 0; j < per_segment; ++j) {
            grid.push_back(a + (b - a) * static_cast<double>(j) /
                                   static_cast<double>(per_segment));
        }
    }
    grid.push_back(T);
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

double separation(const SwitchedSystem& system, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& y, double T,
                  const std::vector<double>& samples) {
    if (samples.empty()) {
        throw std::invalid_argument("separation: sample list must be nonempty");
    }
    const double tol = time_tol(T);
    if (std::abs(samples.front()) > tol || std::abs(samples.back() - T) > tol) {
        throw std::invalid_argument("separation: samples must start at 0 and end at T");
    }
    // The sup over [0, T] is evaluated on the grid; require the change
    // instants so no growth kink is skipped.
    const auto changes = system.signal.change_instants(T);
    std::size_t si = 0;
    for (double c : changes) {
        while (si < samples.size() && samples[si] < c - tol) ++si;
        if (si >= samples.size() || std::abs(samples[si] - c) > tol) {
            throw std::invalid_argument("separation: samples must include all change instants");
        }
    }
    FlowPropagator prop(system);
    const auto diffs = prop.propagate(x - y, samples);
    double sup = 0.0;
    for (const auto& d : diffs) {
        sup = std::max(sup, d.cwiseAbs().maxCoeff());
    }
    return sup;
}

VolumeGrowth volume_growth(const SwitchedSystem& system, double T) {
    VolumeGrowth vg;
    double weighted_trace = 0.0;
    for (int j = 0; j < system.mode_count(); ++j) {
        weighted_trace += system.modes.matrices[static_cast<std::size_t>(j)].trace() *
                          system.signal.activation_time(j + 1, T);
    }
    vg.formula_value = std::exp(weighted_trace);

    const int n = system.dim();
    std::vector<qreal> acc(static_cast<std::size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i) acc[static_cast<std::size_t>(i) * n + i] = 1;
    for_each_piece(system.signal, T, [&](int mode, double dt) {
        const Eigen::MatrixXd e = matrix_exponential(
            system.modes.matrices[static_cast<std::size_t>(mode - 1)], dt);
        qmul_left(e, acc, n);
    });
    vg.determinant_value = static_cast<double>(qdet(std::move(acc), n));
    return vg;
}

} // namespace swent::flow
