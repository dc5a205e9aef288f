#include "swent/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace swent::signals {

namespace {

double time_tol(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }

} // namespace

SwitchingSignal::SwitchingSignal(int mode_count, std::vector<Segment> segments,
                                 Repeat repeat)
    : k_(mode_count), segments_(std::move(segments)), repeat_(repeat) {
    if (k_ < 1) {
        throw std::invalid_argument("SwitchingSignal: mode count must be >= 1");
    }
    if (segments_.empty()) {
        throw std::invalid_argument("SwitchingSignal: segment list must be nonempty");
    }
    tau_cycle_.assign(static_cast<std::size_t>(k_), 0.0);
    cum_.reserve(segments_.size());
    double acc = 0.0;
    for (const Segment& s : segments_) {
        if (s.mode < 1 || s.mode > k_) {
            throw std::invalid_argument("SwitchingSignal: mode index out of range 1..k");
        }
        if (!(s.duration > 0.0) || !std::isfinite(s.duration)) {
            throw std::invalid_argument("SwitchingSignal: durations must be finite and > 0");
        }
        acc += s.duration;
        cum_.push_back(acc);
        tau_cycle_[static_cast<std::size_t>(s.mode - 1)] += s.duration;
    }
    period_ = acc;
    if (!std::isfinite(period_) || !(period_ > 0.0)) {
        throw std::invalid_argument("SwitchingSignal: total duration must be finite and positive");
    }
}

double SwitchingSignal::domain_end() const noexcept {
    return periodic() ? std::numeric_limits<double>::infinity() : period_;
}

void SwitchingSignal::check_time(double t, const char* what) const {
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw std::domain_error(std::string(what) + ": time must be finite and >= 0");
    }
    if (!periodic() && t > period_ + time_tol(period_)) {
        throw std::domain_error(std::string(what) +
                                ": time beyond the domain of a truncated signal");
    }
}

// Reduce t into [0, period) and report the number of whole cycles skipped.
double SwitchingSignal::wrap(double t, long long* cycles) const {
    double q = std::floor(t / period_);
    double r = t - q * period_;
    if (r < 0.0) {
        r += period_;
        q -= 1.0;
    }
    if (r >= period_) {
        r -= period_;
        q += 1.0;
    }
    if (cycles != nullptr) {
        *cycles = static_cast<long long>(q);
    }
    return r;
}

int SwitchingSignal::mode_at(double t) const {
    check_time(t, "mode_at");
    double r = t;
    if (periodic()) {
        r = wrap(t, nullptr);
    } else if (r >= period_) {
        return segments_.back().mode; // closed right end of the domain
    }
    auto it = std::upper_bound(cum_.begin(), cum_.end(), r);
    std::size_t idx = static_cast<std::size_t>(it - cum_.begin());
    if (idx >= segments_.size()) {
        idx = segments_.size() - 1;
    }
    return segments_[idx].mode;
}

double SwitchingSignal::activation_time(int mode, double t) const {
    if (mode < 1 || mode > k_) {
        throw std::invalid_argument("activation_time: mode index out of range 1..k");
    }
    check_time(t, "activation_time");
    long long cycles = 0;
    double r = t;
    if (periodic()) {
        r = wrap(t, &cycles);
    }
    double acc = static_cast<double>(cycles) * tau_cycle_[static_cast<std::size_t>(mode - 1)];
    double start = 0.0;
    for (std::size_t i = 0; i < segments_.size() && start < r; ++i) {
        double end = cum_[i];
        if (segments_[i].mode == mode) {
            acc += std::min(end, r) - start;
        }
        start = end;
    }
    return acc;
}

std::vector<double> SwitchingSignal::change_instants(double T) const {
    check_time(T, "change_instants");
    const double tol = time_tol(T);
    std::vector<double> out;
    const std::size_t S = segments_.size();
    if (!periodic()) {
        for (std::size_t i = 0; i + 1 < S; ++i) {
            if (cum_[i] > T + tol) break;
            if (segments_[i].mode != segments_[i + 1].mode) {
                out.push_back(cum_[i]);
            }
        }
        return out;
    }
    for (long long c = 0;; ++c) {
        double base = static_cast<double>(c) * period_;
        if (base > T + tol) break;
        for (std::size_t i = 0; i < S; ++i) {
            double inst = base + cum_[i];
            if (inst > T + tol) return out;
            int next = segments_[(i + 1) % S].mode;
            if (segments_[i].mode != next) {
                out.push_back(inst);
            }
        }
    }
    return out;
}

long long SwitchingSignal::switch_count(double T) const {
    check_time(T, "switch_count");
    const double tol = time_tol(T);
    const std::size_t S = segments_.size();
    long long count = 1; // t = 0 is always counted
    if (!periodic()) {
        for (std::size_t i = 0; i + 1 < S; ++i) {
            if (cum_[i] > T + tol) break;
            if (segments_[i].mode != segments_[i + 1].mode) ++count;
        }
        return count;
    }
    long long per_cycle = 0;
    for (std::size_t i = 0; i < S; ++i) {
        if (segments_[i].mode != segments_[(i + 1) % S].mode) ++per_cycle;
    }
    double q = std::floor((T + tol) / period_);
    long long full = static_cast<long long>(q);
    double rem = T - q * period_;
    if (rem < 0.0) rem = 0.0;
    count += full * per_cycle;
    for (std::size_t i = 0; i < S; ++i) {
        if (cum_[i] > rem + tol) break;
        if (segments_[i].mode != segments_[(i + 1) % S].mode) ++count;
    }
    return count;
}

Fraction activation_fraction(const SwitchingSignal& signal, int mode,
                             double horizon, double tail_start_fraction) {
    if (mode < 1 || mode > signal.mode_count()) {
        throw std::invalid_argument("activation_fraction: mode index out of range 1..k");
    }
    if (signal.periodic()) {
        double tau = signal.activation_time(mode, signal.period());
        return Fraction{tau / signal.period(), true};
    }
    if (horizon <= 0.0) {
        horizon = signal.domain_end();
    }
    if (!(horizon > 0.0)) {
        throw std::invalid_argument("activation_fraction: horizon must be positive");
    }
    if (!(tail_start_fraction > 0.0) || !(tail_start_fraction < 1.0)) {
        throw std::invalid_argument("activation_fraction: tail_start_fraction must lie in (0,1)");
    }
    const double tail_start = tail_start_fraction * horizon;
    std::vector<double> grid;
    grid.push_back(tail_start);
    for (double inst : signal.change_instants(horizon)) {
        if (inst > tail_start && inst < horizon) grid.push_back(inst);
    }
    grid.push_back(horizon);
    double best = 0.0;
    for (double t : grid) {
        best = std::max(best, signal.activation_time(mode, t) / t);
    }
    return Fraction{best, false};
}

double kappa(const SwitchingSignal& signal, const std::vector<double>& rates,
             double t) {
    if (static_cast<int>(rates.size()) != signal.mode_count()) {
        throw std::invalid_argument("kappa: rate table length must equal the mode count");
    }
    double acc = 0.0;
    for (int j = 0; j < signal.mode_count(); ++j) {
        acc += rates[static_cast<std::size_t>(j)] * signal.activation_time(j + 1, t);
    }
    return acc;
}

Fraction kappa_bar(const SwitchingSignal& signal,
                   const std::vector<double>& rates, double horizon,
                   double tail_start_fraction) {
    if (static_cast<int>(rates.size()) != signal.mode_count()) {
        throw std::invalid_argument("kappa_bar: rate table length must equal the mode count");
    }
    double acc = 0.0;
    bool exact = true;
    for (int j = 0; j < signal.mode_count(); ++j) {
        Fraction f = activation_fraction(signal, j + 1, horizon, tail_start_fraction);
        acc += rates[static_cast<std::size_t>(j)] * f.value;
        exact = exact && f.exact;
    }
    return Fraction{acc, exact};
}

ActivationStats activation_stats(const SwitchingSignal& signal,
                                 const std::vector<double>& rates,
                                 double horizon, double tail_start_fraction) {
    ActivationStats st;
    st.horizon = horizon;
    st.tau.resize(static_cast<std::size_t>(signal.mode_count()));
    st.tau_bar.resize(static_cast<std::size_t>(signal.mode_count()));
    st.tau_bar_exact = true;
    for (int j = 0; j < signal.mode_count(); ++j) {
        st.tau[static_cast<std::size_t>(j)] = signal.activation_time(j + 1, horizon);
        Fraction f = activation_fraction(signal, j + 1, horizon, tail_start_fraction);
        st.tau_bar[static_cast<std::size_t>(j)] = f.value;
        st.tau_bar_exact = st.tau_bar_exact && f.exact;
    }
    st.kappa = kappa(signal, rates, horizon);
    st.kappa_bar = kappa_bar(signal, rates, horizon, tail_start_fraction).value;
    st.switch_count = signal.switch_count(horizon);
    return st;
}

SubexponentialReport subexponential_check(const SwitchingSignal& signal,
                                          const std::vector<double>& horizons) {
    if (horizons.size() < 2) {
        throw std::invalid_argument("subexponential_check: need at least two horizons");
    }
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (!(horizons[i] > 0.0)) {
            throw std::invalid_argument("subexponential_check: horizons must be positive");
        }
        if (i > 0 && !(horizons[i] > horizons[i - 1])) {
            throw std::invalid_argument("subexponential_check: horizons must be increasing");
        }
    }
    SubexponentialReport rep;
    rep.samples.reserve(horizons.size());
    for (double T : horizons) {
        double n = static_cast<double>(signal.switch_count(T));
        rep.samples.push_back(std::log(n) / T);
    }
    const std::size_t m = rep.samples.size();
    const std::size_t tail = std::max<std::size_t>(2, (m + 1) / 2);
    const std::size_t first = m - tail;
    bool nonincreasing = true;
    bool increasing = true;
    for (std::size_t i = first + 1; i < m; ++i) {
        double d = rep.samples[i] - rep.samples[i - 1];
        if (d > 1e-12) nonincreasing = false;
        if (d < 1e-12) increasing = false;
    }
    if (nonincreasing && rep.samples.back() < 0.1) {
        rep.verdict = Verdict::pass;
    } else if (increasing) {
        rep.verdict = Verdict::fail;
    } else {
        rep.verdict = Verdict::inconclusive;
    }
    return rep;
}

FoldReport fold_diagnostic(const SwitchingSignal& signal,
                           const std::vector<double>& rates, double window,
                           double horizon, double eps) {
    if (!(window > 0.0)) {
        throw std::invalid_argument("fold_diagnostic: window must be positive");
    }
    if (horizon < 10.0 * window - time_tol(horizon)) {
        throw std::invalid_argument("fold_diagnostic: horizon must cover at least 10 windows");
    }
    const long long M = static_cast<long long>(std::floor(horizon / window + 1e-9));
    FoldReport rep;
    rep.window_values.reserve(static_cast<std::size_t>(M));
    double prev = 0.0;
    for (long long n = 1; n <= M; ++n) {
        double cur = kappa(signal, rates, static_cast<double>(n) * window);
        rep.window_values.push_back(cur - prev);
        prev = cur;
    }
    const std::size_t skip = static_cast<std::size_t>((M + 9) / 10);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = skip; i < rep.window_values.size(); ++i) {
        lo = std::min(lo, rep.window_values[i]);
        hi = std::max(hi, rep.window_values[i]);
    }
    if (hi - lo < eps) {
        rep.verdict = FoldVerdict::limit_likely;
        return rep;
    }
    // Persistent drift of the running window mean suggests no limit.
    const std::size_t tail_len = rep.window_values.size() - skip;
    const std::size_t half = tail_len / 2;
    double mean_a = 0.0;
    double mean_b = 0.0;
    for (std::size_t i = skip; i < skip + half; ++i) mean_a += rep.window_values[i];
    for (std::size_t i = skip + half; i < rep.window_values.size(); ++i) mean_b += rep.window_values[i];
    mean_a /= static_cast<double>(half);
    mean_b /= static_cast<double>(tail_len - half);
    rep.verdict = (std::abs(mean_b - mean_a) >= eps) ? FoldVerdict::limit_unlikely
                                                     : FoldVerdict::inconclusive;
    return rep;
}

SwitchingSignal dyadic_signal(int windows) {
    if (windows < 1 || windows > 16) {
        throw std::invalid_argument("dyadic_signal: windows must lie in 1..16");
    }
    std::vector<Segment> segs;
    segs.push_back(Segment{1, 1.0});
    for (int n = 1; n < windows; ++n) {
        const double len = std::ldexp(1.0, -n); // 2^-n, exact
        const long long slots = 1LL << n;
        for (long long s = 0; s < slots; ++s) {
            segs.push_back(Segment{s % 2 == 0 ? 1 : 2, len});
        }
    }
    return SwitchingSignal(2, std::move(segs), Repeat::truncated);
}

} // namespace swent::signals
