// signal.hpp — switching signals and their time statistics: activation times,
// activation fractions, weighted exponents, switch counts, folding diagnostics.

#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace swent::signals {

enum class Repeat { periodic, truncated };

struct Segment {
    int mode = 0;          // 1-based mode index
    double duration = 0.0; // seconds, strictly positive
};

// Piecewise-constant map t -> mode index, stored as a finite segment list.
// Periodic signals cycle the list forever; truncated signals are defined on
// [0, period()] only and reject queries beyond it.
class SwitchingSignal {
public:
    SwitchingSignal(int mode_count, std::vector<Segment> segments, Repeat repeat);

    int mode_count() const noexcept { return k_; }
    Repeat repeat() const noexcept { return repeat_; }
    bool periodic() const noexcept { return repeat_ == Repeat::periodic; }
    const std::vector<Segment>& segments() const noexcept { return segments_; }

    // Total duration of the listed segments (the cycle length when periodic).
    double period() const noexcept { return period_; }
    // Last valid query time: period() when truncated, +inf when periodic.
    double domain_end() const noexcept;

    int mode_at(double t) const;

    // tau_i(t): Lebesgue measure of {s <= t : mode_at(s) == mode}, by exact
    // segment arithmetic.
    double activation_time(int mode, double t) const;

    // Instants in (0, T] where the mode actually changes (segment boundaries
    // between equal modes are not changes). t = 0 is excluded here; the
    // endpoint-inclusive switch count handles it.
    std::vector<double> change_instants(double T) const;

    // N(T): number of switching instants on [0, T], counting t = 0 always and
    // t = T when the mode changes there.
    long long switch_count(double T) const;

private:
    void check_time(double t, const char* what) const;
    double wrap(double t, long long* cycles) const;

    int k_ = 0;
    std::vector<Segment> segments_;
    Repeat repeat_ = Repeat::truncated;
    double period_ = 0.0;
    std::vector<double> cum_;        // cumulative segment end times
    std::vector<double> tau_cycle_;  // per-mode activation over one pass
};

struct Fraction {
    double value = 0.0;
    bool exact = false; // true when the per-period ratio is returned
};

// tau_bar_i surrogate. Periodic signals get the exact per-period fraction
// (independent of horizon). Otherwise the finite-horizon limsup stand-in:
// max of tau_i(t)/t over t in [tail_start_fraction*horizon, horizon],
// evaluated at the tail start, every change instant in the tail, and the
// horizon endpoint (the ratio is piecewise monotone between changes, so this
// grid attains the max). horizon <= 0 selects the domain end for truncated
// signals.
Fraction activation_fraction(const SwitchingSignal& signal, int mode,
                             double horizon = 0.0,
                             double tail_start_fraction = 0.5);

// kappa(t) = sum_j rates[j] * tau_j(t)
double kappa(const SwitchingSignal& signal, const std::vector<double>& rates,
             double t);

// kappa_bar = sum_j rates[j] * tau_bar_j, exact iff all fractions are exact.
Fraction kappa_bar(const SwitchingSignal& signal,
                   const std::vector<double>& rates, double horizon = 0.0,
                   double tail_start_fraction = 0.5);

struct ActivationStats {
    double horizon = 0.0;
    std::vector<double> tau;     // per-mode activation times at horizon
    std::vector<double> tau_bar; // per-mode fraction estimates
    bool tau_bar_exact = false;
    double kappa = 0.0;          // weighted exponent at horizon
    double kappa_bar = 0.0;
    long long switch_count = 0;
};

ActivationStats activation_stats(const SwitchingSignal& signal,
                                 const std::vector<double>& rates,
                                 double horizon,
                                 double tail_start_fraction = 0.5);

enum class Verdict { pass, fail, inconclusive };

struct SubexponentialReport {
    Verdict verdict = Verdict::inconclusive;
    std::vector<double> samples; // log N(T) / T at each horizon
};

// Heuristic diagnostic for subexponential switching: pass when log N(T)/T is
// nonincreasing over the tail of the horizon list and ends below 0.1, fail
// when it is increasing over the tail, inconclusive otherwise.
SubexponentialReport subexponential_check(const SwitchingSignal& signal,
                                          const std::vector<double>& horizons);

enum class FoldVerdict { limit_likely, limit_unlikely, inconclusive };

struct FoldReport {
    FoldVerdict verdict = FoldVerdict::inconclusive;
    std::vector<double> window_values; // kappa((n+1)W) - kappa(nW)
};

// Window-increment diagnostic for existence of the limit of kappa(t)/t.
// limit-likely when all window increments beyond the first 10% agree within
// eps; limit-unlikely when the later half of those windows drifts from the
// earlier half by at least eps; inconclusive otherwise.
FoldReport fold_diagnostic(const SwitchingSignal& signal,
                           const std::vector<double>& rates, double window,
                           double horizon, double eps);

// Two-mode test signal: window n of unit length is split into 2^n alternating
// slots of length 2^-n starting with mode 1 (window 0 is all mode 1). Not
// periodic, but every window past the first activates each mode for exactly
// half the time. Truncated after `windows` windows.
SwitchingSignal dyadic_signal(int windows);

} // namespace swent::signals
