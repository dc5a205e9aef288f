// bounds.hpp — entropy formulas and bounds for switched linear systems, and
// the dispatcher assembling the tightest applicable BoundReport from the Lie
// classification.

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "swent/flow.hpp"
#include "swent/lie.hpp"
#include "swent/signal.hpp"

namespace swent::bounds {

enum class Stability { ges, not_concluded };

// Global exponential stability when the activation-weighted exponent is
// negative; the criterion is one-directional.
Stability scalar_stability(const std::vector<double>& rates,
                           const std::vector<double>& fractions);

// h = max(0, sum_i rates[i] * fractions[i]) for a scalar switched system.
double scalar_switched_entropy(const std::vector<double>& rates,
                               const std::vector<double>& fractions);

// h = sum over eigenvalues (with multiplicity) of max(0, Re lambda).
double lti_entropy(const Eigen::MatrixXd& A);

// sum_i tr(A_i) * fractions[i]; may be negative (entropy itself is >= 0, so
// the usable lower bound is max(0, value)).
double trace_lower_bound(const flow::SwitchedSystem& system,
                         const std::vector<double>& fractions);

struct BoundReport {
    std::optional<double> lower;       // best effective lower bound (>= 0)
    std::optional<double> upper;
    bool exact = false;                // lower == upper within 1e-12
    std::vector<std::string> rules;    // which formula produced each bound
    std::vector<double> kappa_bars;    // per-coordinate weighted exponents
    std::vector<int> ordering;         // 1-based coordinate order of the upper bound
    std::vector<std::string> warnings;
    bool estimated = false;            // built on estimated activation fractions
    std::optional<double> trace_raw;   // unclamped trace bound
    std::string classification;
};

// Two-sided bound for commuting diagonalizable families:
// max_i kappa_bar_i^+ <= h <= sum_i kappa_bar_i^+.
BoundReport diagonal_bounds(const flow::SwitchedSystem& system,
                            const lie::StructureReport& structure,
                            const std::vector<double>& fractions);

// Upper bound for simultaneously triangularizable families:
// sum_{i=1..n} (kappa_bar_1^+ + ... + kappa_bar_i^+) in the triangularized
// coordinate order. For diagonal families the reversed order is also a valid
// triangularization and the smaller value is reported. A non-pass switching
// diagnostic only adds a warning; the bound's hypothesis is then unverified.
BoundReport triangular_upper_bound(const flow::SwitchedSystem& system,
                                   const lie::StructureReport& structure,
                                   const std::vector<double>& fractions,
                                   signals::Verdict switch_diag);

struct AnalyzeOptions {
    double horizon = 0.0; // <= 0: domain end (truncated) / 200 periods (periodic)
    double tol_classify = 1e-8;
    double tol_rank = 1e-9;
    double tail_start_fraction = 0.5;
};

struct Analysis {
    BoundReport report;
    lie::StructureReport structure;
    std::vector<double> fractions;
    bool fractions_exact = false;
    signals::SubexponentialReport switching;
};

// Classifies the system and returns the tightest applicable bounds: always
// the trace lower bound; exact values for scalar (n = 1) and LTI (k = 1)
// systems; diagonal or triangular bounds per classification.
Analysis analyze(const flow::SwitchedSystem& system,
                 const AnalyzeOptions& options = {});

} // namespace swent::bounds
