// estimator.hpp — empirical topological-entropy estimation by spanning /
// separated set construction over a lattice on the unit hypercube, plus the
// closed-form per-coordinate count for diagonal systems and log-slope rate
// extraction.

#pragma once

#include <stdexcept>
#include <vector>

#include "swent/flow.hpp"
#include "swent/lie.hpp"

namespace swent::estimator {

enum class Method { spanning_greedy, separated_greedy, grid_formula };

struct EstimationConfig {
    std::vector<double> horizons;
    std::vector<double> epsilons{0.5, 0.25}; // decreasing, in (0,1)
    int grid_resolution = 33;                // points per axis, 3..64
    int sample_density = 20;                 // time samples per segment
    Method method = Method::spanning_greedy;

    // Throws std::invalid_argument naming the offending field; dim <= 3.
    void validate(int dim, bool for_rate_fit = false) const;
};

// Signals that no lattice point covers any lattice point at this (T, eps):
// the separation values are degenerate (typically overflow-poisoned) and the
// grid resolution must increase.
struct LatticeTooCoarse : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Greedy set cover over the candidate lattice: upper-bounds the minimal
// (T, eps)-spanning cardinality up to lattice discretization. Deterministic:
// ties break toward the lowest lattice index.
long long spanning_count(const flow::SwitchedSystem& system, double T,
                         double eps, const EstimationConfig& config);

// Greedy maximal packing in lattice scan order: lower-bounds the maximal
// (T, eps)-separated cardinality.
long long separated_count(const flow::SwitchedSystem& system, double T,
                          double eps, const EstimationConfig& config);

// Closed-form per-coordinate lattice count for diagonal (or scalar) systems:
// prod_i ceil(max(1, e^{max_{t<=T} kappa_i(t)}) / (2 eps)). Exact for
// diagonal systems because the sup-norm separation factorizes per axis.
long long grid_formula_count(const flow::SwitchedSystem& system,
                             const lie::StructureReport& structure, double T,
                             double eps);

struct EstimationResult {
    std::vector<double> horizons;
    std::vector<double> epsilons;
    std::vector<std::vector<long long>> counts; // counts[eps_idx][horizon_idx]
    std::vector<double> slopes;                 // per-eps tail-half fit of log count vs T
    std::vector<double> residuals;              // per-eps RMS fit residual
    double rate = 0.0;                          // slope at the smallest eps
};

// Fills the count table with the configured method and fits log count vs T
// over the tail half of the horizons for each eps.
EstimationResult entropy_rate(const flow::SwitchedSystem& system,
                              const EstimationConfig& config);

} // namespace swent::estimator
