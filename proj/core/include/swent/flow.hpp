// flow.hpp — exact evolution of switched linear systems: products of
// per-segment matrix exponentials, trajectories, separation norms, and the
// trace/determinant volume-growth identity.

#pragma once

#include <Eigen/Dense>

#include <vector>

#include "swent/lie.hpp"
#include "swent/signal.hpp"

namespace swent::flow {

struct SwitchedSystem {
    lie::ModeSet modes;
    signals::SwitchingSignal signal;

    SwitchedSystem(lie::ModeSet m, signals::SwitchingSignal s);

    int dim() const noexcept { return modes.dim(); }
    int mode_count() const noexcept { return modes.count(); }
};

struct Trajectory {
    std::vector<double> times;           // times[0] == 0
    std::vector<Eigen::VectorXd> states; // states[0] == x0
    Eigen::VectorXd x0;
};

// e^(A*dt) by scaling-and-squaring Padé; segments with ||A*dt|| > 50 are
// split so the squaring error stays controlled.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A, double dt);

// Caches the per-segment exponentials (immutable after construction) so
// repeated transition queries never re-exponentiate history.
class FlowPropagator {
public:
    explicit FlowPropagator(const SwitchedSystem& system);

    // Phi(t): ordered product of segment exponentials over [0, t].
    Eigen::MatrixXd transition(double t) const;

    // Phi at each time of an increasing list, one forward pass.
    std::vector<Eigen::MatrixXd> transitions(const std::vector<double>& times) const;

    // Phi(t) * v at each time of an increasing list, propagating the vector.
    std::vector<Eigen::VectorXd> propagate(const Eigen::VectorXd& v,
                                           const std::vector<double>& times) const;

private:
    template <typename State, typename Apply>
    void walk(const std::vector<double>& times, State& state, const Apply& apply,
              std::vector<State>& out) const;

    const Eigen::MatrixXd& mode_matrix(int mode) const;

    int n_ = 0;
    std::vector<Eigen::MatrixXd> mode_matrices_;
    signals::SwitchingSignal signal_;
    std::vector<Eigen::MatrixXd> segment_exp_; // per listed segment
    Eigen::MatrixXd cycle_product_;            // Phi(period) when periodic
};

Eigen::MatrixXd transition_matrix(const SwitchedSystem& system, double t);

// States along increasing sample times; a leading t = 0 sample is added when
// absent so the trajectory starts at x0.
Trajectory solve(const SwitchedSystem& system, const Eigen::VectorXd& x0,
                 std::vector<double> times);

// Sampling grid for sup-norm work on [0, T]: 0, T, every change instant, and
// a uniform grid of per_segment points inside each constant-mode piece.
std::vector<double> sample_times(const SwitchedSystem& system, double T,
                                 int per_segment = 20);

// sup over the sample times of ||Phi(t)(x - y)||_inf. The samples must cover
// [0, T] including 0, T, and all change instants.
double separation(const SwitchedSystem& system, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& y, double T,
                  const std::vector<double>& samples);

struct VolumeGrowth {
    double formula_value = 0.0;     // exp(sum_i tr(A_i) tau_i(T))
    double determinant_value = 0.0; // det Phi(T)
};

// The two routes agree to 1e-9 relative for well-posed systems; the
// determinant side is accumulated in extended precision because det is
// ill-conditioned when the flow is strongly non-normal.
VolumeGrowth volume_growth(const SwitchedSystem& system, double T);

} // namespace swent::flow
