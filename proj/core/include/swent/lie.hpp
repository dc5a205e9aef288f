// lie.hpp — Lie-algebraic structure of a matrix family: brackets, closure,
// derived series, and constructive simultaneous diagonalization /
// triangularization with the realizing change of basis.

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace swent::lie {

// The k mode matrices of a switched system; all real n x n.
struct ModeSet {
    std::vector<Eigen::MatrixXd> matrices;

    ModeSet() = default;
    explicit ModeSet(std::vector<Eigen::MatrixXd> mats);

    int dim() const noexcept { return n_; }
    int count() const noexcept { return static_cast<int>(matrices.size()); }

private:
    int n_ = 0;
};

enum class Classification { commuting_diagonalizable, solvable, unstructured };

std::string to_string(Classification c);

struct StructureReport {
    Classification classification = Classification::unstructured;
    int closure_dim = 0;                     // dimension of the generated algebra
    std::optional<int> derived_depth;        // steps until the derived series dies
    Eigen::MatrixXcd transform;              // P with P A P^-1 diagonal/triangular
    std::vector<Eigen::MatrixXcd> transformed_modes;
    double residual = 0.0;                   // max off-pattern magnitude
    std::string diagnostic;                  // nonempty on numerical failure
};

// Thrown when no simultaneous eigenvector can be found even though the family
// was classified solvable (the premise failed numerically).
struct NoCommonEigenvector : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when the eigenspace-intersection rank decision is ambiguous at the
// requested tolerance.
struct IllConditioned : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename Derived, typename Other>
auto bracket(const Eigen::MatrixBase<Derived>& a,
             const Eigen::MatrixBase<Other>& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
        throw std::invalid_argument("bracket: matrices must be square and the same size");
    }
    return (a * b - b * a).eval();
}

// Basis (orthonormal as n^2-vectors) of the smallest bracket-closed subspace
// containing the modes. Rank decisions use the relative tolerance tol.
std::vector<Eigen::MatrixXd> lie_closure(const ModeSet& modes, double tol = 1e-9);

// Smallest m with g^(m) = 0 for g^(0) = span(basis), g^(m+1) = [g^(m), g^(m)];
// nullopt when the dimension stops decreasing at a nonzero subspace.
std::optional<int> derived_series_depth(const std::vector<Eigen::MatrixXd>& basis,
                                        double tol = 1e-9);

// Unitary P with P A_i P^-1 upper triangular for every mode, built by common-
// eigenvector deflation over C. Retries once with tol*10 before reporting
// NoCommonEigenvector / IllConditioned.
Eigen::MatrixXcd simultaneous_triangularizer(const ModeSet& modes,
                                             double tol = 1e-9);

// Full classification: commuting_diagonalizable when all pairwise brackets
// vanish and each mode is diagonalizable, else solvable when the derived
// series of the closure terminates, else unstructured. Never throws on valid
// input; numerical failures are reported through `diagnostic`.
StructureReport classify(const ModeSet& modes, double tol_classify = 1e-8,
                         double tol_rank = 1e-9);

} // namespace swent::lie
