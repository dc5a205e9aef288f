#include "swent/lie.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>

namespace swent::lie {

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

VectorXd vectorize(const MatrixXd& m) {
    return Eigen::Map<const VectorXd>(m.data(), m.size());
}

// Orthonormal basis maintained incrementally with re-orthogonalized
// Gram-Schmidt; candidates are accepted when their residual exceeds
// tol * ||candidate||.
class SpanBasis {
public:
    explicit SpanBasis(double tol) : tol_(tol) {}

    bool add(const MatrixXd& m) {
        const double scale = m.norm();
        if (!(scale > 0.0)) return false;
        VectorXd v = vectorize(m);
        for (int pass = 0; pass < 2; ++pass) {
            for (const VectorXd& b : vecs_) {
                v -= b.dot(v) * b;
            }
        }
        const double res = v.norm();
        if (res <= tol_ * scale) return false;
        v /= res;
        vecs_.push_back(v);
        mats_.emplace_back(Eigen::Map<const MatrixXd>(v.data(), m.rows(), m.cols()));
        return true;
    }

    const std::vector<MatrixXd>& matrices() const { return mats_; }
    std::size_t size() const { return vecs_.size(); }

private:
    double tol_;
    std::vector<VectorXd> vecs_;
    std::vector<MatrixXd> mats_;
};

struct EigCluster {
    std::complex<double> value;
    int multiplicity = 0;
};

// Group nearly equal eigenvalues and order the clusters by descending real
// part (imaginary part breaks ties) so the search order is deterministic.
std::vector<EigCluster> cluster_eigenvalues(const VectorXcd& evs, double ctol) {
    std::vector<std::complex<double>> vals(evs.data(), evs.data() + evs.size());
    std::sort(vals.begin(), vals.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    std::vector<EigCluster> clusters;
    for (const auto& v : vals) {
        bool merged = false;
        for (auto& c : clusters) {
            if (std::abs(v - c.value) < ctol) {
                c.value = (c.value * static_cast<double>(c.multiplicity) + v) /
                          static_cast<double>(c.multiplicity + 1);
                c.multiplicity += 1;
                merged = true;
                break;
            }
        }
        if (!merged) clusters.push_back(EigCluster{v, 1});
    }
    std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
        if (a.value.real() != b.value.real()) return a.value.real() > b.value.real();
        return a.value.imag() > b.value.imag();
    });
    return clusters;
}

struct Candidate {
    VectorXcd v;
    double quality = 0.0; // smallest margin of the rank decisions on the path
};

// Null space of the stacked constraints (A_j - mu_j I), j over the processed
// modes. Returns null dimension, basis vector of the least-significant null
// direction, and the rank-decision margin.
struct NullInfo {
    int dim = 0;
    VectorXcd v;
    double margin = 0.0;
};

NullInfo stacked_null(const std::vector<MatrixXcd>& stack, double tol) {
    const Eigen::Index n = stack.front().cols();
    MatrixXcd S(static_cast<Eigen::Index>(stack.size()) * n, n);
    for (std::size_t i = 0; i < stack.size(); ++i) {
        S.middleRows(static_cast<Eigen::Index>(i) * n, n) = stack[i];
    }
    Eigen::JacobiSVD<MatrixXcd> svd(S, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    NullInfo info;
    const double smax = sv(0);
    if (!(smax > 0.0)) {
        info.dim = static_cast<int>(n);
        info.v = VectorXcd::Unit(n, 0);
        info.margin = 1.0;
        return info;
    }
    int d = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) <= tol * smax) ++d;
    }
    info.dim = d;
    if (d > 0) {
        info.v = svd.matrixV().col(n - 1);
        info.margin = (d < n) ? sv(n - d - 1) / smax : 1.0;
    }
    return info;
}

void search_branch(const std::vector<MatrixXcd>& mats,
                   std::vector<MatrixXcd>& stack, std::size_t next_mode,
                   double quality_so_far, double tol,
                   std::vector<Candidate>& out) {
    NullInfo info = stacked_null(stack, tol);
    if (info.dim == 0) return;
    const double quality = std::min(quality_so_far, info.margin);
    if (next_mode == mats.size()) {
        out.push_back(Candidate{info.v, quality});
        return;
    }
    const MatrixXcd& A = mats[next_mode];
    const double ctol = 1e-6 * std::max(1.0, A.norm());
    Eigen::ComplexEigenSolver<MatrixXcd> es(A, false);
    if (es.info() != Eigen::Success) {
        throw NoCommonEigenvector("eigenvalue solver failed during the common-eigenvector search");
    }
    for (const EigCluster& c : cluster_eigenvalues(es.eigenvalues(), ctol)) {
        stack.push_back(A - c.value * MatrixXcd::Identity(A.rows(), A.cols()));
        search_branch(mats, stack, next_mode + 1, quality, tol, out);
        stack.pop_back();
    }
}

// Find a simultaneous eigenvector of all matrices. Eigenvalues of the first
// matrix are explored in descending real part; the first eigenvalue cluster
// with any surviving intersection wins and the candidate with the cleanest
// rank decisions is chosen.
Candidate common_eigenvector(const std::vector<MatrixXcd>& mats, double tol) {
    const MatrixXcd& A0 = mats.front();
    const double ctol = 1e-6 * std::max(1.0, A0.norm());
    Eigen::ComplexEigenSolver<MatrixXcd> es(A0, false);
    if (es.info() != Eigen::Success) {
        throw NoCommonEigenvector("eigenvalue solver failed during the common-eigenvector search");
    }
    for (const EigCluster& c : cluster_eigenvalues(es.eigenvalues(), ctol)) {
        std::vector<MatrixXcd> stack;
        stack.push_back(A0 - c.value * MatrixXcd::Identity(A0.rows(), A0.cols()));
        std::vector<Candidate> candidates;
        search_branch(mats, stack, 1, 1.0, tol, candidates);
        if (candidates.empty()) continue;
        std::size_t best = 0;
        for (std::size_t i = 1; i < candidates.size(); ++i) {
            if (candidates[i].quality > candidates[best].quality) best = i;
        }
        if (candidates[best].quality < 10.0 * tol) {
            throw IllConditioned("eigenspace intersection rank test is ambiguous at this tolerance");
        }
        return candidates[best];
    }
    throw NoCommonEigenvector("no simultaneous eigenvector found");
}

double max_strict_lower(const MatrixXcd& m) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            r = std::max(r, std::abs(m(i, j)));
        }
    }
    return r;
}

double max_off_diagonal(const MatrixXcd& m) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (i != j) r = std::max(r, std::abs(m(i, j)));
        }
    }
    return r;
}

double family_scale(const ModeSet& modes) {
    double s = 0.0;
    for (const auto& m : modes.matrices) s = std::max(s, m.norm());
    return s;
}

MatrixXcd triangularize_impl(const ModeSet& modes, double tol) {
    const int n = modes.dim();
    std::vector<MatrixXcd> work;
    work.reserve(modes.matrices.size());
    for (const auto& m : modes.matrices) work.emplace_back(m.cast<std::complex<double>>());

    MatrixXcd U = MatrixXcd::Identity(n, n);
    for (int level = 0; level + 1 < n; ++level) {
        const int m = n - level;
        std::vector<MatrixXcd> sub;
        sub.reserve(work.size());
        for (const auto& w : work) sub.push_back(w.bottomRightCorner(m, m));
        Candidate cand = common_eigenvector(sub, tol);

        // Unitary with the eigenvector as first column, via Householder QR.
        Eigen::HouseholderQR<MatrixXcd> qr(cand.v);
        MatrixXcd Q = qr.householderQ() * MatrixXcd::Identity(m, m);

        MatrixXcd step = MatrixXcd::Identity(n, n);
        step.bottomRightCorner(m, m) = Q;
        for (auto& w : work) w = step.adjoint() * w * step;
        U = U * step;
    }
    return U.adjoint(); // P A P^-1 = U^H A U is upper triangular
}

// Joint eigenspace refinement: maintain blocks spanning common eigenspaces of
// the processed modes, splitting each block along the eigenspaces of the next
// mode's restriction. Valid because the family commutes.
MatrixXcd diagonalize_commuting(const ModeSet& modes, double tol) {
    const int n = modes.dim();
    std::vector<MatrixXcd> blocks{MatrixXcd::Identity(n, n)};
    for (const auto& mode : modes.matrices) {
        const MatrixXcd A = mode.cast<std::complex<double>>();
        const double ctol = std::max(tol, 1e-10) * std::max(1.0, A.norm());
        std::vector<MatrixXcd> next;
        for (const MatrixXcd& B : blocks) {
            const Eigen::Index m = B.cols();
            if (m == 1) {
                next.push_back(B);
                continue;
            }
            MatrixXcd C = B.adjoint() * A * B;
            Eigen::ComplexEigenSolver<MatrixXcd> es(C, true);
            if (es.info() != Eigen::Success) {
                throw IllConditioned("eigenvalue solver failed during joint diagonalization");
            }
            const auto clusters = cluster_eigenvalues(es.eigenvalues(), ctol);
            // Assign each eigenvector to its nearest cluster.
            std::vector<std::vector<Eigen::Index>> members(clusters.size());
            for (Eigen::Index i = 0; i < m; ++i) {
                std::size_t best = 0;
                double best_d = std::abs(es.eigenvalues()(i) - clusters[0].value);
                for (std::size_t c = 1; c < clusters.size(); ++c) {
                    const double d = std::abs(es.eigenvalues()(i) - clusters[c].value);
                    if (d < best_d) {
                        best = c;
                        best_d = d;
                    }
                }
                members[best].push_back(i);
            }
            for (std::size_t c = 0; c < clusters.size(); ++c) {
                if (members[c].empty()) continue;
                MatrixXcd W(m, static_cast<Eigen::Index>(members[c].size()));
                for (std::size_t j = 0; j < members[c].size(); ++j) {
                    W.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(members[c][j]);
                }
                MatrixXcd sub = B * W;
                // Re-orthonormalize within the eigenspace for conditioning.
                Eigen::HouseholderQR<MatrixXcd> qr(sub);
                MatrixXcd Qthin =
                    qr.householderQ() * MatrixXcd::Identity(sub.rows(), sub.cols());
                next.push_back(Qthin);
            }
        }
        blocks = std::move(next);
    }
    MatrixXcd V(n, n);
    int col = 0;
    for (const auto& B : blocks) {
        for (Eigen::Index j = 0; j < B.cols() && col < n; ++j) V.col(col++) = B.col(j);
    }
    if (col != n) {
        throw IllConditioned("joint eigenspace refinement lost rank");
    }
    Eigen::JacobiSVD<MatrixXcd> svd(V);
    const double smin = svd.singularValues()(n - 1);
    const double smax = svd.singularValues()(0);
    if (!(smin > 0.0) || smax / smin > 1e8) {
        throw IllConditioned("joint eigenvector basis is too ill conditioned");
    }
    return V.inverse();
}

bool mode_is_diagonalizable(const MatrixXd& A, double tol) {
    if (A.rows() == 1) return true;
    Eigen::EigenSolver<MatrixXd> es(A, true);
    if (es.info() != Eigen::Success) return false;
    const MatrixXcd V = es.eigenvectors();
    const MatrixXcd lhs = A.cast<std::complex<double>>() * V;
    const MatrixXcd rhs = V * es.eigenvalues().asDiagonal();
    if ((lhs - rhs).norm() > tol * std::max(1.0, A.norm())) return false;
    Eigen::JacobiSVD<MatrixXcd> svd(V);
    const double smin = svd.singularValues()(V.cols() - 1);
    const double smax = svd.singularValues()(0);
    return smin > 0.0 && smax / smin <= 1e8;
}

} // namespace

ModeSet::ModeSet(std::vector<Eigen::MatrixXd> mats) : matrices(std::move(mats)) {
    if (matrices.empty()) {
        throw std::invalid_argument("ModeSet: need at least one matrix");
    }
    n_ = static_cast<int>(matrices.front().rows());
    for (const auto& m : matrices) {
        if (m.rows() != m.cols() || m.rows() != n_) {
            throw std::invalid_argument("ModeSet: all matrices must be square and the same size");
        }
        if (!m.allFinite()) {
            throw std::invalid_argument("ModeSet: matrix entries must be finite");
        }
    }
}

std::string to_string(Classification c) {
    switch (c) {
    case Classification::commuting_diagonalizable: return "commuting_diagonalizable";
    case Classification::solvable: return "solvable";
    case Classification::unstructured: return "unstructured";
    }
    return "unstructured";
}

std::vector<Eigen::MatrixXd> lie_closure(const ModeSet& modes, double tol) {
    if (!(tol > 0.0)) {
        throw std::invalid_argument("lie_closure: tol must be positive");
    }
    SpanBasis basis(tol);
    for (const auto& m : modes.matrices) basis.add(m);
    // Worklist over pairs of the growing basis; dimension is capped by n^2.
    for (std::size_t i = 0; i < basis.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            basis.add(bracket(basis.matrices()[i], basis.matrices()[j]));
        }
    }
    return basis.matrices();
}

std::optional<int> derived_series_depth(const std::vector<Eigen::MatrixXd>& basis,
                                        double tol) {
    SpanBasis current(tol);
    for (const auto& m : basis) current.add(m);
    int depth = 0;
    while (current.size() > 0) {
        SpanBasis next(tol);
        const auto& mats = current.matrices();
        for (std::size_t i = 0; i < mats.size(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                next.add(bracket(mats[i], mats[j]));
            }
        }
        ++depth;
        if (next.size() >= current.size()) {
            return std::nullopt; // dimension stopped decreasing at a nonzero subspace
        }
        current = std::move(next);
    }
    return depth;
}

Eigen::MatrixXcd simultaneous_triangularizer(const ModeSet& modes, double tol) {
    if (!(tol > 0.0)) {
        throw std::invalid_argument("simultaneous_triangularizer: tol must be positive");
    }
    const double scale = family_scale(modes);
    // Already upper triangular: identity realizes the form exactly.
    double lower = 0.0;
    for (const auto& m : modes.matrices) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < i; ++j) lower = std::max(lower, std::abs(m(i, j)));
        }
    }
    if (lower <= 1e-14 * std::max(1.0, scale)) {
        return Eigen::MatrixXcd::Identity(modes.dim(), modes.dim());
    }
    auto verify = [&](const Eigen::MatrixXcd& P) {
        double res = 0.0;
        for (const auto& m : modes.matrices) {
            const Eigen::MatrixXcd t = P * m.cast<std::complex<double>>() * P.adjoint();
            res = std::max(res, max_strict_lower(t));
        }
        return res <= 1e-8 * std::max(1.0, scale);
    };
    try {
        Eigen::MatrixXcd P = triangularize_impl(modes, tol);
        if (verify(P)) return P;
        throw NoCommonEigenvector("triangular residual exceeded tolerance");
    } catch (const std::runtime_error&) {
        // One relaxed retry before giving up.
        Eigen::MatrixXcd P = triangularize_impl(modes, tol * 10.0);
        if (verify(P)) return P;
        throw NoCommonEigenvector("triangular residual exceeded tolerance after retry");
    }
}

StructureReport classify(const ModeSet& modes, double tol_classify, double tol_rank) {
    StructureReport rep;
    const int n = modes.dim();
    const double scale = std::max(1.0, family_scale(modes));
    rep.transform = Eigen::MatrixXcd::Identity(n, n);

    try {
        const auto closure = lie_closure(modes, tol_rank);
        rep.closure_dim = static_cast<int>(closure.size());

        bool commuting = true;
        for (std::size_t i = 0; i < modes.matrices.size() && commuting; ++i) {
            for (std::size_t j = 0; j < i && commuting; ++j) {
                const double pair_scale =
                    modes.matrices[i].norm() * modes.matrices[j].norm();
                if (bracket(modes.matrices[i], modes.matrices[j]).norm() >
                    tol_classify * pair_scale) {
                    commuting = false;
                }
            }
        }
        bool all_diagonalizable = commuting;
        if (commuting) {
            for (const auto& m : modes.matrices) {
                if (!mode_is_diagonalizable(m, tol_classify)) {
                    all_diagonalizable = false;
                    break;
                }
            }
        }

        if (commuting && all_diagonalizable) {
            // Exactly diagonal families keep the identity transform.
            double offdiag = 0.0;
            for (const auto& m : modes.matrices) {
                for (Eigen::Index i = 0; i < m.rows(); ++i) {
                    for (Eigen::Index j = 0; j < m.cols(); ++j) {
                        if (i != j) offdiag = std::max(offdiag, std::abs(m(i, j)));
                    }
                }
            }
            Eigen::MatrixXcd P = offdiag <= 1e-14 * scale
                                     ? Eigen::MatrixXcd::Identity(n, n)
                                     : diagonalize_commuting(modes, tol_rank);
            double res = 0.0;
            std::vector<Eigen::MatrixXcd> transformed;
            const Eigen::MatrixXcd Pinv = P.inverse();
            for (const auto& m : modes.matrices) {
                Eigen::MatrixXcd t = P * m.cast<std::complex<double>>() * Pinv;
                res = std::max(res, max_off_diagonal(t));
                transformed.push_back(std::move(t));
            }
            if (res > 1e-8 * scale) {
                throw IllConditioned("joint diagonalization residual exceeded tolerance");
            }
            rep.classification = Classification::commuting_diagonalizable;
            rep.derived_depth = derived_series_depth(closure, tol_rank);
            rep.transform = std::move(P);
            rep.transformed_modes = std::move(transformed);
            rep.residual = res;
            return rep;
        }

        rep.derived_depth = derived_series_depth(closure, tol_rank);
        if (rep.derived_depth.has_value()) {
            Eigen::MatrixXcd P = simultaneous_triangularizer(modes, tol_rank);
            double res = 0.0;
            std::vector<Eigen::MatrixXcd> transformed;
            for (const auto& m : modes.matrices) {
                Eigen::MatrixXcd t = P * m.cast<std::complex<double>>() * P.adjoint();
                res = std::max(res, max_strict_lower(t));
                transformed.push_back(std::move(t));
            }
            rep.classification = Classification::solvable;
            rep.transform = std::move(P);
            rep.transformed_modes = std::move(transformed);
            rep.residual = res;
            return rep;
        }
    } catch (const std::exception& e) {
        rep.classification = Classification::unstructured;
        rep.diagnostic = e.what();
        rep.transform = Eigen::MatrixXcd::Identity(n, n);
        rep.transformed_modes.clear();
        for (const auto& m : modes.matrices) {
            rep.transformed_modes.emplace_back(m.cast<std::complex<double>>());
        }
        rep.residual = 0.0;
        return rep;
    }

    rep.classification = Classification::unstructured;
    for (const auto& m : modes.matrices) {
        rep.transformed_modes.emplace_back(m.cast<std::complex<double>>());
    }
    rep.residual = 0.0;
    return rep;
}

} // namespace swent::lie
