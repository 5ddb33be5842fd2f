#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ddiqc/errors.hpp"

// Structured dense linear algebra used throughout the library: Hankel and
// block-Toeplitz assembly from multivariate signals, orthonormal kernel
// bases with rank decisions, and the symmetric/generalized eigenvalue and
// singular value queries every analysis reduces to.
//
// Signal convention: a length-N signal with q channels is an N x q matrix,
// one sample per row. A "stacked" vector window of depth d is the column
// (x_k; x_{k+1}; ...; x_{k+d-1}) of size q*d.

namespace ddiqc::linalg {

// Relative rank cutoff: singular values sigma_i <= rank_tolerance(...) *
// sigma_max are treated as zero. The factor 64 gives headroom over the bare
// eps * dim bound for the accumulated error of the upstream products.
inline double rank_tolerance(Eigen::Index rows, Eigen::Index cols) {
    return static_cast<double>(std::max(rows, cols)) * 2.220446049250313e-16 * 64.0;
}

// Throws ErrorKind::Numeric if any entry of `M` is NaN or infinite.
void ensure_finite(const Eigen::MatrixXd& M, const char* what);

// Hankel matrix of sliding windows: column j is the stacked window of
// `depth` consecutive samples starting at sample j. Result has q*depth rows
// and N-depth+1 columns. Requires 1 <= depth <= N.
Eigen::MatrixXd hankel_matrix(const Eigen::MatrixXd& signal, int depth);

// Lower block-triangular Toeplitz matrix of a matrix impulse sequence
// (g_0, g_1, ...): block (i, j) equals g_{i-j} for i >= j and 0 above the
// diagonal. Blocks past the end of `impulse` are zero, so short (FIR)
// sequences are zero-padded implicitly. All blocks must share one shape.
Eigen::MatrixXd block_toeplitz(const std::vector<Eigen::MatrixXd>& impulse, int depth);

struct KernelBasis {
    Eigen::MatrixXd basis;  // orthonormal columns spanning ker(A)
    Eigen::Index rank = 0;  // numerical rank of A at the tolerance used
    double tol_used = 0.0;  // relative tolerance applied to sigma_max
};

// Orthonormal basis of the (right) null space of A via SVD. `rel_tol` < 0
// selects rank_tolerance(rows, cols).
KernelBasis kernel_basis(const Eigen::MatrixXd& A, double rel_tol = -1.0);

struct Eigenpair {
    double value = 0.0;
    Eigen::VectorXd vector;
};

// Smallest eigenvalue and eigenvector of a symmetric matrix. The input must
// be symmetric up to roundoff; it is symmetrized before factorization.
Eigenpair min_eigenpair_sym(const Eigen::MatrixXd& S);

// Largest singular value. Zero-sized matrices yield 0.
double max_singular_value(const Eigen::MatrixXd& A);

// Largest generalized eigenvalue lambda with A v = lambda B v for symmetric
// A and positive definite B, computed through the Cholesky factor of B
// (equivalently lambda_max of B^{-1/2} A B^{-1/2}). The returned vector is
// the generalized eigenvector with unit Euclidean norm. Throws
// ErrorKind::Degenerate when B is not positive definite; the message
// reports lambda_min(B).
Eigenpair gen_eig_max(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

}  // namespace ddiqc::linalg
