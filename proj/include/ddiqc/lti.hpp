#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ddiqc/errors.hpp"

// Discrete-time LTI state-space modeling: simulation, impulse and frequency
// responses, persistency-of-excitation checks, seeded random system
// generation, and the filter realizations used to parameterize multipliers.
// This module is both the data generator and the ground-truth oracle layer
// for everything the data-driven analyses claim.

namespace ddiqc::lti {

struct StateSpaceModel {
    Eigen::MatrixXd A;  // n x n
    Eigen::MatrixXd B;  // n x m
    Eigen::MatrixXd C;  // p x n
    Eigen::MatrixXd D;  // p x m

    Eigen::Index order() const { return A.rows(); }
    Eigen::Index inputs() const { return D.cols(); }
    Eigen::Index outputs() const { return D.rows(); }

    // Throws ErrorKind::Argument on inconsistent dimensions or non-finite
    // entries. Every public operation validates its model arguments.
    void validate() const;

    double spectral_radius() const;
    bool stable(double margin = 1e-9) const;  // spectral radius < 1 - margin
    bool minimal() const;  // controllability and observability both full rank
};

// Static (memoryless) model y = D u.
StateSpaceModel static_model(const Eigen::MatrixXd& D);

// Measured input-output data: one sample per row.
struct Trajectory {
    Eigen::MatrixXd u;  // N x m
    Eigen::MatrixXd y;  // N x p

    Eigen::Index length() const { return u.rows(); }
    Eigen::Index inputs() const { return u.cols(); }
    Eigen::Index outputs() const { return y.cols(); }
    void validate() const;
};

// y_k = C x_k + D u_k, x_{k+1} = A x_k + B u_k. `x0` empty means zero.
Eigen::MatrixXd simulate(const StateSpaceModel& model, const Eigen::MatrixXd& u,
                         const Eigen::VectorXd& x0 = Eigen::VectorXd());

// Impulse response blocks (g_0, ..., g_{n_terms-1}): g_0 = D, g_k = C A^{k-1} B.
std::vector<Eigen::MatrixXd> impulse_response(const StateSpaceModel& model, int n_terms);

// Persistency of excitation of a given order: H_order(u) has full row rank
// at the core-linalg rank tolerance. Inputs shorter than the necessary
// bound N >= (m+1)*order - 1 are never persistently exciting.
bool persistency_order(const Eigen::MatrixXd& u, int order);

// Excitation margin: sigma_{m*order}(H_order(u)), the smallest singular
// value that must stay away from zero for the PE property; 0 when the
// length bound already fails.
double pe_margin(const Eigen::MatrixXd& u, int order);

// Seeded random system: A entrywise standard normal rescaled to the target
// spectral radius, B, C, D standard normal (draw order: A, B, C, D, each
// row-major), redrawn up to 100 times until minimal. Deterministic per seed.
StateSpaceModel random_stable_system(int n, int m, int p, std::uint64_t seed,
                                     double target_spectral_radius = 0.8);

// Lower bound on the H-infinity norm: max of sigma_max(G(e^{i w})) over a
// uniform grid of [0, pi], sharpened by golden-section refinement around
// the grid argmax. Tight to `refine_tol` for smooth responses.
double hinf_norm_grid(const StateSpaceModel& model, int n_grid = 4096,
                      double refine_tol = 1e-8);

// One scalar basis function (z + lambda)^{-power}; power 0 is the constant
// function 1 (lambda ignored). Stable and causal whenever |lambda| < 1.
struct BasisFunction {
    double lambda = 0.0;
    int power = 0;
};
using BasisSet = std::vector<BasisFunction>;

// (1, (z+lambda)^{-1}, ..., (z+lambda)^{-order}).
BasisSet chain_basis(double lambda, int order);
// (1, (z+lambda_1)^{-1}, (z+lambda_2)^{-1}, ...).
BasisSet pole_basis(const std::vector<double>& lambdas);

// First n_terms impulse-response samples of a scalar basis function.
Eigen::VectorXd basis_impulse(const BasisFunction& fn, int n_terms);

// State-space realization of sum_k coeffs[k] * basis[k](z) acting on q
// input channels (q = coeffs[k].cols()); all coefficient matrices must
// share one shape. Chain realization per distinct pole, exact.
StateSpaceModel realize_basis_filter(const std::vector<Eigen::MatrixXd>& coeffs,
                                     const BasisSet& basis);

// Smallest l with rank(col(C, CA, ..., CA^{l-1})) = n. Requires an
// observable model; n = 0 gives l = 0.
int observability_lag(const StateSpaceModel& model);

// Elementwise exponential weighting x_k -> rho^k x_k. rho must be positive.
Eigen::MatrixXd exp_weight(const Eigen::MatrixXd& signal, double rho);

// --- model composition (used by the multiplier transforms) ---

// Series interconnection: (second ∘ first)(u) = second(first(u)).
StateSpaceModel series(const StateSpaceModel& second, const StateSpaceModel& first);
// Parallel sum sharing one input: g1(u) + g2(u).
StateSpaceModel add(const StateSpaceModel& g1, const StateSpaceModel& g2);
// Inverse system; requires square invertible feedthrough D.
StateSpaceModel inverse(const StateSpaceModel& g);
// Exact state reduction: drops unreachable then unobservable directions via
// orthonormal subspace projections at the given relative rank tolerance.
StateSpaceModel minreal(const StateSpaceModel& g, double rel_tol = 1e-10);

Eigen::MatrixXd controllability_matrix(const StateSpaceModel& g);
Eigen::MatrixXd observability_matrix(const StateSpaceModel& g, int depth = -1);

// Frequency response G(e^{i w}) evaluated at one frequency.
Eigen::MatrixXcd frequency_response(const StateSpaceModel& g, double omega);

}  // namespace ddiqc::lti
