#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "ddiqc/errors.hpp"
#include "ddiqc/iqc.hpp"
#include "ddiqc/lti.hpp"

// Optimal-property estimation on a prepared DataMatrixSet: scalar bisection
// for the L2-gain and passivity indices, and convex minimization over
// parameterized multiplier classes. The semidefinite feasibility problem
// "min gamma^2 s.t. the finite-horizon test matrix is PSD" collapses, after
// a Schur-complement elimination, to minimizing
//
//     phi(c) = gen_eig_max( Z(c)' Z(c), B ),
//     Z(c)   = T_L(Psi21(c)) Hu V  +  T_L(Psi22(c)) Hy V,
//     B      = (T_L(Psi11) Hu V)' (T_L(Psi11) Hu V),
//
// which is convex in the multiplier coefficients c because Z is affine in c
// and phi is a pointwise supremum of squared norms of affine maps. No
// external solver is used: each evaluation is one symmetric eigensolve in
// coordinates whitened by the Cholesky factor of B.

namespace ddiqc::optim {

struct OptimOptions {
    double opt_tol = 1e-4;   // relative optimality tolerance (stationarity)
    double feas_tol = 1e-7;  // feasibility residual tolerance (reported)
    int max_iter = 500;      // subgradient-phase iteration budget
    // Packed starting coefficients; empty selects c = 0. Packing order:
    // for each basis21 function, vec(c21_k) column-major (r2 x m), then the
    // same for basis22 when psi22 is free.
    Eigen::VectorXd initial;
};

// Parameterized triangular multiplier class: Psi = [[Psi11, 0], [Psi21,
// Psi22]] with M = diag(gamma^2 I, -I). Psi11 is a fixed stable filter on
// the input channels; Psi21 (and optionally Psi22) are free linear
// combinations of scalar basis functions with matrix coefficients.
struct PnMultiplierClass {
    lti::StateSpaceModel psi11;  // fixed, stable, m inputs
    lti::BasisSet basis21;       // scalar basis for Psi21 (coefficients r2 x m)
    lti::BasisSet basis22;       // scalar basis for Psi22 when it is free
    bool psi22_identity = true;  // fixes Psi22 = I_p (requires r2 == p)
    Eigen::Index r2 = 0;         // output count of Psi21 / Psi22

    // Throws ErrorKind::Argument on dimension mismatches, an unstable or
    // empty Psi11, unstable basis poles, or r2 < 1.
    void validate(Eigen::Index m, Eigen::Index p) const;
};

// Psi11 = I_m, Psi21 = c (one static coefficient), Psi22 = I_p.
PnMultiplierClass cone_class(Eigen::Index m, Eigen::Index p);
// Psi11 = I_m, Psi21 free over `basis`, Psi22 = I_p.
PnMultiplierClass approximation_class(const lti::BasisSet& basis, Eigen::Index m,
                                      Eigen::Index p);

// Precompiled instance of the convex program for one (data, class) pair:
// owns the affine map c -> Z(c), the whitening factor of B, and the basis
// images. Exposes phi so optimality claims can be audited externally.
class PnProblem {
  public:
    PnProblem(const iqc::DataMatrixSet& data, const PnMultiplierClass& cls);
    ~PnProblem();
    PnProblem(PnProblem&&) noexcept;
    PnProblem& operator=(PnProblem&&) noexcept;
    PnProblem(const PnProblem&) = delete;
    PnProblem& operator=(const PnProblem&) = delete;

    // Number of packed scalar coefficients (see OptimOptions::initial).
    int num_coefficients() const;
    // The convex objective phi(c) >= 0; gamma = sqrt(phi).
    double phi(const Eigen::VectorXd& c) const;
    // The affine matrix map Z(c), unwhitened.
    Eigen::MatrixXd assemble_Z(const Eigen::VectorXd& c) const;
    const Eigen::MatrixXd& B() const;
    // Smallest eigenvalue of B relative to its largest (conditioning report).
    bool ill_conditioned() const;
    // lambda_min of the full feasibility block [[I, Z(c)], [Z(c)', g2 B]].
    double feasibility_residual(const Eigen::VectorXd& c, double gamma_sq) const;
    // Split a packed vector into c21 / c22 coefficient matrices.
    void unpack(const Eigen::VectorXd& c, std::vector<Eigen::MatrixXd>& c21,
                std::vector<Eigen::MatrixXd>& c22) const;

    struct Impl;
    const Impl& impl() const { return *impl_; }

  private:
    std::unique_ptr<Impl> impl_;
};

struct OptimalIqcResult {
    double gamma_sq = 0.0;                // phi at the returned coefficients
    std::vector<Eigen::MatrixXd> c21;     // one r2 x m matrix per basis21 entry
    std::vector<Eigen::MatrixXd> c22;     // present only when psi22 is free
    Eigen::VectorXd c_packed;             // the same coefficients, packed
    int iterations = 0;                   // objective evaluations performed
    double feasibility_residual = 0.0;    // lambda_min of the feasibility block
    bool converged = false;               // stationarity within opt_tol
    bool b_ill_conditioned = false;       // lambda_min(B) < 1e-12 * lambda_max(B)
};

// Minimal gamma such that the data certifies the finite-horizon gain bound
// ||y|| <= gamma ||u||: the exact generalized-eigenvalue solution
// sqrt(gen_eig_max(HyV'HyV + delta I, HuV'HuV)), cross-validated internally
// against a bisection on the verification test to relative gap <= tol (the
// two must agree within 2 tol, else ErrorKind::Numeric). `delta` <= 0
// applies the noise relaxation threshold from noise_margin_delta.
// Rank-deficient HuV (gain unbounded on the data) raises
// ErrorKind::Degenerate.
double l2_gain_estimate(const iqc::DataMatrixSet& data, double tol = 1e-6,
                        double delta = 0.0);

// Minimal rho such that the data certifies dissipativity with the input
// supply rho|u|^2 + u'y (PassivityKind::Input) or u'y + rho|y|^2
// (PassivityKind::Output). Bisection with the bracket grown by doubling
// from [-1, 1]; |rho| exceeding 2^40 raises ErrorKind::Unbounded. Requires
// m == p and full-column-rank HuV.
double passivity_index_estimate(const iqc::DataMatrixSet& data,
                                iqc::PassivityKind which, double tol = 1e-6,
                                double delta = 0.0);

// Minimize phi over the class's free coefficients. Deterministic and
// single-threaded: a least-squares warm start, the diminishing-step
// subgradient phase (eigen-cluster-averaged subgradients), a smoothed
// spectral phase (log-sum-exp with continuation, limited-memory BFGS), and
// a coordinate-wise golden-section polish. Never worse than the best
// iterate seen; `converged` reports whether the final polish pass improved
// by more than opt_tol * (1 + phi).
OptimalIqcResult optimal_pn_iqc(const iqc::DataMatrixSet& data,
                                const PnMultiplierClass& cls,
                                const OptimOptions& opts = {});

struct ConeResult {
    Eigen::MatrixXd C;       // cone center, p x m
    double gamma = 0.0;      // cone radius
    OptimalIqcResult detail;
};

// Smallest data-certified cone: minimal gamma with ||y - C u|| <= gamma
// ||u|| over the reduced horizon, jointly over (C, gamma).
ConeResult tightest_cone(const iqc::DataMatrixSet& data,
                         const OptimOptions& opts = {});

struct ApproximationResult {
    lti::StateSpaceModel model;                 // realized low-order model
    std::vector<Eigen::MatrixXd> coefficients;  // its expansion in `basis`
    double gamma = 0.0;                         // certified deviation radius
    OptimalIqcResult detail;
};

// Certified low-order approximation: the stable filter G_lo in the span of
// `basis` minimizing the data-certified deviation bound
// ||(G - G_lo) u|| <= gamma ||u|| over the reduced horizon for
// zero-initial-condition inputs.
ApproximationResult loworder_approximation(const iqc::DataMatrixSet& data,
                                           const lti::BasisSet& basis,
                                           const OptimOptions& opts = {});

}  // namespace ddiqc::optim
