#pragma once

// Data-driven finite-horizon IQC verification: restricted data matrices
// built from one measured trajectory, the semidefiniteness test deciding
// whether the unknown system satisfies a given (L-nu)-IQC, the exact
// model-based oracle for self-verification, and the noise-margin
// relaxation of the test under output measurement noise.

#include <Eigen/Dense>
#include <cstdint>

#include "ddiqc/lti.hpp"

namespace ddiqc::iqc {

// Multiplier factorization P(z) = Psi~(z) M Psi(z): a stable causal filter
// Psi acting on the stacked signal w_k = (u_k; y_k) (u-block first), and a
// constant symmetric matrix M on the filtered output r = Psi * w.
struct MultiplierFactorization {
    lti::StateSpaceModel psi;  // inputs m+p, outputs n_r
    Eigen::MatrixXd M;         // n_r x n_r, symmetric within 1e-12
    Eigen::Index m = 0;        // input channels of the analyzed system
    Eigen::Index p = 0;        // output channels of the analyzed system

    Eigen::Index filtered_size() const { return M.rows(); }
    void validate() const;
};

// L2-gain bound |y| <= gamma |u|: Psi = I_{m+p}, M = diag(gamma^2 I_m, -I_p).
MultiplierFactorization gain_multiplier(Eigen::Index m, Eigen::Index p, double gamma);

enum class PassivityKind { Input, Output };

// Passivity-index multiplier (requires m = p), Psi = I_{2m}:
//   input:  M = [[rho I, 1/2 I], [1/2 I, 0]]      (sum u'y + rho |u|^2)
//   output: M = [[0, 1/2 I], [1/2 I, rho I]]      (sum u'y + rho |y|^2)
MultiplierFactorization passivity_multiplier(Eigen::Index m, PassivityKind kind,
                                             double rho);

// Conic relation |y - C u| <= gamma |u|: Psi = [[I, 0], [-C, I]] static,
// M = diag(gamma^2 I_m, -I_p); C is p x m.
MultiplierFactorization cone_multiplier(const Eigen::MatrixXd& C, double gamma);

// Triangular PN multiplier [[psi11, 0], [psi21, psi22]] with
// M = diag(gamma^2 I_{r1}, -I_{r2}); psi11 acts on u, psi21 on u, psi22 on y.
MultiplierFactorization pn_multiplier(const lti::StateSpaceModel& psi11,
                                      const lti::StateSpaceModel& psi21,
                                      const lti::StateSpaceModel& psi22,
                                      double gamma);

// Assemble the 2x2 block filter [[psi11, psi12], [psi21, psi22]] acting on
// stacked (u; y) into a single state-space system.
lti::StateSpaceModel assemble_psi(const lti::StateSpaceModel& psi11,
                                  const lti::StateSpaceModel& psi12,
                                  const lti::StateSpaceModel& psi21,
                                  const lti::StateSpaceModel& psi22);

// Output measurement noise description for the relaxed test.
struct NoiseModel {
    enum class Kind { MultiplicativeUniform, AdditiveGaussian };
    Kind kind = Kind::MultiplicativeUniform;
    double level = 0.0;        // epsilon-bar (uniform) or sigma (gaussian)
    int samples = 10;          // K, number of sampled noise instances
    std::uint64_t seed = 0;
    void validate() const;
};

// One seeded noise draw applied to the outputs; instance i seeds its own
// generator from (seed, instance) through std::seed_seq, so draws are
// deterministic and independent of evaluation order.
Eigen::MatrixXd perturb_outputs(const Eigen::MatrixXd& y, const NoiseModel& noise,
                                int instance);

// Restricted data matrices of one measured trajectory: Hankel matrices of
// the stacked signal, the kernel basis V encoding a zero prefix of nu
// samples, and the restricted images used by the verification test and the
// optimization programs.
struct DataMatrixSet {
    Eigen::Index m = 0, p = 0, L = 0, nu = 0, N = 0;

    Eigen::MatrixXd Hw;  // (m+p)L x (N-L+1), rows interleaved per sample
    Eigen::MatrixXd Hu;  // mL x (N-L+1), u rows only
    Eigen::MatrixXd Hy;  // pL x (N-L+1), y rows only

    // Kernel basis of the first nu stacked samples, orthonormal columns,
    // column-reduced so that col(HuV, HyV) has full column rank.
    Eigen::MatrixXd V;                 // (N-L+1) x q
    Eigen::MatrixXd Vraw;              // (N-L+1) x raw_kernel_dim, unreduced
    Eigen::Index raw_kernel_dim = 0;

    Eigen::MatrixXd HwV;  // (m+p)L x q
    Eigen::MatrixXd HuV;  // mL x q
    Eigen::MatrixXd HyV;  // pL x q

    // Cached Gram matrices of the restricted images; static multipliers
    // whose weights are scalar multiples of identity blocks reduce to
    // combinations of these, which makes bisection sweeps cheap.
    Eigen::MatrixXd Guu;  // HuV' HuV
    Eigen::MatrixXd Gyy;  // HyV' HyV
    Eigen::MatrixXd Guy;  // HuV' HyV

    bool pe_ok = false;     // persistency of excitation of u at order L
    double pe_margin = 0;   // sigma_{mL}(H_L(u)) diagnostic

    Eigen::Index reduced_size() const { return V.cols(); }
};

DataMatrixSet build_data_matrices(const lti::Trajectory& traj, int L, int nu);

struct VerificationReport {
    bool decision = false;
    double min_eigenvalue = 0.0;
    double threshold = 0.0;   // 0 for the exact test, delta for the relaxed one
    double abs_tol = 0.0;     // psd_tol * (1 + |S|_F), the slack actually used
    Eigen::Index L = 0, nu = 0;
    bool pe_ok = false;
    Eigen::Index dim = 0;     // size of the tested matrix
};

// The data-based test: S = V' Hw' T_L(Psi)' (I_L x M) T_L(Psi) Hw V and
// decision = (lambda_min(S) >= -psd_tol * (1 + |S|_F)).  A true decision on
// input data persistently exciting of order L+n certifies the (L-nu)-IQC;
// a false decision refutes it whenever nu >= n, even without excitation.
VerificationReport verify_l_iqc(const DataMatrixSet& data,
                                const MultiplierFactorization& mult,
                                double psd_tol = 1e-8);

// Same test with threshold delta (from noise_margin_delta) replacing 0.
VerificationReport verify_l_iqc_noisy(const DataMatrixSet& data,
                                      const MultiplierFactorization& mult,
                                      double delta, double psd_tol = 1e-8);

// Exact model-based oracle: the quadratic form of the (horizon)-IQC over
// all free inputs with zero initial condition, checked for positive
// semidefiniteness.  Equivalent to the trajectory definition because the
// single sum at the full horizon dominates all shorter partial sums.
bool model_oracle_l_iqc(const lti::StateSpaceModel& model,
                        const MultiplierFactorization& mult, int horizon,
                        double psd_tol = 1e-8);

// Noise margin: delta = (1/K) sum_i lambda_min(V' (D(w_i) - D(w)) V) where
// D(w) = Hw' T_L(Psi)' (I_L x M) T_L(Psi) Hw, w is the measured trajectory
// and w_i its i-th seeded output perturbation.  Deterministic per seed and
// reported unclamped (either sign).
double noise_margin_delta(const lti::Trajectory& noisy_traj, const NoiseModel& noise,
                          const MultiplierFactorization& mult, int L, int nu);

// --- building blocks shared with the optimization module ---

// R = T_L(psi) * H applied without materializing T_L(psi); H must have
// psi.inputs() * L rows (columns are stacked length-L input windows).
Eigen::MatrixXd apply_toeplitz_filter(const lti::StateSpaceModel& psi,
                                      const Eigen::MatrixXd& H, int L);

// S = R' (I_L x M) R for M-sized row blocks of R, symmetrized.
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& R, const Eigen::MatrixXd& M,
                              int L);

// The tested matrix S itself (the quadratic form of verify_l_iqc);
// exposed for diagnostics and for the optimization module.
Eigen::MatrixXd iqc_test_matrix(const DataMatrixSet& data,
                                const MultiplierFactorization& mult);

}  // namespace ddiqc::iqc
