#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ddiqc/errors.hpp"
#include "ddiqc/lti.hpp"

// Infinite-horizon inference from finite-horizon certificates: the
// loop-transformed system that converts a multiplier property into a plain
// gain bound, the FIR finite-section correction that turns a horizon-L gain
// into an infinite-horizon one, and convergence diagnostics for the
// finite-section Toeplitz norms.

namespace ddiqc::horizon {

// The four blocks of a lower-triangular-free multiplier filter
// Psi = [[Psi11, Psi12], [Psi21, Psi22]] acting on (u; y).
struct PsiBlocks {
    lti::StateSpaceModel psi11;  // r1 x m
    lti::StateSpaceModel psi12;  // r1 x p
    lti::StateSpaceModel psi21;  // r2 x m
    lti::StateSpaceModel psi22;  // r2 x p

    void validate() const;  // consistent channel counts, finite entries
};

// The conic-sector filter [[I, 0], [-C, I]]; transforming by it shifts the
// feedthrough: G_tilde = G - C.
PsiBlocks conic_psi(const Eigen::MatrixXd& C);

// The scalar output-strict-passivity filter [[1, 0], [g, -1/(2g)]];
// transforming by it gives G_tilde = g - G / (2 g). gamma_hat must be > 0.
PsiBlocks output_passivity_psi(double gamma_hat);

// Loop transformation G_tilde = (Psi21 + Psi22 G) (Psi11 + Psi12 G)^{-1}:
// a gain bound on G_tilde expresses the multiplier property of G as a plain
// L2-gain statement. Preconditions: Psi11 square with invertible
// feedthrough and a stable inverse, and the small-gain premise
// ||Psi12 G Psi11^{-1}||_inf < 1 - 1e-6 (ErrorKind::Premise otherwise, the
// message carries the computed norm). The returned realization is reduced
// by exact unreachable/unobservable deflation and is self-checked against
// the pointwise formula on a 64-frequency grid to 1e-8
// (ErrorKind::Numeric on mismatch).
lti::StateSpaceModel transformed_system(const lti::StateSpaceModel& g,
                                        const PsiBlocks& psi);

struct GainBoundCertificate {
    double gamma_L = 0.0;      // finite-horizon gain fed in
    int L = 0;                 // horizon of gamma_L
    int fir_length = 0;        // FIR length l of the (unknown) system
    double gamma_inf = 0.0;    // certified infinite-horizon bound
    bool valid = false;        // L >= 20 l and the invertibility premise holds
    bool det_premise_checked = false;  // a model was supplied and swept
    double det_min_modulus = 0.0;      // min |det G| over the sweep (if checked)
};

// Finite-section correction for FIR systems of length l: from the
// horizon-L gain gamma_L, certify gamma_inf = gamma_L / (1 - 20 l / L) for
// the infinite horizon. Requires L >= 20 l (ErrorKind::Premise below) and
// gamma_L >= 0; at L == 20 l the bound degenerates to infinity. The
// premise det G(z) != 0 on the unit circle cannot be checked from data; it
// is recorded as an assumption unless `model` is supplied, in which case a
// 4096-point determinant modulus sweep (threshold 1e-9) decides the
// validity flag. A supplied model must be square.
GainBoundCertificate fir_infinite_gain_bound(double gamma_L, int L, int l,
                                             const lti::StateSpaceModel* model = nullptr);

struct NormCurvePoint {
    int L = 0;
    double sigma = 0.0;  // sigma_max(T_L(G))
};

struct NormCurve {
    std::vector<NormCurvePoint> points;
    double hinf = 0.0;          // grid H-infinity norm of the model
    double slope = 0.0;         // fitted log-log slope of (hinf - sigma_L)
    bool slope_defined = false; // false when the gap vanishes or < 2 points
};

// Finite-section norms sigma_max(T_L(G)) for the given ascending horizons,
// plus a convergence-rate diagnostic: the least-squares slope of
// log(hinf - sigma_L) against log L over the largest decade of horizons.
// Stable models only (ErrorKind::Premise otherwise; apply
// lti::exp_weight upstream for unstable systems).
NormCurve toeplitz_norm_curve(const lti::StateSpaceModel& model,
                              const std::vector<int>& horizons);

}  // namespace ddiqc::horizon
