#include "ddiqc/horizon.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "ddiqc/linalg.hpp"

namespace ddiqc::horizon {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

void PsiBlocks::validate() const {
    psi11.validate();
    psi12.validate();
    psi21.validate();
    psi22.validate();
    if (psi11.outputs() != psi12.outputs())
        throw_argument("PsiBlocks: psi11 and psi12 must share their output count");
    if (psi21.outputs() != psi22.outputs())
        throw_argument("PsiBlocks: psi21 and psi22 must share their output count");
    if (psi11.inputs() != psi21.inputs())
        throw_argument("PsiBlocks: psi11 and psi21 must share the input channel count");
    if (psi12.inputs() != psi22.inputs())
        throw_argument("PsiBlocks: psi12 and psi22 must share the output channel count");
}

PsiBlocks conic_psi(const MatrixXd& C) {
    PsiBlocks psi;
    const Eigen::Index p = C.rows(), m = C.cols();
    psi.psi11 = lti::static_model(MatrixXd::Identity(m, m));
    psi.psi12 = lti::static_model(MatrixXd::Zero(m, p));
    psi.psi21 = lti::static_model(-C);
    psi.psi22 = lti::static_model(MatrixXd::Identity(p, p));
    return psi;
}

PsiBlocks output_passivity_psi(double gamma_hat) {
    if (!(gamma_hat > 0.0))
        throw_argument("output_passivity_psi: gamma_hat must be positive");
    PsiBlocks psi;
    psi.psi11 = lti::static_model(MatrixXd::Identity(1, 1));
    psi.psi12 = lti::static_model(MatrixXd::Zero(1, 1));
    psi.psi21 = lti::static_model(gamma_hat * MatrixXd::Identity(1, 1));
    psi.psi22 = lti::static_model(-1.0 / (2.0 * gamma_hat) * MatrixXd::Identity(1, 1));
    return psi;
}

lti::StateSpaceModel transformed_system(const lti::StateSpaceModel& g,
                                        const PsiBlocks& psi) {
    g.validate();
    psi.validate();
    if (psi.psi11.inputs() != g.inputs())
        throw_argument("transformed_system: psi11 must act on the plant input");
    if (psi.psi12.inputs() != g.outputs())
        throw_argument("transformed_system: psi12 must act on the plant output");
    if (psi.psi11.outputs() != psi.psi11.inputs())
        throw_premise("transformed_system: psi11 must be square to be inverted");

    // Stable causal inverse of psi11 (fails on singular feedthrough).
    const lti::StateSpaceModel inv11 = lti::inverse(psi.psi11);
    if (!inv11.stable())
        throw_premise("transformed_system: psi11 has no stable inverse");

    // Small-gain premise for the well-posedness of (Psi11 + Psi12 G)^{-1}.
    const lti::StateSpaceModel loop = lti::series(psi.psi12, lti::series(g, inv11));
    const double loop_norm = lti::hinf_norm_grid(loop);
    if (!(loop_norm < 1.0 - 1e-6))
        throw_premise("transformed_system: small-gain premise violated, "
                      "|Psi12 G Psi11^{-1}|_inf = " +
                      fmt(loop_norm));

    const lti::StateSpaceModel num = lti::add(psi.psi21, lti::series(psi.psi22, g));
    const lti::StateSpaceModel den = lti::add(psi.psi11, lti::series(psi.psi12, g));
    lti::StateSpaceModel out = lti::minreal(lti::series(num, lti::inverse(den)));
    if (!out.stable())
        throw_numeric("transformed_system: the transformed realization is unstable "
                      "despite the small-gain premise");

    // Self-check against the pointwise formula on a coarse grid.
    for (int k = 0; k < 64; ++k) {
        const double w = 3.141592653589793 * k / 63.0;
        const MatrixXcd gw = lti::frequency_response(g, w);
        const MatrixXcd numw = lti::frequency_response(psi.psi21, w) +
                               lti::frequency_response(psi.psi22, w) * gw;
        const MatrixXcd denw = lti::frequency_response(psi.psi11, w) +
                               lti::frequency_response(psi.psi12, w) * gw;
        const MatrixXcd want = numw * denw.inverse();
        const MatrixXcd got = lti::frequency_response(out, w);
        if ((got - want).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + want.cwiseAbs().maxCoeff()))
            throw_numeric("transformed_system: realization disagrees with the "
                          "pointwise formula at frequency " +
                          fmt(w));
    }
    return out;
}

GainBoundCertificate fir_infinite_gain_bound(double gamma_L, int L, int l,
                                             const lti::StateSpaceModel* model) {
    if (!(gamma_L >= 0.0))
        throw_argument("fir_infinite_gain_bound: gamma_L must be >= 0");
    if (l < 1) throw_argument("fir_infinite_gain_bound: FIR length l must be >= 1");
    if (L < 20 * l)
        throw_premise("fir_infinite_gain_bound: the correction needs L >= 20 l "
                      "(got L = " +
                      fmt(L) + ", l = " + fmt(l) + ")");

    GainBoundCertificate cert;
    cert.gamma_L = gamma_L;
    cert.L = L;
    cert.fir_length = l;
    const double shrink = 1.0 - 20.0 * static_cast<double>(l) / static_cast<double>(L);
    cert.gamma_inf = shrink > 0.0 ? gamma_L / shrink
                                  : std::numeric_limits<double>::infinity();
    cert.valid = true;  // the circle premise is an assumption unless checked

    if (model != nullptr) {
        model->validate();
        if (model->inputs() != model->outputs())
            throw_argument("fir_infinite_gain_bound: the determinant premise needs a "
                           "square system");
        double min_mod = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 4096; ++k) {
            const double w = 2.0 * 3.141592653589793 * k / 4096.0;
            min_mod = std::min(
                min_mod, std::abs(lti::frequency_response(*model, w).determinant()));
        }
        cert.det_premise_checked = true;
        cert.det_min_modulus = min_mod;
        if (!(min_mod > 1e-9)) cert.valid = false;
    }
    return cert;
}

NormCurve toeplitz_norm_curve(const lti::StateSpaceModel& model,
                              const std::vector<int>& horizons) {
    model.validate();
    if (!model.stable())
        throw_premise("toeplitz_norm_curve: the model must be stable (spectral "
                      "radius " +
                      fmt(model.spectral_radius()) +
                      "); weight the data exponentially first for unstable systems");
    if (horizons.empty()) throw_argument("toeplitz_norm_curve: no horizons given");
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (horizons[i] < 1)
            throw_argument("toeplitz_norm_curve: horizons must be >= 1");
        if (i > 0 && horizons[i] <= horizons[i - 1])
            throw_argument("toeplitz_norm_curve: horizons must be strictly ascending");
    }

    NormCurve curve;
    curve.hinf = lti::hinf_norm_grid(model);
    curve.points.reserve(horizons.size());
    for (int L : horizons) {
        const auto imp = lti::impulse_response(model, L);
        curve.points.push_back({L, linalg::max_singular_value(
                                       linalg::block_toeplitz(imp, L))});
    }

    // Rate diagnostic: least-squares slope of log(hinf - sigma_L) vs log L
    // over the largest decade of horizons.
    const double l_hi = static_cast<double>(horizons.back());
    std::vector<double> xs, ys;
    for (const auto& pt : curve.points) {
        if (pt.L < l_hi / 10.0) continue;
        const double gap = curve.hinf - pt.sigma;
        if (!(gap > 1e-12 * (1.0 + curve.hinf))) continue;  // converged: no rate left
        xs.push_back(std::log(static_cast<double>(pt.L)));
        ys.push_back(std::log(gap));
    }
    if (xs.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= static_cast<double>(xs.size());
        my /= static_cast<double>(xs.size());
        double sxX = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxX += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        if (sxX > 0.0) {
            curve.slope = sxy / sxX;
            curve.slope_defined = true;
        }
    }
    return curve;
}

}  // namespace ddiqc::horizon
