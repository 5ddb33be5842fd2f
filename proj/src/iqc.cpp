#include "ddiqc/iqc.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <optional>
#include <random>

#include "ddiqc/errors.hpp"
#include "ddiqc/linalg.hpp"

namespace ddiqc::iqc {

namespace {

bool is_scalar_multiple(const Eigen::MatrixXd& X, double& factor) {
    if (X.rows() != X.cols()) return false;
    factor = X(0, 0);
    const double scale = 1.0 + X.cwiseAbs().maxCoeff();
    Eigen::MatrixXd dev = X - factor * Eigen::MatrixXd::Identity(X.rows(), X.cols());
    return dev.cwiseAbs().maxCoeff() <= 1e-13 * scale;
}

// Static multipliers whose weight W = D'MD has identity-multiple blocks
// reduce the test matrix to a combination of the cached Grams:
//   S = alpha Guu + zeta Gyy + beta (Guy + Guy').
struct ScalarWeights {
    double alpha = 0.0, beta = 0.0, zeta = 0.0;
};

std::optional<ScalarWeights> detect_static_scalar(const MultiplierFactorization& mult) {
    if (mult.psi.order() != 0) return std::nullopt;
    const Eigen::Index m = mult.m, p = mult.p;
    const Eigen::MatrixXd W = mult.psi.D.transpose() * mult.M * mult.psi.D;
    ScalarWeights sw;
    if (!is_scalar_multiple(W.topLeftCorner(m, m), sw.alpha)) return std::nullopt;
    if (!is_scalar_multiple(W.bottomRightCorner(p, p), sw.zeta)) return std::nullopt;
    const Eigen::MatrixXd Wuy = W.topRightCorner(m, p);
    const double wscale = 1.0 + W.cwiseAbs().maxCoeff();
    if (Wuy.cwiseAbs().maxCoeff() <= 1e-13 * wscale) {
        sw.beta = 0.0;
    } else if (m == p && is_scalar_multiple(Wuy, sw.beta)) {
        // keep sw.beta
    } else {
        return std::nullopt;
    }
    return sw;
}

Eigen::MatrixXd scalar_weight_matrix(const ScalarWeights& sw, const Eigen::MatrixXd& Guu,
                                     const Eigen::MatrixXd& Gyy,
                                     const Eigen::MatrixXd& Guy) {
    Eigen::MatrixXd S = sw.alpha * Guu + sw.zeta * Gyy;
    if (sw.beta != 0.0) S += sw.beta * (Guy + Guy.transpose());
    return 0.5 * (S + S.transpose());
}

Eigen::MatrixXd general_test_matrix(const MultiplierFactorization& mult,
                                    const Eigen::MatrixXd& HwV, int L) {
    Eigen::MatrixXd R = apply_toeplitz_filter(mult.psi, HwV, L);
    return weighted_gram(R, mult.M, L);
}

VerificationReport run_test(const DataMatrixSet& data, const MultiplierFactorization& mult,
                            double threshold, double psd_tol) {
    if (psd_tol < 0.0) throw_argument("verify_l_iqc: psd_tol must be >= 0");
    if (!std::isfinite(threshold)) throw_argument("verify_l_iqc: threshold must be finite");
    mult.validate();
    if (mult.m != data.m || mult.p != data.p)
        throw_argument("verify_l_iqc: multiplier channel counts do not match the data");

    const Eigen::MatrixXd S = iqc_test_matrix(data, mult);
    VerificationReport rep;
    rep.min_eigenvalue = linalg::min_eigenpair_sym(S).value;
    rep.threshold = threshold;
    rep.abs_tol = psd_tol * (1.0 + S.norm());
    rep.decision = rep.min_eigenvalue >= threshold - rep.abs_tol;
    rep.L = data.L;
    rep.nu = data.nu;
    rep.pe_ok = data.pe_ok;
    rep.dim = S.rows();
    return rep;
}

}  // namespace

void MultiplierFactorization::validate() const {
    psi.validate();
    if (m < 1 || p < 1)
        throw_argument("MultiplierFactorization: channel counts must be >= 1");
    if (psi.inputs() != m + p)
        throw_argument("MultiplierFactorization: psi must accept the stacked (u; y) signal");
    if (M.rows() != M.cols() || M.rows() != psi.outputs())
        throw_argument("MultiplierFactorization: M must be square of the filtered size");
    linalg::ensure_finite(M, "MultiplierFactorization: M");
    const double scale = 1.0 + M.cwiseAbs().maxCoeff();
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw_argument("MultiplierFactorization: M must be symmetric within 1e-12");
    if (!psi.stable())
        throw_premise("MultiplierFactorization: psi must be stable");
}

MultiplierFactorization gain_multiplier(Eigen::Index m, Eigen::Index p, double gamma) {
    if (m < 1 || p < 1) throw_argument("gain_multiplier: need m >= 1 and p >= 1");
    if (!(gamma >= 0.0)) throw_argument("gain_multiplier: gamma must be >= 0");
    MultiplierFactorization mult;
    mult.m = m;
    mult.p = p;
    mult.psi = lti::static_model(Eigen::MatrixXd::Identity(m + p, m + p));
    mult.M = Eigen::MatrixXd::Zero(m + p, m + p);
    mult.M.topLeftCorner(m, m) = gamma * gamma * Eigen::MatrixXd::Identity(m, m);
    mult.M.bottomRightCorner(p, p) = -Eigen::MatrixXd::Identity(p, p);
    return mult;
}

MultiplierFactorization passivity_multiplier(Eigen::Index m, PassivityKind kind,
                                             double rho) {
    if (m < 1) throw_argument("passivity_multiplier: need m >= 1");
    if (!std::isfinite(rho)) throw_argument("passivity_multiplier: rho must be finite");
    MultiplierFactorization mult;
    mult.m = m;
    mult.p = m;
    mult.psi = lti::static_model(Eigen::MatrixXd::Identity(2 * m, 2 * m));
    mult.M = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    mult.M.topRightCorner(m, m) = 0.5 * Eigen::MatrixXd::Identity(m, m);
    mult.M.bottomLeftCorner(m, m) = 0.5 * Eigen::MatrixXd::Identity(m, m);
    if (kind == PassivityKind::Input) {
        mult.M.topLeftCorner(m, m) = rho * Eigen::MatrixXd::Identity(m, m);
    } else {
        mult.M.bottomRightCorner(m, m) = rho * Eigen::MatrixXd::Identity(m, m);
    }
    return mult;
}

MultiplierFactorization cone_multiplier(const Eigen::MatrixXd& C, double gamma) {
    const Eigen::Index p = C.rows();
    const Eigen::Index m = C.cols();
    if (m < 1 || p < 1) throw_argument("cone_multiplier: C must be nonempty");
    linalg::ensure_finite(C, "cone_multiplier: C");
    if (!(gamma >= 0.0)) throw_argument("cone_multiplier: gamma must be >= 0");
    MultiplierFactorization mult;
    mult.m = m;
    mult.p = p;
    Eigen::MatrixXd D = Eigen::MatrixXd::Identity(m + p, m + p);
    D.bottomLeftCorner(p, m) = -C;
    mult.psi = lti::static_model(D);
    mult.M = Eigen::MatrixXd::Zero(m + p, m + p);
    mult.M.topLeftCorner(m, m) = gamma * gamma * Eigen::MatrixXd::Identity(m, m);
    mult.M.bottomRightCorner(p, p) = -Eigen::MatrixXd::Identity(p, p);
    return mult;
}

lti::StateSpaceModel assemble_psi(const lti::StateSpaceModel& psi11,
                                  const lti::StateSpaceModel& psi12,
                                  const lti::StateSpaceModel& psi21,
                                  const lti::StateSpaceModel& psi22) {
    psi11.validate();
    psi12.validate();
    psi21.validate();
    psi22.validate();
    const Eigen::Index m = psi11.inputs();
    const Eigen::Index p = psi12.inputs();
    const Eigen::Index r1 = psi11.outputs();
    const Eigen::Index r2 = psi21.outputs();
    if (psi21.inputs() != m || psi22.inputs() != p)
        throw_argument("assemble_psi: column blocks must share input dimensions");
    if (psi12.outputs() != r1 || psi22.outputs() != r2)
        throw_argument("assemble_psi: row blocks must share output dimensions");

    const lti::StateSpaceModel* blocks[4] = {&psi11, &psi12, &psi21, &psi22};
    Eigen::Index n = 0;
    Eigen::Index offset[4];
    for (int b = 0; b < 4; ++b) {
        offset[b] = n;
        n += blocks[b]->order();
    }
    lti::StateSpaceModel g;
    g.A = Eigen::MatrixXd::Zero(n, n);
    g.B = Eigen::MatrixXd::Zero(n, m + p);
    g.C = Eigen::MatrixXd::Zero(r1 + r2, n);
    g.D = Eigen::MatrixXd::Zero(r1 + r2, m + p);
    for (int b = 0; b < 4; ++b) {
        const auto& blk = *blocks[b];
        const Eigen::Index nb = blk.order();
        const Eigen::Index in_col = (b % 2 == 0) ? 0 : m;   // left blocks read u
        const Eigen::Index in_w = (b % 2 == 0) ? m : p;
        const Eigen::Index out_row = (b < 2) ? 0 : r1;      // top blocks feed row 1
        const Eigen::Index out_h = (b < 2) ? r1 : r2;
        g.A.block(offset[b], offset[b], nb, nb) = blk.A;
        g.B.block(offset[b], in_col, nb, in_w) = blk.B;
        g.C.block(out_row, offset[b], out_h, nb) = blk.C;
        g.D.block(out_row, in_col, out_h, in_w) += blk.D;
    }
    return g;
}

MultiplierFactorization pn_multiplier(const lti::StateSpaceModel& psi11,
                                      const lti::StateSpaceModel& psi21,
                                      const lti::StateSpaceModel& psi22,
                                      double gamma) {
    if (!(gamma >= 0.0)) throw_argument("pn_multiplier: gamma must be >= 0");
    const Eigen::Index m = psi11.inputs();
    const Eigen::Index p = psi22.inputs();
    const Eigen::Index r1 = psi11.outputs();
    const Eigen::Index r2 = psi21.outputs();
    auto zero12 = lti::static_model(Eigen::MatrixXd::Zero(r1, p));
    MultiplierFactorization mult;
    mult.m = m;
    mult.p = p;
    mult.psi = assemble_psi(psi11, zero12, psi21, psi22);
    mult.M = Eigen::MatrixXd::Zero(r1 + r2, r1 + r2);
    mult.M.topLeftCorner(r1, r1) = gamma * gamma * Eigen::MatrixXd::Identity(r1, r1);
    mult.M.bottomRightCorner(r2, r2) = -Eigen::MatrixXd::Identity(r2, r2);
    return mult;
}

void NoiseModel::validate() const {
    if (!(level >= 0.0)) throw_argument("NoiseModel: noise level must be >= 0");
    if (samples < 1) throw_argument("NoiseModel: sample count K must be >= 1");
}

Eigen::MatrixXd perturb_outputs(const Eigen::MatrixXd& y, const NoiseModel& noise,
                                int instance) {
    noise.validate();
    if (instance < 0) throw_argument("perturb_outputs: instance must be >= 0");
    // Mix seed and instance through seed_seq so nearby seeds yield unrelated
    // streams (a plain XOR would only permute neighbouring seeds).
    std::seed_seq mix{static_cast<std::uint32_t>(noise.seed),
                      static_cast<std::uint32_t>(noise.seed >> 32),
                      static_cast<std::uint32_t>(instance)};
    std::mt19937_64 rng(mix);
    Eigen::MatrixXd out = y;
    if (noise.kind == NoiseModel::Kind::MultiplicativeUniform) {
        std::uniform_real_distribution<double> unif(-noise.level, noise.level);
        for (Eigen::Index k = 0; k < y.rows(); ++k)
            for (Eigen::Index c = 0; c < y.cols(); ++c) out(k, c) *= 1.0 + unif(rng);
    } else {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index k = 0; k < y.rows(); ++k)
            for (Eigen::Index c = 0; c < y.cols(); ++c)
                out(k, c) += noise.level * normal(rng);
    }
    return out;
}

DataMatrixSet build_data_matrices(const lti::Trajectory& traj, int L, int nu) {
    traj.validate();
    const Eigen::Index N = traj.length();
    const Eigen::Index m = traj.inputs();
    const Eigen::Index p = traj.outputs();
    if (L < 1) throw_argument("build_data_matrices: L must be >= 1");
    if (nu < 0 || nu >= L) throw_argument("build_data_matrices: need 0 <= nu < L");
    if (L > N) throw_argument("build_data_matrices: horizon L exceeds the data length");

    DataMatrixSet d;
    d.m = m;
    d.p = p;
    d.L = L;
    d.nu = nu;
    d.N = N;

    Eigen::MatrixXd w(N, m + p);
    w.leftCols(m) = traj.u;
    w.rightCols(p) = traj.y;
    d.Hw = linalg::hankel_matrix(w, L);
    d.Hu = linalg::hankel_matrix(traj.u, L);
    d.Hy = linalg::hankel_matrix(traj.y, L);

    // Persistency-of-excitation diagnostic at order L from one decomposition.
    {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(d.Hu);
        const auto& sv = svd.singularValues();
        const Eigen::Index want = m * L;
        if (N >= (m + 1) * L - 1 && sv.size() >= want) {
            const double tol = linalg::rank_tolerance(d.Hu.rows(), d.Hu.cols());
            d.pe_margin = sv(want - 1);
            d.pe_ok = d.pe_margin > tol * sv(0);
        } else {
            d.pe_margin = 0.0;
            d.pe_ok = false;
        }
    }

    // Kernel of the first nu stacked samples (the zero-prefix constraint).
    const Eigen::MatrixXd Vt = d.Hw.topRows((m + p) * nu);
    auto kb = linalg::kernel_basis(Vt);
    d.Vraw = kb.basis;
    d.raw_kernel_dim = kb.basis.cols();
    if (d.raw_kernel_dim == 0)
        throw_degenerate(
            "build_data_matrices: the data span contains no trajectory with a zero "
            "nu-sample prefix (kernel is empty)");

    // Column reduction: drop kernel directions that the Hankel matrix maps
    // to zero, so that the restricted images have full column rank.  When
    // the image already has full column rank, V is the raw kernel basis
    // unchanged; eigenvalues removed by the reduction are exact zeros of
    // the test matrix, so the semidefiniteness decision is preserved.
    Eigen::MatrixXd HwVraw = d.Hw * d.Vraw;
    {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(HwVraw, Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        const double smax = sv.size() > 0 ? sv(0) : 0.0;
        const double tol = linalg::rank_tolerance(HwVraw.rows(), HwVraw.cols());
        Eigen::Index rank = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > tol * smax) ++rank;
        if (rank == 0)
            throw_degenerate(
                "build_data_matrices: the restricted data span is zero (all kernel "
                "directions are annihilated by the Hankel matrix)");
        if (rank == HwVraw.cols()) {
            d.V = d.Vraw;
            d.HwV = std::move(HwVraw);
        } else {
            const Eigen::MatrixXd X = svd.matrixV().leftCols(rank);
            d.V = d.Vraw * X;
            d.HwV = HwVraw * X;
        }
    }

    // Split the interleaved rows of HwV into the u and y images so the two
    // orderings are consistent by construction.
    const Eigen::Index q = d.V.cols();
    d.HuV.resize(m * L, q);
    d.HyV.resize(p * L, q);
    for (Eigen::Index i = 0; i < L; ++i) {
        d.HuV.middleRows(i * m, m) = d.HwV.middleRows(i * (m + p), m);
        d.HyV.middleRows(i * p, p) = d.HwV.middleRows(i * (m + p) + m, p);
    }

    d.Guu = d.HuV.transpose() * d.HuV;
    d.Gyy = d.HyV.transpose() * d.HyV;
    d.Guy = d.HuV.transpose() * d.HyV;
    d.Guu = 0.5 * (d.Guu + d.Guu.transpose()).eval();
    d.Gyy = 0.5 * (d.Gyy + d.Gyy.transpose()).eval();
    return d;
}

Eigen::MatrixXd apply_toeplitz_filter(const lti::StateSpaceModel& psi,
                                      const Eigen::MatrixXd& H, int L) {
    if (L < 1) throw_argument("apply_toeplitz_filter: L must be >= 1");
    const Eigen::Index nin = psi.inputs();
    const Eigen::Index nout = psi.outputs();
    if (H.rows() != nin * L)
        throw_argument("apply_toeplitz_filter: H must have psi-input-times-L rows");
    Eigen::MatrixXd R(nout * L, H.cols());
    if (psi.order() == 0) {
        for (Eigen::Index i = 0; i < L; ++i)
            R.middleRows(i * nout, nout) = psi.D * H.middleRows(i * nin, nin);
        return R;
    }
    // Columns are stacked length-L input windows; run the filter's exact
    // state recursion down each column (zero initial condition).
    const Eigen::Index n = psi.order();
    Eigen::VectorXd x(n), uk(nin);
    for (Eigen::Index c = 0; c < H.cols(); ++c) {
        x.setZero();
        for (Eigen::Index k = 0; k < L; ++k) {
            uk = H.col(c).segment(k * nin, nin);
            R.col(c).segment(k * nout, nout) = psi.C * x + psi.D * uk;
            x = psi.A * x + psi.B * uk;
        }
    }
    return R;
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& R, const Eigen::MatrixXd& M,
                              int L) {
    const Eigen::Index nr = M.rows();
    if (M.cols() != nr) throw_argument("weighted_gram: M must be square");
    if (R.rows() != nr * L)
        throw_argument("weighted_gram: R must have M-size-times-L rows");
    Eigen::MatrixXd MR(R.rows(), R.cols());
    for (Eigen::Index i = 0; i < L; ++i)
        MR.middleRows(i * nr, nr) = M * R.middleRows(i * nr, nr);
    Eigen::MatrixXd S = R.transpose() * MR;
    return 0.5 * (S + S.transpose());
}

Eigen::MatrixXd iqc_test_matrix(const DataMatrixSet& data,
                                const MultiplierFactorization& mult) {
    mult.validate();
    if (mult.m != data.m || mult.p != data.p)
        throw_argument("iqc_test_matrix: multiplier channel counts do not match the data");
    if (auto sw = detect_static_scalar(mult))
        return scalar_weight_matrix(*sw, data.Guu, data.Gyy, data.Guy);
    return general_test_matrix(mult, data.HwV, static_cast<int>(data.L));
}

VerificationReport verify_l_iqc(const DataMatrixSet& data,
                                const MultiplierFactorization& mult, double psd_tol) {
    return run_test(data, mult, 0.0, psd_tol);
}

VerificationReport verify_l_iqc_noisy(const DataMatrixSet& data,
                                      const MultiplierFactorization& mult,
                                      double delta, double psd_tol) {
    return run_test(data, mult, delta, psd_tol);
}

bool model_oracle_l_iqc(const lti::StateSpaceModel& model,
                        const MultiplierFactorization& mult, int horizon,
                        double psd_tol) {
    mult.validate();
    model.validate();
    if (horizon < 1) throw_argument("model_oracle_l_iqc: horizon must be >= 1");
    if (psd_tol < 0.0) throw_argument("model_oracle_l_iqc: psd_tol must be >= 0");
    if (model.inputs() != mult.m || model.outputs() != mult.p)
        throw_argument("model_oracle_l_iqc: model dimensions do not match the multiplier");
    const Eigen::Index m = mult.m;
    const Eigen::Index p = mult.p;
    const int h = horizon;

    // Map from stacked free inputs to the interleaved trajectory window
    // (u; y) with zero initial condition: F = col-permuted (I, T_h(G)).
    const Eigen::MatrixXd Tg =
        linalg::block_toeplitz(lti::impulse_response(model, h), h);
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero((m + p) * h, m * h);
    for (int i = 0; i < h; ++i) {
        for (Eigen::Index c = 0; c < m; ++c) F(i * (m + p) + c, i * m + c) = 1.0;
        F.middleRows(i * (m + p) + m, p) = Tg.middleRows(i * p, p);
    }
    const Eigen::MatrixXd R = apply_toeplitz_filter(mult.psi, F, h);
    const Eigen::MatrixXd S = weighted_gram(R, mult.M, h);
    const double lambda = linalg::min_eigenpair_sym(S).value;
    return lambda >= -psd_tol * (1.0 + S.norm());
}

double noise_margin_delta(const lti::Trajectory& noisy_traj, const NoiseModel& noise,
                          const MultiplierFactorization& mult, int L, int nu) {
    noise.validate();
    mult.validate();
    const DataMatrixSet data = build_data_matrices(noisy_traj, L, nu);
    if (mult.m != data.m || mult.p != data.p)
        throw_argument("noise_margin_delta: multiplier channel counts do not match the data");
    // A zero noise level reproduces the measured outputs exactly, so the
    // averaged eigenvalue shift is zero by definition.
    if (noise.level == 0.0) return 0.0;

    const auto sw = detect_static_scalar(mult);
    const Eigen::MatrixXd S0 =
        sw ? scalar_weight_matrix(*sw, data.Guu, data.Gyy, data.Guy)
           : general_test_matrix(mult, data.HwV, L);

    double delta = 0.0;
    for (int i = 0; i < noise.samples; ++i) {
        const Eigen::MatrixXd yi = perturb_outputs(noisy_traj.y, noise, i);
        Eigen::MatrixXd Si;
        if (sw) {
            const Eigen::MatrixXd HyVi = linalg::hankel_matrix(yi, L) * data.V;
            const Eigen::MatrixXd Gyyi = HyVi.transpose() * HyVi;
            const Eigen::MatrixXd Guyi = data.HuV.transpose() * HyVi;
            Si = scalar_weight_matrix(*sw, data.Guu, Gyyi, Guyi);
        } else {
            Eigen::MatrixXd wi(data.N, data.m + data.p);
            wi.leftCols(data.m) = noisy_traj.u;
            wi.rightCols(data.p) = yi;
            const Eigen::MatrixXd HwVi = linalg::hankel_matrix(wi, L) * data.V;
            Si = general_test_matrix(mult, HwVi, L);
        }
        delta += linalg::min_eigenpair_sym(Si - S0).value;
    }
    return delta / noise.samples;
}

}  // namespace ddiqc::iqc
