#include "ddiqc/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <tuple>
#include <utility>

#include "ddiqc/linalg.hpp"

namespace ddiqc::optim {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kBracketCap = 1099511627776.0;  // 2^40
constexpr double kGolden = 0.6180339887498949;

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// Smallest/largest eigenvalues of a symmetric PSD Gram matrix.
std::pair<double, double> sym_extremes(const MatrixXd& G) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (G + G.transpose()),
                                               Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return {ev(0), ev(ev.size() - 1)};
}

void require_full_rank_input_image(const iqc::DataMatrixSet& data, const char* who) {
    auto [lmin, lmax] = sym_extremes(data.Guu);
    const double cut = linalg::rank_tolerance(data.HuV.rows(), data.HuV.cols());
    if (!(lmax > 0.0) || lmin <= cut * cut * lmax)
        throw_degenerate(std::string(who) +
                         ": the restricted input image is rank-deficient, so the "
                         "quantity is unbounded on this data (lambda_min(Guu) = " +
                         fmt(lmin) + ")");
}

}  // namespace

void PnMultiplierClass::validate(Index m, Index p) const {
    psi11.validate();
    if (psi11.inputs() != m)
        throw_argument("PnMultiplierClass: psi11 must act on the " + fmt(double(m)) +
                       " input channels");
    if (psi11.outputs() < 1) throw_argument("PnMultiplierClass: psi11 needs outputs");
    if (!psi11.stable()) throw_argument("PnMultiplierClass: psi11 must be stable");
    if (r2 < 1) throw_argument("PnMultiplierClass: r2 must be >= 1");
    if (psi22_identity) {
        if (r2 != p)
            throw_argument("PnMultiplierClass: psi22 = I requires r2 == p");
        if (!basis22.empty())
            throw_argument("PnMultiplierClass: basis22 must be empty when psi22 = I");
    } else if (basis22.empty()) {
        throw_argument("PnMultiplierClass: a free psi22 needs a nonempty basis");
    }
    for (const auto* basis : {&basis21, &basis22})
        for (const auto& fn : *basis)
            if (fn.power > 0 && !(std::abs(fn.lambda) < 1.0))
                throw_argument("PnMultiplierClass: basis pole at -" + fmt(fn.lambda) +
                               " is not stable");
}

PnMultiplierClass cone_class(Index m, Index p) {
    PnMultiplierClass cls;
    cls.psi11 = lti::static_model(MatrixXd::Identity(m, m));
    cls.basis21 = {lti::BasisFunction{0.0, 0}};
    cls.psi22_identity = true;
    cls.r2 = p;
    return cls;
}

PnMultiplierClass approximation_class(const lti::BasisSet& basis, Index m, Index p) {
    PnMultiplierClass cls = cone_class(m, p);
    cls.basis21 = basis;
    return cls;
}

// ---------------------------------------------------------------------------
// PnProblem: the affine map c -> Z(c) in coordinates whitened by chol(B).

struct PnProblem::Impl {
    Index m = 0, p = 0, r2 = 0, L = 0, q = 0;
    int n21 = 0, n22 = 0;  // basis sizes
    int T = 0;             // packed coefficient count

    MatrixXd Bmat;  // q x q symmetric positive definite
    double b_min = 0.0, b_max = 0.0;
    bool ill = false;
    MatrixXd R;  // upper-triangular whitening factor, B^{-1} = R R'

    MatrixXd Zf, Zf_w;              // fixed part of Z, raw and whitened
    std::vector<MatrixXd> W, W_w;   // per coefficient: L x q channel image
    std::vector<int> row_of;        // per coefficient: target block row in [0, r2)

    // Z(c) with per-sample block rows of height r2; `whitened` selects the
    // R-multiplied representation used by every eigenvalue query.
    MatrixXd assemble(const VectorXd& c, bool whitened) const {
        MatrixXd Z = whitened ? Zf_w : Zf;
        for (int t = 0; t < T; ++t) {
            if (c(t) == 0.0) continue;
            const MatrixXd& src = whitened ? W_w[t] : W[t];
            const int i = row_of[t];
            for (Index l = 0; l < L; ++l) Z.row(l * r2 + i) += c(t) * src.row(l);
        }
        return Z;
    }

    double phi(const VectorXd& c) const {
        const MatrixXd Zw = assemble(c, true);
        MatrixXd S = Zw.transpose() * Zw;
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()),
                                                   Eigen::EigenvaluesOnly);
        return std::max(es.eigenvalues()(q - 1), 0.0);
    }

    struct Spectrum {
        MatrixXd Zw;
        VectorXd lam;  // ascending
        MatrixXd vec;
    };

    Spectrum spectrum(const VectorXd& c) const {
        Spectrum s;
        s.Zw = assemble(c, true);
        MatrixXd S = s.Zw.transpose() * s.Zw;
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()));
        s.lam = es.eigenvalues();
        s.vec = es.eigenvectors();
        return s;
    }

    // d(lambda_i)/dc_t = 2 (Zw v_i)' placed(W_w[t]) v_i for a simple
    // eigenvalue; accumulate over eigenvectors with the given weights.
    VectorXd weighted_gradient(const Spectrum& s, const std::vector<Index>& idx,
                               const VectorXd& weight) const {
        VectorXd g = VectorXd::Zero(T);
        for (std::size_t a = 0; a < idx.size(); ++a) {
            const VectorXd v = s.vec.col(idx[a]);
            const VectorXd zv = s.Zw * v;
            for (int t = 0; t < T; ++t) {
                const VectorXd wv = W_w[t] * v;
                double dot = 0.0;
                for (Index l = 0; l < L; ++l) dot += zv(l * r2 + row_of[t]) * wv(l);
                g(t) += weight(static_cast<Index>(a)) * 2.0 * dot;
            }
        }
        return g;
    }

    // phi and a subgradient averaged over the top eigen-cluster
    // (relative gap < 1e-8), the non-smooth-safe choice.
    std::pair<double, VectorXd> phi_subgradient(const VectorXd& c) const {
        const Spectrum s = spectrum(c);
        const double top = s.lam(q - 1);
        std::vector<Index> idx;
        for (Index i = q - 1; i >= 0; --i) {
            if (top - s.lam(i) <= 1e-8 * std::max(1.0, std::abs(top)))
                idx.push_back(i);
            else
                break;
        }
        VectorXd w = VectorXd::Constant(static_cast<Index>(idx.size()),
                                        1.0 / static_cast<double>(idx.size()));
        return {std::max(top, 0.0), weighted_gradient(s, idx, w)};
    }

    // Log-sum-exp smoothing of the maximum eigenvalue: value only.
    double smooth_value(const VectorXd& c, double mu) const {
        const MatrixXd Zw = assemble(c, true);
        MatrixXd S = Zw.transpose() * Zw;
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()),
                                                   Eigen::EigenvaluesOnly);
        const VectorXd& lam = es.eigenvalues();
        const double top = lam(q - 1);
        double acc = 0.0;
        for (Index i = 0; i < q; ++i) acc += std::exp((lam(i) - top) / mu);
        return top + mu * std::log(acc);
    }

    std::pair<double, VectorXd> smooth_grad(const VectorXd& c, double mu) const {
        const Spectrum s = spectrum(c);
        const double top = s.lam(q - 1);
        VectorXd e(q);
        double acc = 0.0;
        for (Index i = 0; i < q; ++i) {
            e(i) = std::exp((s.lam(i) - top) / mu);
            acc += e(i);
        }
        std::vector<Index> idx;
        std::vector<double> wts;
        for (Index i = 0; i < q; ++i) {
            const double w = e(i) / acc;
            if (w > 1e-16) {
                idx.push_back(i);
                wts.push_back(w);
            }
        }
        VectorXd w = Eigen::Map<const VectorXd>(wts.data(), static_cast<Index>(wts.size()));
        return {top + mu * std::log(acc), weighted_gradient(s, idx, w)};
    }

    // Unconstrained linear least squares min_c ||Z_w(c)||_F, the convex
    // quadratic upper-bound surrogate; exact when the data is representable
    // inside the class, and an excellent deterministic warm start otherwise.
    VectorXd frobenius_start() const {
        MatrixXd G = MatrixXd::Zero(T, T);
        VectorXd rhs = VectorXd::Zero(T);
        // Placed sources with different target rows are orthogonal, so the
        // Gram splits by row_of.
        std::vector<MatrixXd> zf_rows(static_cast<std::size_t>(r2));
        for (int i = 0; i < r2; ++i) {
            MatrixXd Zi(L, q);
            for (Index l = 0; l < L; ++l) Zi.row(l) = Zf_w.row(l * r2 + i);
            zf_rows[static_cast<std::size_t>(i)] = std::move(Zi);
        }
        for (int t = 0; t < T; ++t) {
            rhs(t) = -(W_w[t].cwiseProduct(zf_rows[static_cast<std::size_t>(row_of[t])])).sum();
            for (int s = t; s < T; ++s) {
                if (row_of[s] != row_of[t]) continue;
                G(t, s) = (W_w[t].cwiseProduct(W_w[s])).sum();
                G(s, t) = G(t, s);
            }
        }
        VectorXd c = G.colPivHouseholderQr().solve(rhs);
        if (!c.allFinite()) c.setZero();
        return c;
    }
};

PnProblem::PnProblem(const iqc::DataMatrixSet& data, const PnMultiplierClass& cls)
    : impl_(std::make_unique<Impl>()) {
    cls.validate(data.m, data.p);
    Impl& im = *impl_;
    im.m = data.m;
    im.p = data.p;
    im.r2 = cls.r2;
    im.L = data.L;
    im.q = data.reduced_size();
    im.n21 = static_cast<int>(cls.basis21.size());
    im.n22 = cls.psi22_identity ? 0 : static_cast<int>(cls.basis22.size());

    const MatrixXd T11Hu =
        iqc::apply_toeplitz_filter(cls.psi11, data.HuV, static_cast<int>(data.L));
    im.Bmat = T11Hu.transpose() * T11Hu;
    im.Bmat = (0.5 * (im.Bmat + im.Bmat.transpose())).eval();
    std::tie(im.b_min, im.b_max) = sym_extremes(im.Bmat);
    if (!(im.b_min > 0.0))
        throw_degenerate(
            "optimal_pn_iqc: B = (T(psi11) HuV)'(T(psi11) HuV) is not positive "
            "definite; smallest singular value of T(psi11) HuV = " +
            fmt(std::sqrt(std::max(im.b_min, 0.0))));
    im.ill = im.b_min < 1e-12 * im.b_max;
    Eigen::LLT<MatrixXd> llt(im.Bmat);
    if (llt.info() != Eigen::Success)
        throw_degenerate("optimal_pn_iqc: Cholesky factorization of B failed");
    im.R = llt.matrixU().solve(MatrixXd::Identity(im.q, im.q));

    im.Zf = cls.psi22_identity ? data.HyV : MatrixXd::Zero(im.L * im.r2, im.q);
    im.Zf_w = im.Zf * im.R;

    auto add_images = [&](const lti::BasisSet& basis, const MatrixXd& Hchan,
                          Index nchan) {
        for (const auto& fn : basis) {
            const lti::StateSpaceModel scalar =
                lti::realize_basis_filter({MatrixXd::Ones(1, 1)}, {fn});
            std::vector<MatrixXd> img(static_cast<std::size_t>(nchan));
            for (Index j = 0; j < nchan; ++j) {
                MatrixXd chan(im.L, im.q);
                for (Index l = 0; l < im.L; ++l) chan.row(l) = Hchan.row(l * nchan + j);
                img[static_cast<std::size_t>(j)] =
                    iqc::apply_toeplitz_filter(scalar, chan, static_cast<int>(im.L));
            }
            for (Index j = 0; j < nchan; ++j) {  // column-major packing: j, then i
                for (int i = 0; i < im.r2; ++i) {
                    im.W.push_back(img[static_cast<std::size_t>(j)]);
                    im.W_w.push_back(img[static_cast<std::size_t>(j)] * im.R);
                    im.row_of.push_back(i);
                }
            }
        }
    };
    add_images(cls.basis21, data.HuV, im.m);
    if (!cls.psi22_identity) add_images(cls.basis22, data.HyV, im.p);
    im.T = static_cast<int>(im.W.size());
}

PnProblem::~PnProblem() = default;
PnProblem::PnProblem(PnProblem&&) noexcept = default;
PnProblem& PnProblem::operator=(PnProblem&&) noexcept = default;

int PnProblem::num_coefficients() const { return impl_->T; }

double PnProblem::phi(const VectorXd& c) const {
    if (c.size() != impl_->T)
        throw_argument("PnProblem: expected " + fmt(double(impl_->T)) +
                       " packed coefficients, got " + fmt(double(c.size())));
    return impl_->phi(c);
}

MatrixXd PnProblem::assemble_Z(const VectorXd& c) const {
    if (c.size() != impl_->T) throw_argument("PnProblem: coefficient size mismatch");
    return impl_->assemble(c, false);
}

const MatrixXd& PnProblem::B() const { return impl_->Bmat; }

bool PnProblem::ill_conditioned() const { return impl_->ill; }

double PnProblem::feasibility_residual(const VectorXd& c, double gamma_sq) const {
    const MatrixXd Z = assemble_Z(c);
    const Index nz = Z.rows(), q = Z.cols();
    MatrixXd F(nz + q, nz + q);
    F.topLeftCorner(nz, nz) = MatrixXd::Identity(nz, nz);
    F.topRightCorner(nz, q) = Z;
    F.bottomLeftCorner(q, nz) = Z.transpose();
    F.bottomRightCorner(q, q) = gamma_sq * impl_->Bmat;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (F + F.transpose()),
                                               Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

void PnProblem::unpack(const VectorXd& c, std::vector<MatrixXd>& c21,
                       std::vector<MatrixXd>& c22) const {
    const Impl& im = *impl_;
    if (c.size() != im.T) throw_argument("PnProblem: coefficient size mismatch");
    c21.clear();
    c22.clear();
    Index off = 0;
    for (int k = 0; k < im.n21; ++k) {
        c21.emplace_back(Eigen::Map<const MatrixXd>(c.data() + off, im.r2, im.m));
        off += im.r2 * im.m;
    }
    for (int k = 0; k < im.n22; ++k) {
        c22.emplace_back(Eigen::Map<const MatrixXd>(c.data() + off, im.r2, im.p));
        off += im.r2 * im.p;
    }
}

// ---------------------------------------------------------------------------
// Optimizer internals.

namespace {

// Limited-memory BFGS with Armijo backtracking on the smoothed objective.
// Returns the number of objective evaluations; `c` is updated in place.
int lbfgs_smoothed(const PnProblem::Impl& im, double mu, VectorXd& c, int max_it) {
    const int hist = 8;
    std::deque<std::pair<VectorXd, VectorXd>> sy;  // (step, grad change)
    int evals = 0;

    auto [f, g] = im.smooth_grad(c, mu);
    ++evals;
    for (int it = 0; it < max_it; ++it) {
        if (g.norm() <= 1e-10 * (1.0 + std::abs(f))) break;
        // Two-loop recursion.
        VectorXd d = -g;
        std::vector<double> alpha(sy.size());
        for (std::size_t k = sy.size(); k-- > 0;) {
            const auto& [s, y] = sy[k];
            const double rho = 1.0 / y.dot(s);
            alpha[k] = rho * s.dot(d);
            d -= alpha[k] * y;
        }
        if (!sy.empty()) {
            const auto& [s, y] = sy.back();
            d *= s.dot(y) / y.dot(y);
        }
        for (std::size_t k = 0; k < sy.size(); ++k) {
            const auto& [s, y] = sy[k];
            const double rho = 1.0 / y.dot(s);
            const double beta = rho * y.dot(d);
            d += (alpha[k] - beta) * s;
        }
        double gd = g.dot(d);
        if (!(gd < -1e-14 * d.norm() * g.norm())) {
            d = -g;
            gd = g.dot(d);
            sy.clear();
        }
        // Armijo backtracking.
        double t = 1.0;
        double fnew = 0.0;
        bool ok = false;
        for (int ls = 0; ls < 40; ++ls) {
            fnew = im.smooth_value(c + t * d, mu);
            ++evals;
            if (fnew <= f + 1e-4 * t * gd) {
                ok = true;
                break;
            }
            t *= 0.5;
        }
        if (!ok) break;
        const VectorXd step = t * d;
        c += step;
        auto [f2, g2] = im.smooth_grad(c, mu);
        ++evals;
        const VectorXd ychg = g2 - g;
        if (step.dot(ychg) > 1e-10 * step.norm() * ychg.norm()) {
            sy.emplace_back(step, ychg);
            if (static_cast<int>(sy.size()) > hist) sy.pop_front();
        }
        f = f2;
        g = g2;
    }
    return evals;
}

// Golden-section minimization of the convex section s -> phi(c + s e_t),
// with interval expansion when the minimum sits at the boundary.
std::pair<double, double> golden_coordinate(const PnProblem::Impl& im, const VectorXd& c,
                                            int t, double f_now, int& evals) {
    VectorXd probe = c;
    auto value = [&](double s) {
        probe(t) = c(t) + s;
        ++evals;
        return im.phi(probe);
    };
    double h = 0.25 * (1.0 + std::abs(c(t)));
    for (int expand = 0; expand < 4; ++expand) {
        double a = -h, b = h;
        double x1 = b - kGolden * (b - a), x2 = a + kGolden * (b - a);
        double f1 = value(x1), f2 = value(x2);
        for (int it = 0; it < 40; ++it) {
            if (f1 <= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - kGolden * (b - a);
                f1 = value(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + kGolden * (b - a);
                f2 = value(x2);
            }
        }
        const double s = 0.5 * (a + b);
        const double fs = value(s);
        if (std::abs(s) <= 0.9 * h) {
            if (fs < f_now) return {s, fs};
            return {0.0, f_now};
        }
        h *= 4.0;  // minimum at the boundary: widen and retry
    }
    const double s = 0.0;
    return {s, f_now};
}

}  // namespace

OptimalIqcResult optimal_pn_iqc(const iqc::DataMatrixSet& data,
                                const PnMultiplierClass& cls,
                                const OptimOptions& opts) {
    if (!(opts.opt_tol > 0.0) || !(opts.feas_tol > 0.0))
        throw_argument("optimal_pn_iqc: tolerances must be positive");
    if (opts.max_iter < 0) throw_argument("optimal_pn_iqc: max_iter must be >= 0");
    PnProblem P(data, cls);
    const PnProblem::Impl& im = P.impl();
    const int T = im.T;

    VectorXd c0;
    if (opts.initial.size() != 0) {
        if (opts.initial.size() != T)
            throw_argument("optimal_pn_iqc: initial coefficient vector has size " +
                           fmt(double(opts.initial.size())) + ", expected " +
                           fmt(double(T)));
        c0 = opts.initial;
    } else {
        c0 = VectorXd::Zero(T);
    }

    int evals = 0;
    VectorXd best_c = c0;
    double best_f = im.phi(c0);
    ++evals;
    const double f_origin = best_f;
    bool converged = true;

    const bool optimize = T > 0 && opts.max_iter > 0;
    if (optimize) {
        converged = false;
        // Deterministic least-squares warm start.
        const VectorXd cf = im.frobenius_start();
        const double ff = im.phi(cf);
        ++evals;
        if (ff < best_f) {
            best_f = ff;
            best_c = cf;
        }
        const double tiny = 1e-14 * (1.0 + f_origin);

        if (best_f > tiny) {
            // Phase 1: diminishing-step subgradient descent with
            // eigen-cluster averaging; keeps the best iterate.
            const double alpha0 = 1.0 / (1.0 + 1.0 / im.b_min);
            VectorXd c = best_c;
            int stalled = 0;
            for (int j = 0; j < opts.max_iter; ++j) {
                auto [f, g] = im.phi_subgradient(c);
                ++evals;
                if (f < best_f - 1e-16 * (1.0 + best_f)) {
                    best_f = f;
                    best_c = c;
                    stalled = 0;
                } else if (++stalled > 120) {
                    break;  // the diminishing steps stopped paying off
                }
                const double gn = g.norm();
                if (gn <= 1e-14 * (1.0 + f)) break;
                c -= (alpha0 / std::sqrt(j + 1.0)) * (g / gn);
            }
        }

        if (best_f > tiny) {
            // Phase 2: log-sum-exp smoothing with continuation.
            VectorXd c = best_c;
            double mu = std::max(best_f, 1e-12) / 10.0;
            const double mu_min = std::max(1e-14, 1e-9 * (1.0 + best_f));
            while (mu > mu_min) {
                evals += lbfgs_smoothed(im, mu, c, 60);
                const double f = im.phi(c);
                ++evals;
                if (f < best_f) {
                    best_f = f;
                    best_c = c;
                } else {
                    c = best_c;
                }
                mu *= 0.25;
                if (best_f <= tiny) break;
            }
        }

        // Phase 3: coordinate-wise golden-section polish; its final pass
        // doubles as the stationarity check.
        VectorXd c = best_c;
        double fc = best_f;
        for (int pass = 0; pass < 5; ++pass) {
            const double f_before = fc;
            for (int t = 0; t < T; ++t) {
                auto [step, fnew] = golden_coordinate(im, c, t, fc, evals);
                if (step != 0.0) {
                    c(t) += step;
                    fc = fnew;
                }
            }
            if (fc < best_f) {
                best_f = fc;
                best_c = c;
            }
            if (f_before - fc <= opts.opt_tol * (1.0 + fc)) {
                converged = true;
                break;
            }
        }
        if (best_f <= tiny) converged = true;
    }

    OptimalIqcResult res;
    res.gamma_sq = best_f;
    res.c_packed = best_c;
    P.unpack(best_c, res.c21, res.c22);
    res.iterations = evals;
    res.feasibility_residual = P.feasibility_residual(best_c, best_f);
    res.converged = converged;
    res.b_ill_conditioned = P.ill_conditioned();
    return res;
}

// ---------------------------------------------------------------------------
// Scalar estimates.

double l2_gain_estimate(const iqc::DataMatrixSet& data, double tol, double delta) {
    if (!(tol > 0.0)) throw_argument("l2_gain_estimate: tol must be positive");
    if (!std::isfinite(delta)) throw_argument("l2_gain_estimate: delta must be finite");
    require_full_rank_input_image(data, "l2_gain_estimate");

    const Index q = data.reduced_size();
    MatrixXd A = data.Gyy + delta * MatrixXd::Identity(q, q);
    const double lam = linalg::gen_eig_max(A, data.Guu).value;
    const double g_eig = std::sqrt(std::max(lam, 0.0));

    // Independent cross-check: bisection on the verification test with no
    // eigenvalue slack, so both computations decide the same boundary.
    auto feasible = [&](double g) {
        return iqc::verify_l_iqc_noisy(
                   data, iqc::gain_multiplier(data.m, data.p, g), delta, 0.0)
            .decision;
    };
    double hi = 1.0;
    while (!feasible(hi)) {
        hi *= 2.0;
        if (hi > kBracketCap)
            throw_unbounded("l2_gain_estimate: no certified gain below 2^40");
    }
    double lo = 0.0;
    while (hi - lo > tol * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
    }
    if (std::abs(hi - g_eig) > 2.0 * tol * std::max(1.0, g_eig))
        throw_numeric("l2_gain_estimate: eigenvalue estimate " + fmt(g_eig) +
                      " and bisection estimate " + fmt(hi) +
                      " disagree beyond 2*tol");
    return g_eig;
}

double passivity_index_estimate(const iqc::DataMatrixSet& data, iqc::PassivityKind which,
                                double tol, double delta) {
    if (!(tol > 0.0)) throw_argument("passivity_index_estimate: tol must be positive");
    if (!std::isfinite(delta))
        throw_argument("passivity_index_estimate: delta must be finite");
    if (data.m != data.p)
        throw_argument("passivity_index_estimate: requires m == p channels");
    require_full_rank_input_image(data, "passivity_index_estimate");

    auto feasible = [&](double rho) {
        return iqc::verify_l_iqc_noisy(
                   data, iqc::passivity_multiplier(data.m, which, rho), delta, 0.0)
            .decision;
    };

    double lo = -1.0, hi = 1.0;
    if (feasible(lo)) {
        hi = lo;
        lo = -2.0;
        while (feasible(lo)) {
            hi = lo;
            lo *= 2.0;
            if (-lo > kBracketCap)
                throw_unbounded(
                    "passivity_index_estimate: index unbounded below (every rho "
                    "above -2^40 is feasible on this data)");
        }
    } else {
        while (!feasible(hi)) {
            lo = hi;
            hi *= 2.0;
            if (hi > kBracketCap)
                throw_unbounded(
                    "passivity_index_estimate: no feasible rho below 2^40");
        }
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
    }
    return hi;
}

ConeResult tightest_cone(const iqc::DataMatrixSet& data, const OptimOptions& opts) {
    OptimalIqcResult res = optimal_pn_iqc(data, cone_class(data.m, data.p), opts);
    ConeResult out;
    out.C = -res.c21.at(0);  // Psi21 = -C by the cone factorization
    out.gamma = std::sqrt(std::max(res.gamma_sq, 0.0));
    out.detail = std::move(res);
    return out;
}

ApproximationResult loworder_approximation(const iqc::DataMatrixSet& data,
                                           const lti::BasisSet& basis,
                                           const OptimOptions& opts) {
    if (basis.empty())
        throw_argument("loworder_approximation: the basis must be nonempty");
    OptimalIqcResult res =
        optimal_pn_iqc(data, approximation_class(basis, data.m, data.p), opts);
    ApproximationResult out;
    out.coefficients.reserve(res.c21.size());
    // Psi21 = -G_lo: the filtered residual is y - G_lo u.
    for (const auto& ck : res.c21) out.coefficients.push_back(-ck);
    out.model = lti::realize_basis_filter(out.coefficients, basis);
    out.gamma = std::sqrt(std::max(res.gamma_sq, 0.0));
    out.detail = std::move(res);
    return out;
}

}  // namespace ddiqc::optim
