#include "ddiqc/lti.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "ddiqc/linalg.hpp"

namespace ddiqc::lti {

namespace {

Eigen::Index numerical_rank(const Eigen::MatrixXd& A, double rel_tol = -1.0) {
    if (A.rows() == 0 || A.cols() == 0) return 0;
    const double tol = rel_tol < 0.0 ? linalg::rank_tolerance(A.rows(), A.cols()) : rel_tol;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol * smax) ++rank;
    return rank;
}

}  // namespace

void StateSpaceModel::validate() const {
    const Eigen::Index n = A.rows();
    if (A.cols() != n) throw_argument("StateSpaceModel: A must be square");
    if (B.rows() != n) throw_argument("StateSpaceModel: B row count must equal the state dimension");
    if (C.cols() != n) throw_argument("StateSpaceModel: C column count must equal the state dimension");
    if (D.rows() != C.rows() || D.cols() != B.cols())
        throw_argument("StateSpaceModel: D must be outputs x inputs");
    if (D.rows() < 1 || D.cols() < 1)
        throw_argument("StateSpaceModel: model must have at least one input and one output");
    linalg::ensure_finite(A, "StateSpaceModel: A");
    linalg::ensure_finite(B, "StateSpaceModel: B");
    linalg::ensure_finite(C, "StateSpaceModel: C");
    linalg::ensure_finite(D, "StateSpaceModel: D");
}

double StateSpaceModel::spectral_radius() const {
    if (order() == 0) return 0.0;
    return Eigen::EigenSolver<Eigen::MatrixXd>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

bool StateSpaceModel::stable(double margin) const {
    return spectral_radius() < 1.0 - margin;
}

bool StateSpaceModel::minimal() const {
    const Eigen::Index n = order();
    if (n == 0) return true;
    return numerical_rank(controllability_matrix(*this)) == n &&
           numerical_rank(observability_matrix(*this)) == n;
}

StateSpaceModel static_model(const Eigen::MatrixXd& D) {
    StateSpaceModel g;
    g.A.resize(0, 0);
    g.B.resize(0, D.cols());
    g.C.resize(D.rows(), 0);
    g.D = D;
    g.validate();
    return g;
}

void Trajectory::validate() const {
    if (u.rows() != y.rows()) throw_argument("Trajectory: u and y must have equal length");
    if (u.rows() < 1) throw_argument("Trajectory: length must be >= 1");
    if (u.cols() < 1 || y.cols() < 1)
        throw_argument("Trajectory: input and output dimension must be >= 1");
    linalg::ensure_finite(u, "Trajectory: u");
    linalg::ensure_finite(y, "Trajectory: y");
}

Eigen::MatrixXd simulate(const StateSpaceModel& model, const Eigen::MatrixXd& u,
                         const Eigen::VectorXd& x0) {
    model.validate();
    if (u.cols() != model.inputs())
        throw_argument("simulate: input channel count does not match the model");
    linalg::ensure_finite(u, "simulate: u");
    const Eigen::Index n = model.order();
    Eigen::VectorXd x;
    if (x0.size() == 0) {
        x = Eigen::VectorXd::Zero(n);
    } else if (x0.size() == n) {
        x = x0;
    } else {
        throw_argument("simulate: x0 size does not match the state dimension");
    }
    const Eigen::Index N = u.rows();
    Eigen::MatrixXd y(N, model.outputs());
    for (Eigen::Index k = 0; k < N; ++k) {
        y.row(k) = (model.C * x + model.D * u.row(k).transpose()).transpose();
        if (n > 0) x = model.A * x + model.B * u.row(k).transpose();
    }
    return y;
}

std::vector<Eigen::MatrixXd> impulse_response(const StateSpaceModel& model, int n_terms) {
    model.validate();
    if (n_terms < 1) throw_argument("impulse_response: horizon must be >= 1");
    std::vector<Eigen::MatrixXd> g;
    g.reserve(static_cast<std::size_t>(n_terms));
    g.push_back(model.D);
    if (n_terms == 1) return g;
    // g_k = C A^{k-1} B computed by propagating A^{k-1} B.
    Eigen::MatrixXd AkB = model.B;
    for (int k = 1; k < n_terms; ++k) {
        g.push_back(model.C * AkB);
        if (k + 1 < n_terms) AkB = model.A * AkB;
    }
    return g;
}

bool persistency_order(const Eigen::MatrixXd& u, int order) {
    if (order < 1) throw_argument("persistency_order: order must be >= 1");
    if (u.rows() < 1 || u.cols() < 1) throw_argument("persistency_order: empty input");
    const Eigen::Index N = u.rows();
    const Eigen::Index m = u.cols();
    // rank m*order needs at least m*order columns, i.e. N >= (m+1)*order - 1.
    if (N < (m + 1) * order - 1) return false;
    const Eigen::MatrixXd H = linalg::hankel_matrix(u, order);
    return numerical_rank(H) == m * order;
}

double pe_margin(const Eigen::MatrixXd& u, int order) {
    if (order < 1) throw_argument("pe_margin: order must be >= 1");
    const Eigen::Index N = u.rows();
    const Eigen::Index m = u.cols();
    if (N < (m + 1) * order - 1) return 0.0;
    const Eigen::MatrixXd H = linalg::hankel_matrix(u, order);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(H);
    const auto& sv = svd.singularValues();
    const Eigen::Index want = m * order;
    if (sv.size() < want) return 0.0;
    return sv(want - 1);
}

StateSpaceModel random_stable_system(int n, int m, int p, std::uint64_t seed,
                                     double target_spectral_radius) {
    if (n < 0 || m < 1 || p < 1)
        throw_argument("random_stable_system: need n >= 0, m >= 1, p >= 1");
    if (!(target_spectral_radius > 0.0 && target_spectral_radius < 1.0))
        throw_argument("random_stable_system: target spectral radius must lie in (0, 1)");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd M(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = normal(rng);
        return M;
    };
    for (int attempt = 0; attempt < 100; ++attempt) {
        StateSpaceModel g;
        g.A = draw(n, n);
        if (n > 0) {
            const double radius = g.A.eigenvalues().cwiseAbs().maxCoeff();
            if (radius <= 0.0) continue;  // nilpotent draw; try again
            g.A *= target_spectral_radius / radius;
        }
        g.B = draw(n, m);
        g.C = draw(p, n);
        g.D = draw(p, m);
        if (g.minimal()) return g;
    }
    throw_numeric("random_stable_system: no minimal realization found in 100 attempts");
}

Eigen::MatrixXcd frequency_response(const StateSpaceModel& g, double omega) {
    const std::complex<double> z = std::polar(1.0, omega);
    if (g.order() == 0) return g.D.cast<std::complex<double>>();
    Eigen::MatrixXcd zIA = -g.A.cast<std::complex<double>>();
    zIA.diagonal().array() += z;
    return g.C.cast<std::complex<double>>() * zIA.partialPivLu().solve(g.B.cast<std::complex<double>>()) +
           g.D.cast<std::complex<double>>();
}

namespace {

double response_sigma_max(const StateSpaceModel& g, double omega) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(frequency_response(g, omega));
    return svd.singularValues()(0);
}

}  // namespace

double hinf_norm_grid(const StateSpaceModel& model, int n_grid, double refine_tol) {
    model.validate();
    if (n_grid < 2) throw_argument("hinf_norm_grid: need at least two grid points");
    if (!model.stable())
        throw_premise("hinf_norm_grid: model is not stable (spectral radius >= 1)");
    if (model.order() == 0) return linalg::max_singular_value(model.D);

    const double pi = 3.14159265358979323846;
    double best = -1.0;
    int best_idx = 0;
    std::vector<double> vals(static_cast<std::size_t>(n_grid));
    for (int i = 0; i < n_grid; ++i) {
        const double w = pi * static_cast<double>(i) / static_cast<double>(n_grid - 1);
        vals[static_cast<std::size_t>(i)] = response_sigma_max(model, w);
        if (vals[static_cast<std::size_t>(i)] > best) {
            best = vals[static_cast<std::size_t>(i)];
            best_idx = i;
        }
    }
    // Golden-section refinement on the bracket around the grid argmax.
    const double step = pi / static_cast<double>(n_grid - 1);
    double lo = std::max(0.0, (best_idx - 1) * step);
    double hi = std::min(pi, (best_idx + 1) * step);
    const double gr = 0.6180339887498949;  // (sqrt(5)-1)/2
    double c = hi - gr * (hi - lo);
    double d = lo + gr * (hi - lo);
    double fc = response_sigma_max(model, c);
    double fd = response_sigma_max(model, d);
    while (hi - lo > refine_tol) {
        if (fc > fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - gr * (hi - lo);
            fc = response_sigma_max(model, c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + gr * (hi - lo);
            fd = response_sigma_max(model, d);
        }
    }
    return std::max(best, std::max(fc, fd));
}

BasisSet chain_basis(double lambda, int order) {
    if (order < 0) throw_argument("chain_basis: order must be >= 0");
    BasisSet basis;
    basis.push_back({0.0, 0});
    for (int k = 1; k <= order; ++k) basis.push_back({lambda, k});
    return basis;
}

BasisSet pole_basis(const std::vector<double>& lambdas) {
    BasisSet basis;
    basis.push_back({0.0, 0});
    for (double l : lambdas) basis.push_back({l, 1});
    return basis;
}

Eigen::VectorXd basis_impulse(const BasisFunction& fn, int n_terms) {
    if (n_terms < 1) throw_argument("basis_impulse: horizon must be >= 1");
    if (fn.power < 0) throw_argument("basis_impulse: power must be >= 0");
    Eigen::VectorXd h = Eigen::VectorXd::Zero(n_terms);
    if (fn.power == 0) {
        h(0) = 1.0;
        return h;
    }
    if (std::abs(fn.lambda) >= 1.0)
        throw_argument("basis_impulse: basis pole magnitude must be < 1");
    // (z+lambda)^{-1} has impulse (0, 1, -lambda, lambda^2, ...); higher
    // powers follow by repeated convolution with that sequence.
    Eigen::VectorXd base = Eigen::VectorXd::Zero(n_terms);
    if (n_terms > 1) {
        base(1) = 1.0;
        for (int k = 2; k < n_terms; ++k) base(k) = -fn.lambda * base(k - 1);
    }
    h = base;
    for (int rep = 1; rep < fn.power; ++rep) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(n_terms);
        for (int k = 0; k < n_terms; ++k) {
            double acc = 0.0;
            for (int j = 0; j <= k; ++j) acc += h(j) * base(k - j);
            next(k) = acc;
        }
        h = next;
    }
    return h;
}

StateSpaceModel realize_basis_filter(const std::vector<Eigen::MatrixXd>& coeffs,
                                     const BasisSet& basis) {
    if (coeffs.size() != basis.size())
        throw_argument("realize_basis_filter: one coefficient matrix per basis function required");
    if (coeffs.empty()) throw_argument("realize_basis_filter: empty basis");
    const Eigen::Index rows = coeffs.front().rows();
    const Eigen::Index q = coeffs.front().cols();
    if (rows < 1 || q < 1) throw_argument("realize_basis_filter: empty coefficient matrix");
    for (const auto& c : coeffs) {
        if (c.rows() != rows || c.cols() != q)
            throw_argument("realize_basis_filter: coefficient matrices must share one shape");
        linalg::ensure_finite(c, "realize_basis_filter: coefficient");
    }
    for (const auto& fn : basis) {
        if (fn.power < 0) throw_argument("realize_basis_filter: basis power must be >= 0");
        if (fn.power > 0 && std::abs(fn.lambda) >= 1.0)
            throw_argument("realize_basis_filter: basis pole magnitude must be < 1");
    }

    // Chain length needed per distinct pole.
    std::map<double, int> max_power;
    for (const auto& fn : basis)
        if (fn.power > 0) max_power[fn.lambda] = std::max(max_power[fn.lambda], fn.power);

    Eigen::Index n = 0;
    std::map<double, Eigen::Index> chain_start;
    for (const auto& [lambda, power] : max_power) {
        chain_start[lambda] = n;
        n += static_cast<Eigen::Index>(power) * q;
    }

    StateSpaceModel g;
    g.A = Eigen::MatrixXd::Zero(n, n);
    g.B = Eigen::MatrixXd::Zero(n, q);
    g.C = Eigen::MatrixXd::Zero(rows, n);
    g.D = Eigen::MatrixXd::Zero(rows, q);

    // Each pole lambda contributes the chain x_1' = -lambda x_1 + u,
    // x_j' = -lambda x_j + x_{j-1}; x_j carries (z+lambda)^{-j} u.
    for (const auto& [lambda, power] : max_power) {
        const Eigen::Index s = chain_start[lambda];
        for (int j = 0; j < power; ++j) {
            g.A.block(s + j * q, s + j * q, q, q) =
                -lambda * Eigen::MatrixXd::Identity(q, q);
            if (j > 0)
                g.A.block(s + j * q, s + (j - 1) * q, q, q) = Eigen::MatrixXd::Identity(q, q);
        }
        g.B.block(s, 0, q, q) = Eigen::MatrixXd::Identity(q, q);
    }
    for (std::size_t k = 0; k < basis.size(); ++k) {
        const auto& fn = basis[k];
        if (fn.power == 0) {
            g.D += coeffs[k];
        } else {
            const Eigen::Index s = chain_start[fn.lambda] + (fn.power - 1) * q;
            g.C.middleCols(s, q) += coeffs[k];
        }
    }
    g.validate();
    return g;
}

int observability_lag(const StateSpaceModel& model) {
    model.validate();
    const Eigen::Index n = model.order();
    if (n == 0) return 0;
    for (int l = 1; l <= n; ++l) {
        if (numerical_rank(observability_matrix(model, l)) == n) return l;
    }
    throw_premise("observability_lag: model is not observable");
}

Eigen::MatrixXd exp_weight(const Eigen::MatrixXd& signal, double rho) {
    if (rho <= 0.0) throw_argument("exp_weight: rho must be positive");
    Eigen::MatrixXd out = signal;
    double w = 1.0;
    for (Eigen::Index k = 0; k < out.rows(); ++k) {
        out.row(k) *= w;
        w *= rho;
    }
    return out;
}

StateSpaceModel series(const StateSpaceModel& second, const StateSpaceModel& first) {
    first.validate();
    second.validate();
    if (second.inputs() != first.outputs())
        throw_argument("series: inner dimensions do not match");
    const Eigen::Index n1 = first.order(), n2 = second.order();
    StateSpaceModel g;
    g.A = Eigen::MatrixXd::Zero(n1 + n2, n1 + n2);
    g.A.topLeftCorner(n1, n1) = first.A;
    g.A.bottomLeftCorner(n2, n1) = second.B * first.C;
    g.A.bottomRightCorner(n2, n2) = second.A;
    g.B = Eigen::MatrixXd::Zero(n1 + n2, first.inputs());
    g.B.topRows(n1) = first.B;
    g.B.bottomRows(n2) = second.B * first.D;
    g.C = Eigen::MatrixXd::Zero(second.outputs(), n1 + n2);
    g.C.leftCols(n1) = second.D * first.C;
    g.C.rightCols(n2) = second.C;
    g.D = second.D * first.D;
    return g;
}

StateSpaceModel add(const StateSpaceModel& g1, const StateSpaceModel& g2) {
    g1.validate();
    g2.validate();
    if (g1.inputs() != g2.inputs() || g1.outputs() != g2.outputs())
        throw_argument("add: systems must share input and output dimensions");
    const Eigen::Index n1 = g1.order(), n2 = g2.order();
    StateSpaceModel g;
    g.A = Eigen::MatrixXd::Zero(n1 + n2, n1 + n2);
    g.A.topLeftCorner(n1, n1) = g1.A;
    g.A.bottomRightCorner(n2, n2) = g2.A;
    g.B = Eigen::MatrixXd::Zero(n1 + n2, g1.inputs());
    g.B.topRows(n1) = g1.B;
    g.B.bottomRows(n2) = g2.B;
    g.C = Eigen::MatrixXd::Zero(g1.outputs(), n1 + n2);
    g.C.leftCols(n1) = g1.C;
    g.C.rightCols(n2) = g2.C;
    g.D = g1.D + g2.D;
    return g;
}

StateSpaceModel inverse(const StateSpaceModel& g) {
    g.validate();
    if (g.inputs() != g.outputs())
        throw_premise("inverse: feedthrough must be square to invert the system");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(g.D);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible())
        throw_premise("inverse: feedthrough matrix is numerically singular");
    const Eigen::MatrixXd Dinv = lu.inverse();
    StateSpaceModel out;
    out.A = g.A - g.B * Dinv * g.C;
    out.B = g.B * Dinv;
    out.C = -Dinv * g.C;
    out.D = Dinv;
    return out;
}

StateSpaceModel minreal(const StateSpaceModel& g, double rel_tol) {
    g.validate();
    if (g.order() == 0) return g;

    auto range_basis = [&](const Eigen::MatrixXd& M) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU);
        const auto& sv = svd.singularValues();
        const double smax = sv.size() > 0 ? sv(0) : 0.0;
        Eigen::Index rank = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > rel_tol * smax) ++rank;
        return Eigen::MatrixXd(svd.matrixU().leftCols(rank));
    };

    // Restrict to the reachable subspace, then to the observable one.
    StateSpaceModel r = g;
    {
        const Eigen::MatrixXd Q = range_basis(controllability_matrix(r));
        r.A = Q.transpose() * r.A * Q;
        r.B = Q.transpose() * r.B;
        Eigen::MatrixXd newC = r.C * Q;
        r.C = newC;
    }
    if (r.order() > 0) {
        const Eigen::MatrixXd Q = range_basis(observability_matrix(r).transpose());
        r.A = Q.transpose() * r.A * Q;
        r.B = Q.transpose() * r.B;
        Eigen::MatrixXd newC = r.C * Q;
        r.C = newC;
    }
    return r;
}

Eigen::MatrixXd controllability_matrix(const StateSpaceModel& g) {
    const Eigen::Index n = g.order();
    Eigen::MatrixXd ctrb(n, n * g.inputs());
    Eigen::MatrixXd AkB = g.B;
    for (Eigen::Index k = 0; k < n; ++k) {
        ctrb.middleCols(k * g.inputs(), g.inputs()) = AkB;
        if (k + 1 < n) AkB = g.A * AkB;
    }
    return ctrb;
}

Eigen::MatrixXd observability_matrix(const StateSpaceModel& g, int depth) {
    const Eigen::Index n = g.order();
    const Eigen::Index d = depth < 0 ? n : depth;
    Eigen::MatrixXd obsv(d * g.outputs(), n);
    Eigen::MatrixXd CAk = g.C;
    for (Eigen::Index k = 0; k < d; ++k) {
        obsv.middleRows(k * g.outputs(), g.outputs()) = CAk;
        if (k + 1 < d) CAk = CAk * g.A;
    }
    return obsv;
}

}  // namespace ddiqc::lti
