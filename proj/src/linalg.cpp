#include "ddiqc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <sstream>

namespace ddiqc::linalg {

void ensure_finite(const Eigen::MatrixXd& M, const char* what) {
    if (!M.allFinite()) {
        std::ostringstream os;
        os << what << " contains NaN or infinite entries";
        throw_numeric(os.str());
    }
}

Eigen::MatrixXd hankel_matrix(const Eigen::MatrixXd& signal, int depth) {
    const Eigen::Index N = signal.rows();
    const Eigen::Index q = signal.cols();
    if (q < 1) throw_argument("hankel_matrix: signal must have at least one channel");
    if (depth < 1) throw_argument("hankel_matrix: window depth must be >= 1");
    if (depth > N) {
        std::ostringstream os;
        os << "hankel_matrix: window depth " << depth << " exceeds signal length " << N;
        throw_argument(os.str());
    }
    ensure_finite(signal, "hankel_matrix: signal");
    const Eigen::Index cols = N - depth + 1;
    Eigen::MatrixXd H(q * depth, cols);
    for (Eigen::Index i = 0; i < depth; ++i)
        H.middleRows(i * q, q) = signal.middleRows(i, cols).transpose();
    return H;
}

Eigen::MatrixXd block_toeplitz(const std::vector<Eigen::MatrixXd>& impulse, int depth) {
    if (impulse.empty()) throw_argument("block_toeplitz: impulse sequence is empty");
    if (depth < 1) throw_argument("block_toeplitz: depth must be >= 1");
    const Eigen::Index p = impulse.front().rows();
    const Eigen::Index m = impulse.front().cols();
    if (p < 1 || m < 1) throw_argument("block_toeplitz: impulse blocks must be non-empty");
    for (const auto& g : impulse) {
        if (g.rows() != p || g.cols() != m)
            throw_argument("block_toeplitz: impulse blocks must all share one shape");
        ensure_finite(g, "block_toeplitz: impulse block");
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(p * depth, m * depth);
    const Eigen::Index terms = std::min<Eigen::Index>(impulse.size(), depth);
    for (Eigen::Index k = 0; k < terms; ++k)
        for (Eigen::Index j = 0; j + k < depth; ++j)
            T.block((j + k) * p, j * m, p, m) = impulse[static_cast<std::size_t>(k)];
    return T;
}

KernelBasis kernel_basis(const Eigen::MatrixXd& A, double rel_tol) {
    const Eigen::Index rows = A.rows();
    const Eigen::Index cols = A.cols();
    if (cols < 1) throw_argument("kernel_basis: matrix must have at least one column");
    KernelBasis out;
    if (rows == 0) {
        // No constraints: the kernel is the whole space.
        out.basis = Eigen::MatrixXd::Identity(cols, cols);
        out.rank = 0;
        out.tol_used = 0.0;
        return out;
    }
    ensure_finite(A, "kernel_basis: matrix");
    const double tol = rel_tol < 0.0 ? rank_tolerance(rows, cols) : rel_tol;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol * smax) ++rank;
    out.basis = svd.matrixV().rightCols(cols - rank);
    out.rank = rank;
    out.tol_used = tol;
    return out;
}

Eigenpair min_eigenpair_sym(const Eigen::MatrixXd& S) {
    if (S.rows() != S.cols() || S.rows() < 1)
        throw_argument("min_eigenpair_sym: matrix must be square and non-empty");
    ensure_finite(S, "min_eigenpair_sym: matrix");
    const double scale = 1.0 + S.cwiseAbs().maxCoeff();
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw_argument("min_eigenpair_sym: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    if (es.info() != Eigen::Success)
        throw_numeric("min_eigenpair_sym: eigendecomposition failed to converge");
    Eigenpair out;
    out.value = es.eigenvalues()(0);
    out.vector = es.eigenvectors().col(0);
    return out;
}

double max_singular_value(const Eigen::MatrixXd& A) {
    if (A.size() == 0) return 0.0;
    ensure_finite(A, "max_singular_value: matrix");
    // Values-only SVD; BDC handles the large matrices, Jacobi the tiny ones.
    if (A.rows() <= 16 && A.cols() <= 16) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
        return svd.singularValues()(0);
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
    return svd.singularValues()(0);
}

Eigenpair gen_eig_max(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows() || A.rows() < 1)
        throw_argument("gen_eig_max: A and B must be square with matching size");
    ensure_finite(A, "gen_eig_max: A");
    ensure_finite(B, "gen_eig_max: B");
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (B + B.transpose()));
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (B + B.transpose()),
                                                          Eigen::EigenvaluesOnly);
        std::ostringstream os;
        os << "gen_eig_max: B is not positive definite (min eigenvalue "
           << (es.info() == Eigen::Success ? es.eigenvalues()(0) : std::nan("")) << ")";
        throw_degenerate(os.str());
    }
    const Eigen::MatrixXd Lfac = llt.matrixL();
    // C = L^{-1} A L^{-T}, symmetric with the same spectrum as B^{-1} A.
    Eigen::MatrixXd C = Lfac.triangularView<Eigen::Lower>().solve(0.5 * (A + A.transpose()));
    C = Lfac.triangularView<Eigen::Lower>().solve(C.transpose()).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (C + C.transpose()));
    if (es.info() != Eigen::Success)
        throw_numeric("gen_eig_max: eigendecomposition failed to converge");
    const Eigen::Index last = es.eigenvalues().size() - 1;
    Eigenpair out;
    out.value = es.eigenvalues()(last);
    Eigen::VectorXd w = es.eigenvectors().col(last);
    out.vector = Lfac.transpose().triangularView<Eigen::Upper>().solve(w);
    out.vector.normalize();
    return out;
}

}  // namespace ddiqc::linalg
