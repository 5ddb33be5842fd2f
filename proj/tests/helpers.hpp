#pragma once

// Shared fixtures and independent oracles used across the test suites.

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "ddiqc/lti.hpp"

namespace testutil {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = normal(rng);
    return M;
}

// Row-major stacking of a row-per-sample signal into one long vector
// (matches the Hankel/Toeplitz window layout).
inline Eigen::VectorXd stack_rows(const Eigen::MatrixXd& w) {
    Eigen::MatrixXd t = w.transpose();
    return Eigen::Map<Eigen::VectorXd>(t.data(), t.size());
}

// Sample-wise causal convolution y_k = sum_{j<=k} g_{k-j} u_j with zero
// initial condition; independent oracle for Toeplitz products and
// state-space simulation.
inline Eigen::MatrixXd convolve(const std::vector<Eigen::MatrixXd>& g,
                                const Eigen::MatrixXd& u) {
    const Eigen::Index N = u.rows();
    const Eigen::Index p = g.front().rows();
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(N, p);
    for (Eigen::Index k = 0; k < N; ++k)
        for (Eigen::Index j = 0; j <= k; ++j) {
            const auto idx = static_cast<std::size_t>(k - j);
            if (idx < g.size()) y.row(k) += (g[idx] * u.row(j).transpose()).transpose();
        }
    return y;
}

// Seventh-order two-input two-output benchmark plant with L2-gain close
// to 11.9, built from first-order sections:
//   G11 = 2/(z+0.51)              G12 = 1/(z+0.19) + 1/(z+0.21)
//   G21 = 1/(z+0.55) + 2/(z+0.2)  G22 = 2/(z+0.52) + 3/(z+0.5)
inline ddiqc::lti::StateSpaceModel benchmark_system() {
    ddiqc::lti::StateSpaceModel g;
    Eigen::VectorXd poles(7);
    poles << -0.51, -0.19, -0.21, -0.55, -0.2, -0.52, -0.5;
    g.A = poles.asDiagonal();
    g.B.resize(7, 2);
    g.B << 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1;
    g.C.resize(2, 7);
    g.C << 2, 1, 1, 0, 0, 0, 0, 0, 0, 0, 1, 2, 2, 3;
    g.D = Eigen::MatrixXd::Zero(2, 2);
    return g;
}

// Seeded uniform input in [-1, 1]^m, the excitation used throughout.
inline Eigen::MatrixXd uniform_input(Eigen::Index N, Eigen::Index m,
                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::MatrixXd u(N, m);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < m; ++j) u(i, j) = unif(rng);
    return u;
}

}  // namespace testutil
