#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace saclab {

struct QuadratureRule {
    Eigen::ArrayXd nodes;
    Eigen::ArrayXd weights;
};

namespace detail {

/// Nodes/weights from the symmetric tridiagonal Jacobi matrix (Golub-Welsch).
/// `beta` holds the off-diagonal recurrence coefficients, `mu0` the total mass.
inline QuadratureRule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& beta,
                                   double mu0) {
    const int n = static_cast<int>(diag.size());
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        J(i, i) = diag[i];
        if (i + 1 < n) {
            J(i, i + 1) = beta[i];
            J(i + 1, i) = beta[i];
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    if (es.info() != Eigen::Success) throw std::runtime_error("quadrature: eigensolve failed");
    QuadratureRule rule;
    rule.nodes = es.eigenvalues().array();
    rule.weights = mu0 * es.eigenvectors().row(0).array().square();
    return rule;
}

} // namespace detail

/// n-point Gauss-Legendre rule on [-1, 1].
inline QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd beta(n > 1 ? n - 1 : 0);
    for (int k = 1; k < n; ++k) {
        const double kk = static_cast<double>(k);
        beta[k - 1] = kk / std::sqrt(4.0 * kk * kk - 1.0);
    }
    return detail::golub_welsch(diag, beta, 2.0);
}

/// n-point Gauss-Hermite rule for averages against N(0,1):
/// E[f(Z)] ~ sum_i w_i f(x_i), weights summing to 1.
inline QuadratureRule gauss_hermite_prob(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite_prob: n must be positive");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd beta(n > 1 ? n - 1 : 0);
    for (int k = 1; k < n; ++k) beta[k - 1] = std::sqrt(static_cast<double>(k));
    return detail::golub_welsch(diag, beta, 1.0);
}

} // namespace saclab
