#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "saclab/field.hpp"
#include "saclab/rng.hpp"

namespace saclab {

enum class BoundaryCondition { dirichlet, neumann };

struct SpatialConfig {
    int dimension = 1;
    std::array<int, 2> grid{128, 4};      // points per axis (axis 1 unused in 1D)
    std::array<double, 2> length{1.0, 1.0};
    BoundaryCondition bc = BoundaryCondition::dirichlet;
};

struct NormTriple {
    double H_sq = 0.0;
    double V_sq = 0.0;
    double Z_sq = 0.0;
};

/// Covariance Q_t = (1/2) C^{-3} (I - e^{-2tC}) of the OU smoothing measure,
/// diagonal in the model eigenbasis: q_j(t) = (1 - e^{-2 l_j t}) / (2 l_j^3)
/// with l_j = 1 + mu_j.
struct GaussianCovariance {
    double t = 0.0;
    Eigen::ArrayXd q;       // per-mode variances
    double trace = 0.0;
};

/// Rectangular domain discretized on the collocation grid of the Laplacian
/// eigenbasis: sine modes on the interior grid (Dirichlet) or cosine modes on
/// the midpoint grid (Neumann). Both grids make the sampled eigenfunctions
/// exactly orthonormal in the discrete L^2 inner product with uniform weight,
/// so norms, semigroups and covariances are diagonal and exact.
///
/// Eigenvalues are the continuum ones, mu_j = (j pi / L)^2 per axis; 2D modes
/// are tensor products with summed eigenvalues.
class SpatialModel {
public:
    static SpatialModel build(const SpatialConfig& cfg) {
        if (cfg.dimension != 1 && cfg.dimension != 2)
            throw std::invalid_argument("SpatialModel: dimension must be 1 or 2");
        for (int a = 0; a < cfg.dimension; ++a) {
            if (cfg.grid[a] < 4)
                throw std::invalid_argument("SpatialModel: grid size >= 4 per axis");
            if (!(cfg.length[a] > 0.0))
                throw std::invalid_argument("SpatialModel: domain lengths must be positive");
        }
        SpatialModel m;
        m.cfg_ = cfg;
        m.volume_ = 1.0;
        m.weight_ = 1.0;
        for (int a = 0; a < cfg.dimension; ++a) {
            m.build_axis(a);
            m.volume_ *= cfg.length[a];
            m.weight_ *= m.h_[a];
        }
        if (cfg.dimension == 1) {
            m.mu_ = m.axis_mu_[0];
        } else {
            const int n1 = cfg.grid[0], n2 = cfg.grid[1];
            m.mu_.resize(n1 * n2);
            for (int j1 = 0; j1 < n1; ++j1)
                for (int j2 = 0; j2 < n2; ++j2)
                    m.mu_[j1 * n2 + j2] = m.axis_mu_[0][j1] + m.axis_mu_[1][j2];
        }
        m.lamC_ = m.mu_ + 1.0;
        m.K0_ = 1.0 / std::sqrt(1.0 + m.mu_.minCoeff());
        return m;
    }

    const SpatialConfig& config() const { return cfg_; }
    int dimension() const { return cfg_.dimension; }
    int size() const { return static_cast<int>(mu_.size()); }
    double volume() const { return volume_; }
    double weight() const { return weight_; }  // quadrature weight per grid point
    double K0() const { return K0_; }
    const Eigen::ArrayXd& mu() const { return mu_; }
    const Eigen::ArrayXd& lambdaC() const { return lamC_; }
    const Eigen::MatrixXd& axis_basis(int a) const { return basis_[a]; }
    const Eigen::ArrayXd& axis_coordinates(int a) const { return coords_[a]; }

    Coeffs to_modes(const Field& u) const {
        check_field(u);
        if (cfg_.dimension == 1)
            return weight_ * (basis_[0].transpose() * u.matrix()).array();
        const int n1 = cfg_.grid[0], n2 = cfg_.grid[1];
        Eigen::Map<const Eigen::MatrixXd> U(u.data(), n2, n1);
        Eigen::MatrixXd A = weight_ * (basis_[1].transpose() * U * basis_[0]);
        return Eigen::Map<const Eigen::ArrayXd>(A.data(), n1 * n2);
    }

    Field to_field(const Coeffs& a) const {
        check_field(a);
        if (cfg_.dimension == 1) return (basis_[0] * a.matrix()).array();
        const int n1 = cfg_.grid[0], n2 = cfg_.grid[1];
        Eigen::Map<const Eigen::MatrixXd> A(a.data(), n2, n1);
        Eigen::MatrixXd U = basis_[1] * A * basis_[0].transpose();
        return Eigen::Map<const Eigen::ArrayXd>(U.data(), n1 * n2);
    }

    double norm_H_sq(const Coeffs& a) const { return a.square().sum(); }
    double norm_V_sq(const Coeffs& a) const { return (lamC_ * a.square()).sum(); }
    double norm_Z_sq(const Coeffs& a) const { return (lamC_.square() * a.square()).sum(); }

    NormTriple norms(const Field& u) const {
        const Coeffs a = to_modes(u);
        return {norm_H_sq(a), norm_V_sq(a), norm_Z_sq(a)};
    }

    /// |u|_H^2 directly from grid values; equals the spectral sum by Parseval.
    double field_norm_H_sq(const Field& u) const {
        check_field(u);
        return weight_ * u.square().sum();
    }

    double inner_H(const Field& u, const Field& v) const {
        check_field(u);
        check_field(v);
        return weight_ * (u * v).sum();
    }

    /// e^{-tC} with C = I - Laplacian; contraction for t >= 0.
    Field heat_semigroup(double t, const Field& u) const {
        if (t < 0.0) throw std::invalid_argument("heat_semigroup: t >= 0 required");
        return to_field(to_modes(u) * (-t * lamC_).exp());
    }

    Eigen::ArrayXd semigroup_factors(double t) const { return (-t * lamC_).exp(); }

    Field laplacian(const Field& u) const { return to_field(-mu_ * to_modes(u)); }

    GaussianCovariance covariance(double t) const {
        if (t < 0.0) throw std::invalid_argument("covariance: t >= 0 required");
        GaussianCovariance c;
        c.t = t;
        c.q = (-(-2.0 * t * lamC_).exp() + 1.0) / (2.0 * lamC_.cube());
        if (t == 0.0) c.q.setZero();
        c.trace = c.q.sum();
        return c;
    }

    /// Draw y ~ N_{Q_t}: independent N(0, q_j) mode amplitudes.
    Field sample_gaussian(const GaussianCovariance& cov, RngStream& rng) const {
        if (cov.q.size() != mu_.size())
            throw std::invalid_argument("sample_gaussian: covariance from a different model");
        Coeffs a(mu_.size());
        for (Eigen::Index j = 0; j < a.size(); ++j) a[j] = std::sqrt(cov.q[j]) * rng.normal();
        return to_field(a);
    }

    /// Pointwise variances sigma_i^2 = sum_j q_j phi_j(x_i)^2 of the Gaussian
    /// field under a diagonal covariance. A nonlinearity applied pointwise to
    /// x + y sees only these scalar marginals.
    Eigen::ArrayXd pointwise_variance(const GaussianCovariance& cov) const {
        if (cfg_.dimension == 1) {
            Eigen::MatrixXd B2 = basis_[0].array().square().matrix();
            return (B2 * cov.q.matrix()).array().max(0.0);
        }
        const int n1 = cfg_.grid[0], n2 = cfg_.grid[1];
        Eigen::MatrixXd B1s = basis_[0].array().square().matrix();
        Eigen::MatrixXd B2s = basis_[1].array().square().matrix();
        Eigen::Map<const Eigen::MatrixXd> Q(cov.q.data(), n2, n1);
        Eigen::MatrixXd V = B2s * Q * B1s.transpose();
        return Eigen::Map<const Eigen::ArrayXd>(V.data(), n1 * n2).max(0.0);
    }

private:
    void build_axis(int a) {
        const int n = cfg_.grid[a];
        const double L = cfg_.length[a];
        Eigen::MatrixXd B(n, n);
        Eigen::ArrayXd mu(n), x(n);
        const double pi = 3.141592653589793238462643383280;
        if (cfg_.bc == BoundaryCondition::dirichlet) {
            const double h = L / (n + 1);
            h_[a] = h;
            for (int i = 0; i < n; ++i) x[i] = (i + 1) * h;
            for (int j = 0; j < n; ++j) {
                const double k = (j + 1) * pi / L;
                mu[j] = k * k;
                for (int i = 0; i < n; ++i) B(i, j) = std::sqrt(2.0 / L) * std::sin(k * x[i]);
            }
        } else {
            const double h = L / n;
            h_[a] = h;
            for (int i = 0; i < n; ++i) x[i] = (i + 0.5) * h;
            for (int j = 0; j < n; ++j) {
                const double k = j * pi / L;
                mu[j] = k * k;
                const double amp = j == 0 ? std::sqrt(1.0 / L) : std::sqrt(2.0 / L);
                for (int i = 0; i < n; ++i) B(i, j) = amp * std::cos(k * x[i]);
            }
        }
        basis_[a] = std::move(B);
        axis_mu_[a] = std::move(mu);
        coords_[a] = std::move(x);
    }

    void check_field(const Eigen::ArrayXd& u) const {
        if (u.size() != mu_.size())
            throw std::invalid_argument("SpatialModel: field size mismatch");
    }

    SpatialConfig cfg_;
    std::array<Eigen::MatrixXd, 2> basis_;
    std::array<Eigen::ArrayXd, 2> axis_mu_;
    std::array<Eigen::ArrayXd, 2> coords_;
    std::array<double, 2> h_{1.0, 1.0};
    Eigen::ArrayXd mu_, lamC_;
    double volume_ = 1.0, weight_ = 1.0, K0_ = 1.0;
};

} // namespace saclab
