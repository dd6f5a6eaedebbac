#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "saclab/rng.hpp"
#include "saclab/spatial.hpp"
#include "saclab/stats.hpp"

using namespace saclab;

namespace {
SpatialModel dirichlet_1d(int n = 64) {
    SpatialConfig cfg;
    cfg.dimension = 1;
    cfg.grid = {n, 1};
    cfg.bc = BoundaryCondition::dirichlet;
    return SpatialModel::build(cfg);
}
SpatialModel neumann_1d(int n = 64) {
    SpatialConfig cfg;
    cfg.dimension = 1;
    cfg.grid = {n, 1};
    cfg.bc = BoundaryCondition::neumann;
    return SpatialModel::build(cfg);
}
constexpr double kPiSq = 9.869604401089358;
} // namespace

TEST_CASE("1D Dirichlet spectrum and embedding constant") {
    const auto m = dirichlet_1d();
    REQUIRE(m.mu()[0] == Catch::Approx(kPiSq).margin(1e-12));
    REQUIRE(m.mu()[1] == Catch::Approx(4.0 * kPiSq).margin(1e-11));
    REQUIRE(m.K0() == Catch::Approx(0.30331447105335286).margin(1e-12));
    REQUIRE(m.volume() == Catch::Approx(1.0));
    // eigenvalues nondecreasing, first one positive
    for (int j = 1; j < m.size(); ++j) REQUIRE(m.mu()[j] >= m.mu()[j - 1]);
    REQUIRE(m.mu()[0] > 0.0);
}

TEST_CASE("1D Neumann has the constant mode") {
    const auto m = neumann_1d();
    REQUIRE(m.mu()[0] == 0.0);
    REQUIRE(m.K0() == Catch::Approx(1.0));
    const double c = 0.7;
    Field u = Field::Constant(m.size(), c);
    const auto n = m.norms(u);
    REQUIRE(std::sqrt(n.H_sq) == Catch::Approx(std::abs(c) * std::sqrt(m.volume())).margin(1e-12));
    REQUIRE(n.V_sq == Catch::Approx(n.H_sq).margin(1e-12));
}

TEST_CASE("discrete eigenbasis is exactly orthonormal") {
    for (auto bc : {BoundaryCondition::dirichlet, BoundaryCondition::neumann}) {
        SpatialConfig cfg;
        cfg.grid = {32, 1};
        cfg.bc = bc;
        const auto m = SpatialModel::build(cfg);
        const Eigen::MatrixXd& B = m.axis_basis(0);
        Eigen::MatrixXd gram = m.weight() * B.transpose() * B;
        REQUIRE((gram - Eigen::MatrixXd::Identity(32, 32)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("continuum eigenvalues agree with a discrete Laplacian eigensolve") {
    const int n = 128;
    const auto m = dirichlet_1d(n);
    const double h = 1.0 / (n + 1);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        A(i, i) = 2.0 / (h * h);
        if (i + 1 < n) {
            A(i, i + 1) = -1.0 / (h * h);
            A(i + 1, i) = -1.0 / (h * h);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    for (int j = 0; j < 4; ++j)
        REQUIRE(es.eigenvalues()[j] == Catch::Approx(m.mu()[j]).epsilon(2e-3));
}

TEST_CASE("2D tensor eigenvalues are sums of axis eigenvalues") {
    SpatialConfig cfg;
    cfg.dimension = 2;
    cfg.grid = {8, 6};
    cfg.length = {1.0, 2.0};
    cfg.bc = BoundaryCondition::dirichlet;
    const auto m = SpatialModel::build(cfg);
    REQUIRE(m.size() == 48);
    REQUIRE(m.mu()[0] == Catch::Approx(kPiSq + kPiSq / 4.0).margin(1e-10));
    REQUIRE(m.volume() == Catch::Approx(2.0));
    // roundtrip through the tensor transform
    RngStream rng(3, 1, 0);
    Field u(m.size());
    for (int i = 0; i < m.size(); ++i) u[i] = rng.normal();
    const Field back = m.to_field(m.to_modes(u));
    REQUIRE((back - u).abs().maxCoeff() < 1e-11);
}

TEST_CASE("norms: Parseval and analytic values on smooth fields") {
    const auto m = dirichlet_1d(96);
    // u = sin(pi x): H^2 = 1/2, V^2 = (1+pi^2)/2, Z^2 = (1+pi^2)^2/2
    Field u(m.size());
    for (int i = 0; i < m.size(); ++i)
        u[i] = std::sin(3.141592653589793 * m.axis_coordinates(0)[i]);
    const auto n = m.norms(u);
    REQUIRE(n.H_sq == Catch::Approx(0.5).margin(1e-8));
    REQUIRE(n.V_sq == Catch::Approx(0.5 * (1 + kPiSq)).margin(1e-7));
    REQUIRE(n.Z_sq == Catch::Approx(0.5 * (1 + kPiSq) * (1 + kPiSq)).margin(1e-6));
    REQUIRE(m.field_norm_H_sq(u) == Catch::Approx(n.H_sq).margin(1e-12));

    // first eigenfunction: |phi_1|_V^2 = 1 + pi^2
    Coeffs e1 = Coeffs::Zero(m.size());
    e1[0] = 1.0;
    Field phi1 = m.to_field(e1);
    REQUIRE(m.norms(phi1).V_sq == Catch::Approx(10.869604401089358).margin(1e-10));
}

TEST_CASE("H-norm dominated by K0 times V-norm on random fields") {
    const auto m = dirichlet_1d(48);
    RngStream rng(7, 1, 0);
    for (int trial = 0; trial < 50; ++trial) {
        Coeffs a(m.size());
        for (int j = 0; j < m.size(); ++j) a[j] = rng.normal() / (1.0 + j);
        REQUIRE(std::sqrt(m.norm_H_sq(a)) <= m.K0() * std::sqrt(m.norm_V_sq(a)) + 1e-12);
    }
}

TEST_CASE("heat semigroup: identity, contraction, semigroup property, decay") {
    const auto m = dirichlet_1d(48);
    RngStream rng(8, 1, 0);
    Field u(m.size());
    for (int i = 0; i < m.size(); ++i) u[i] = rng.normal();
    REQUIRE((m.heat_semigroup(0.0, u) - u).abs().maxCoeff() < 1e-12);

    const double t = 0.37, s = 0.21;
    const Field one_shot = m.heat_semigroup(t + s, u);
    const Field two_shot = m.heat_semigroup(t, m.heat_semigroup(s, u));
    REQUIRE((one_shot - two_shot).abs().maxCoeff() < 1e-12);

    const double before = std::sqrt(m.field_norm_H_sq(u));
    const double after = std::sqrt(m.field_norm_H_sq(m.heat_semigroup(t, u)));
    REQUIRE(after <= std::exp(-t) * before + 1e-12);
    REQUIRE(m.heat_semigroup(40.0, u).abs().maxCoeff() < 1e-12);
    REQUIRE_THROWS_AS(m.heat_semigroup(-1.0, u), std::invalid_argument);
}

TEST_CASE("covariance Q_t: formula, trace bound, zero at t=0") {
    const auto m = dirichlet_1d(32);
    const auto c = m.covariance(0.8);
    for (int j = 0; j < m.size(); ++j) {
        const double l = m.lambdaC()[j];
        REQUIRE(c.q[j] ==
                Catch::Approx((1.0 - std::exp(-2.0 * l * 0.8)) / (2.0 * l * l * l)).margin(1e-15));
        REQUIRE(c.q[j] >= 0.0);
    }
    REQUIRE(c.trace <= 0.8 * m.lambdaC().square().inverse().sum() + 1e-14);
    REQUIRE(m.covariance(0.0).q.maxCoeff() == 0.0);
    REQUIRE_THROWS_AS(m.covariance(-0.1), std::invalid_argument);
}

TEST_CASE("gaussian sampler matches its covariance") {
    const auto m = dirichlet_1d(24);
    const auto c = m.covariance(0.5);
    RngStream rng(21, stream::kGaussianField, 0);
    const int samples = 20000;
    RunningStat norm_sq;
    RunningStat mode0_sq;
    for (int s = 0; s < samples; ++s) {
        const Field y = m.sample_gaussian(c, rng);
        norm_sq.add(m.field_norm_H_sq(y));
        const Coeffs a = m.to_modes(y);
        mode0_sq.add(a[0] * a[0]);
    }
    REQUIRE(std::abs(norm_sq.mean() - c.trace) <= 3.0 * norm_sq.standard_error());
    REQUIRE(std::abs(mode0_sq.mean() - c.q[0]) <= 3.0 * mode0_sq.standard_error());
    // t = 0 draws are the zero field
    const auto c0 = m.covariance(0.0);
    REQUIRE(m.sample_gaussian(c0, rng).abs().maxCoeff() == 0.0);
}

TEST_CASE("pointwise variance of the gaussian field") {
    const auto m = dirichlet_1d(16);
    const auto c = m.covariance(1.0);
    const Eigen::ArrayXd pv = m.pointwise_variance(c);
    for (int i = 0; i < m.size(); ++i) {
        double direct = 0.0;
        for (int j = 0; j < m.size(); ++j) {
            const double phi = m.axis_basis(0)(i, j);
            direct += c.q[j] * phi * phi;
        }
        REQUIRE(pv[i] == Catch::Approx(direct).margin(1e-14));
    }
}

TEST_CASE("config validation errors") {
    SpatialConfig bad;
    bad.dimension = 3;
    REQUIRE_THROWS_AS(SpatialModel::build(bad), std::invalid_argument);
    bad.dimension = 1;
    bad.grid = {2, 1};
    REQUIRE_THROWS_AS(SpatialModel::build(bad), std::invalid_argument);
}
