#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "saclab/noise.hpp"
#include "saclab/rng.hpp"
#include "saclab/stats.hpp"

using namespace saclab;

namespace {
const PotentialSpec kPot = PotentialSpec::make(1.0, 2.0);
const NoiseFamily kFam{NoiseConfig{}, kPot};
const MollifierSpec kMoll = MollifierSpec::make();
} // namespace

TEST_CASE("degeneracy at the barriers, extension by zero") {
    for (int k = 1; k <= kFam.num_modes(); ++k) {
        REQUIRE(kFam.eval_h(k, 1.0) == 0.0);
        REQUIRE(kFam.eval_h(k, -1.0) == 0.0);
        REQUIRE(kFam.eval_h(k, 2.0) == 0.0);
        REQUIRE(kFam.shape_prime(1.0) == 0.0);
        REQUIRE(kFam.shape_prime(-1.0) == 0.0);
    }
    REQUIRE(kFam.eval_h(1, 0.0) == Catch::Approx(1.0));
    REQUIRE_THROWS_AS(kFam.eval_h(0, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(kFam.eval_h(9, 0.0), std::invalid_argument);
}

TEST_CASE("noise constants match the closed forms of the default family") {
    // c_k = k^-2, shape (1-r^2)^2: sup|phi| = 1, sup|phi'|^2 = 64/27,
    // sup|phi^2 F''| = 1 (theta = 1, theta0 = 2), sup|phi''| = 8.
    const double sum4 = 1.08178416770348067;  // sum_{k<=8} k^-4, direct summation
    REQUIRE(kFam.sum_amp_sq() == Catch::Approx(sum4).margin(1e-12));
    REQUIRE(kFam.C_B() == Catch::Approx(sum4 * (64.0 / 27.0 + 1.0)).epsilon(1e-3));
    REQUIRE(kFam.C_B_prime() == Catch::Approx(sum4 * 64.0).epsilon(1e-2));
    REQUIRE(kFam.amp_tail_sq() ==
            Catch::Approx(1.0823232337111382 - sum4).epsilon(1e-6));  // zeta(4) tail
}

TEST_CASE("diffusion_apply basics") {
    const int n = 16;
    Field u = Field::Zero(n);
    Eigen::ArrayXd dW = Eigen::ArrayXd::Zero(kFam.num_modes());
    REQUIRE(kFam.diffusion_apply(u, dW).abs().maxCoeff() == 0.0);

    dW[0] = 1.0;  // basis action e_1
    Field f = kFam.diffusion_apply(u, dW);
    for (int i = 0; i < n; ++i) REQUIRE(f[i] == Catch::Approx(kFam.eval_h(1, u[i])));

    Field walls = Field::Constant(n, 1.0);
    walls[3] = -1.0;
    Eigen::ArrayXd dW2 = Eigen::ArrayXd::Constant(kFam.num_modes(), 2.0);
    REQUIRE(kFam.diffusion_apply(walls, dW2).abs().maxCoeff() == 0.0);

    REQUIRE_THROWS_AS(kFam.diffusion_apply(u, Eigen::ArrayXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("hs norm: frozen value at zero field and HS bound on random fields") {
    const int n = 64;
    const double w = 1.0 / n;  // midpoint-grid weight, so |1|_H^2 = |D| = 1 exactly
    Field zero = Field::Zero(n);
    REQUIRE(kFam.hs_norm_sq(zero, w) == Catch::Approx(1.08178416770348067).margin(1e-10));
    REQUIRE(kFam.hs_norm_sq(Field::Constant(n, 1.0), w) == 0.0);

    RngStream rng(11, 1, 1);
    for (int trial = 0; trial < 1000; ++trial) {
        Field u(n);
        for (int i = 0; i < n; ++i) u[i] = 2.0 * rng.uniform() - 1.0;
        REQUIRE(kFam.hs_norm_sq(u, w) <= kFam.C_B() * 1.0 + 1e-9);
    }
}

TEST_CASE("discrete Lipschitz bound of B") {
    const int n = 48;
    const double w = 1.0 / n;
    RngStream rng(12, 1, 2);
    for (int trial = 0; trial < 200; ++trial) {
        Field u(n), v(n);
        for (int i = 0; i < n; ++i) {
            u[i] = 2.0 * rng.uniform() - 1.0;
            v[i] = 2.0 * rng.uniform() - 1.0;
        }
        double hs = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = kFam.shape(u[i]) - kFam.shape(v[i]);
            hs += d * d;
        }
        hs *= w * kFam.sum_amp_sq();
        const double max_sq = (u - v).abs().maxCoeff() * (u - v).abs().maxCoeff();
        REQUIRE(hs <= kFam.C_B() * 1.0 * max_sq + 1e-12);
    }
}

TEST_CASE("mollified coefficients: pointwise convergence and C^2 budget") {
    for (double r : {-0.7, 0.0, 0.5, 0.95}) {
        double prev = std::abs(kFam.eval_h_mollified(kMoll, 0.5, 4.0, 2, r) - kFam.eval_h(2, r));
        for (double lambda : {0.4, 0.3}) {
            const double err =
                std::abs(kFam.eval_h_mollified(kMoll, lambda, 4.0, 2, r) - kFam.eval_h(2, r));
            REQUIRE(err <= prev + 1e-12);
            prev = err;
        }
        REQUIRE(prev < 1e-2);
    }

    // sum_k |h_{k,lambda}|_{C^2}^2 <= C_B + C_B' (max-convention norms)
    for (double lambda : {0.6, 0.3}) {
        const double eps = std::pow(lambda, 4.0);
        double sup0 = 0.0, sup1 = 0.0, sup2 = 0.0;
        for (int i = 0; i <= 400; ++i) {
            const double r = -1.3 + 2.6 * i / 400;
            sup0 = std::max(sup0, std::abs(kFam.shape(r) + kFam.shape_mollified_gap(kMoll, eps, r)));
            sup1 = std::max(sup1, std::abs(kFam.shape_mollified(kMoll, eps, r, 1)));
            sup2 = std::max(sup2, std::abs(kFam.shape_mollified(kMoll, eps, r, 2)));
        }
        const double c2 = std::max({sup0, sup1, sup2});
        REQUIRE(kFam.sum_amp_sq() * c2 * c2 <= kFam.C_B() + kFam.C_B_prime() + 1e-9);
    }
}

TEST_CASE("mollification gap: fri3 bound and fast decay in lambda") {
    std::vector<double> lambdas{0.125, 0.0625, 0.03125};
    std::vector<double> gaps;
    for (double lambda : lambdas) {
        const double g = kFam.mollified_gap_sup_sq(kMoll, lambda, 4.0);
        REQUIRE(g <= kFam.C_B() * std::pow(lambda, 8.0));
        gaps.push_back(g);
    }
    const double slope = log_log_fit(lambdas, gaps).slope;
    REQUIRE(slope >= 2.0 * 4.0 - 0.2);
}

TEST_CASE("mollified diffusion: support shrinkage and Lipschitz constant") {
    const int n = 24;
    Eigen::ArrayXd dW = Eigen::ArrayXd::Zero(kFam.num_modes());
    Field u3 = Field::Constant(n, 3.0);
    REQUIRE(kFam.diffusion_apply_mollified(kMoll, 0.3, 4.0, u3, dW).abs().maxCoeff() == 0.0);
    dW[0] = 1.0;
    REQUIRE(kFam.diffusion_apply_mollified(kMoll, 0.3, 4.0, u3, dW).abs().maxCoeff() < 1e-12);

    // |B_lam(u) - B_lam(v)|_HS <= sqrt(C_B) |u - v|_H on sampled pairs
    const double w = 1.0 / n;
    RngStream rng(5, 5, 5);
    const double eps = std::pow(0.3, 4.0);
    for (int trial = 0; trial < 50; ++trial) {
        Field u(n), v(n);
        for (int i = 0; i < n; ++i) {
            u[i] = 3.0 * (2.0 * rng.uniform() - 1.0);
            v[i] = 3.0 * (2.0 * rng.uniform() - 1.0);
        }
        double hs = 0.0, dist = 0.0;
        for (int i = 0; i < n; ++i) {
            const double a = kFam.shape(u[i]) + kFam.shape_mollified_gap(kMoll, eps, u[i]);
            const double b = kFam.shape(v[i]) + kFam.shape_mollified_gap(kMoll, eps, v[i]);
            hs += (a - b) * (a - b);
            dist += (u[i] - v[i]) * (u[i] - v[i]);
        }
        REQUIRE(kFam.sum_amp_sq() * hs * w <= kFam.C_B() * dist * w + 1e-10);
    }
}

TEST_CASE("smoothed shape table tracks exact convolutions") {
    SmoothedShape table(kFam, kMoll, 0.5, 4.0);
    const double eps = std::pow(0.5, 4.0);
    for (int i = 0; i <= 200; ++i) {
        const double r = -1.2 + 2.4 * i / 200;
        const double exact = kFam.shape(r) + kFam.shape_mollified_gap(kMoll, eps, r);
        REQUIRE(table.value(r) == Catch::Approx(exact).margin(1e-8));
        REQUIRE(table.deriv(r) ==
                Catch::Approx(kFam.shape_mollified(kMoll, eps, r, 1)).margin(1e-7));
    }
}

TEST_CASE("config validation") {
    NoiseConfig bad;
    bad.shape_exponent = 1;
    REQUIRE_THROWS_AS(NoiseFamily(bad, kPot), std::invalid_argument);
}
