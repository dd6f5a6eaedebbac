#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "saclab/potential.hpp"
#include "saclab/quadrature.hpp"

using namespace saclab;

namespace {

const PotentialSpec kSpecNoOffset = PotentialSpec::make(1.0, 2.0, 0.0);
const PotentialSpec kSpec = PotentialSpec::make(1.0, 2.0);

/// Independent oracle: plain bisection for y + lambda beta(y) = x in the
/// y-variable, valid away from the barriers.
double resolvent_bisection_oracle(const PotentialSpec& s, double lambda, double x) {
    double lo = -1.0 + 1e-15, hi = 1.0 - 1e-15;
    auto g = [&](double y) { return y + lambda * eval_beta(s, y) - x; };
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) hi = mid; else lo = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

TEST_CASE("derived constants of the default logarithmic potential") {
    REQUIRE(kSpec.K == Catch::Approx(1.0));
    REQUIRE(kSpec.C0 == Catch::Approx(1.0));
    // oracle values from a high-precision offline sweep of the closed forms
    REQUIRE(kSpec.C1 == Catch::Approx(1.11252464853359140).margin(1e-8));
    REQUIRE(kSpec.offset == Catch::Approx(0.32652388742692387).margin(1e-10));
    REQUIRE(kSpec.f_max() == Catch::Approx(0.32652388742692387).margin(1e-10));
}

TEST_CASE("eval_F values and symmetry") {
    REQUIRE(eval_F(kSpecNoOffset, 0.0) == 0.0);
    // continuous extension at the barrier: theta ln 2 - theta0/2
    REQUIRE(eval_F(kSpecNoOffset, 1.0) == Catch::Approx(-0.30685281944005469).margin(1e-15));
    REQUIRE(eval_F(kSpec, 1.0) ==
            Catch::Approx(-0.30685281944005469 + 0.32652388742692387).margin(1e-9));
    for (int i = 0; i <= 50; ++i) {
        const double r = -1.0 + 2.0 * i / 50;
        REQUIRE(eval_F(kSpec, r) == Catch::Approx(eval_F(kSpec, -r)).margin(1e-14));
        REQUIRE(eval_F(kSpec, r) >= -1e-12);  // offset makes F nonnegative
    }
    REQUIRE_THROWS_AS(eval_F(kSpec, 1.0000001), std::domain_error);
}

TEST_CASE("eval_F_prime values, symmetry, semiconvexity") {
    REQUIRE(eval_F_prime(kSpec, 0.0) == 0.0);
    REQUIRE(eval_F_prime(kSpec, 0.5) == Catch::Approx(-0.45069385566594515).margin(1e-14));
    for (int i = 1; i < 40; ++i) {
        const double r = -0.999 + 1.998 * i / 40;
        REQUIRE(eval_F_prime(kSpec, r) == Catch::Approx(-eval_F_prime(kSpec, -r)).margin(1e-12));
        REQUIRE(eval_F_second(kSpec, r) >= -kSpec.K - 1e-12);
    }
    REQUIRE_THROWS_AS(eval_F_prime(kSpec, 1.0), std::domain_error);
}

TEST_CASE("beta is the shifted monotone graph") {
    REQUIRE(eval_beta(kSpec, 0.0) == 0.0);
    REQUIRE(eval_beta(kSpec, 0.5) == Catch::Approx(0.04930614433405485).margin(1e-14));
    double prev = eval_beta(kSpec, -0.9999);
    for (int i = 1; i <= 200; ++i) {
        const double r = -0.9999 + 2 * 0.9999 * i / 200;
        const double b = eval_beta(kSpec, r);
        REQUIRE(b >= prev);
        prev = b;
    }
    // coercivity restated for beta: beta(r) r >= (C0 - K) r^2 - C1
    for (int i = 0; i <= 100; ++i) {
        const double r = -0.999 + 1.998 * i / 100;
        REQUIRE(eval_beta(kSpec, r) * r >=
                (kSpec.C0 - kSpec.K) * r * r - kSpec.C1 - 1e-10);
    }
}

TEST_CASE("resolvent basics") {
    REQUIRE(resolvent(kSpec, 0.25, 0.0) == 0.0);
    const double y10 = resolvent(kSpec, 0.5, 10.0);
    REQUIRE(y10 > 0.0);
    REQUIRE(y10 < 1.0);
    // frozen oracle value (high-precision root of 0.9 y + 0.1 atanh y = 0.5)
    REQUIRE(resolvent(kSpec, 0.1, 0.5) == Catch::Approx(0.49522649198277339).margin(1e-11));
    REQUIRE(resolvent(kSpec, 0.1, 0.5) ==
            Catch::Approx(resolvent_bisection_oracle(kSpec, 0.1, 0.5)).margin(1e-11));
}

TEST_CASE("resolvent residuals and strict range on a hard grid") {
    for (double lambda : {1e-1, 1e-2, 1e-3, 1e-4}) {
        for (int i = 0; i <= 200; ++i) {
            const double x = -5.0 + 10.0 * i / 200;
            const auto r = resolvent_solve(kSpec, lambda, x);
            REQUIRE(std::abs(r.y) < 1.0);
            REQUIRE(r.residual < 1e-10);
        }
    }
}

TEST_CASE("yosida identity, monotonicity, Lipschitz bound") {
    REQUIRE(yosida(kSpec, 0.3, 0.0) == 0.0);
    const double lambda = 0.05;
    double prev = yosida(kSpec, lambda, -3.0);
    double prev_x = -3.0;
    for (int i = 1; i <= 120; ++i) {
        const double x = -3.0 + 6.0 * i / 120;
        const double b = yosida(kSpec, lambda, x);
        REQUIRE(b >= prev - 1e-12);
        REQUIRE(std::abs(b - prev) <= (x - prev_x) / lambda + 1e-10);
        // beta_lambda = (x - J_lambda x)/lambda
        const double j = resolvent(kSpec, lambda, x);
        REQUIRE(b == Catch::Approx((x - j) / lambda).margin(1e-7));
        prev = b;
        prev_x = x;
    }
}

TEST_CASE("yosida converges pointwise to beta on the interior") {
    for (double x : {-0.8, -0.3, 0.4, 0.9}) {
        const double exact = eval_beta(kSpec, x);
        double err_prev = std::abs(yosida(kSpec, 0.1, x) - exact);
        for (double lambda : {0.05, 0.025, 0.0125}) {
            const double err = std::abs(yosida(kSpec, lambda, x) - exact);
            REQUIRE(err <= err_prev + 1e-14);
            err_prev = err;
        }
        REQUIRE(err_prev < 0.05 * (std::abs(exact) + 0.1));
    }
}

TEST_CASE("mollifier is a unit-mass bump") {
    const auto m = MollifierSpec::make();
    REQUIRE(m.mass() == Catch::Approx(1.0).margin(1e-8));
    REQUIRE(m.c_rho == Catch::Approx(1.65713767973821030).margin(1e-8));
    REQUIRE(m.profile(0.99) > 0.0);
    REQUIRE(m.profile(1.0) == 0.0);
    REQUIRE(m.profile(1.5) == 0.0);
}

TEST_CASE("f_lambda_prime: symmetry zero, drift gap, envelope") {
    const auto m = MollifierSpec::make();
    RegularizationParams p(0.1);
    REQUIRE(f_lambda_prime(kSpec, m, p, 0.0) == Catch::Approx(0.0).margin(1e-12));

    // scalar analogue of the fri6 envelope: |F_lambda' - F'| <= 3 lambda (1+|x|)
    for (double lambda : {0.1, 0.05, 0.01}) {
        RegularizationParams pl(lambda);
        for (int i = 0; i <= 36; ++i) {
            const double x = -0.9 + 1.8 * i / 36;
            const double gap = std::abs(f_lambda_prime(kSpec, m, pl, x) - eval_F_prime(kSpec, x));
            REQUIRE(gap <= 3.0 * lambda * (1.0 + std::abs(x)));
        }
    }
}

TEST_CASE("f_lambda_second agrees with a central difference of f_lambda_prime") {
    const auto m = MollifierSpec::make();
    RegularizationParams p(0.3);
    const double x = 0.37;
    const double exact = f_lambda_second(kSpec, m, p, x);
    double prev_err = 1e9;
    for (double h : {2e-3, 1e-3, 5e-4}) {
        const double fd =
            (f_lambda_prime(kSpec, m, p, x + h) - f_lambda_prime(kSpec, m, p, x - h)) / (2 * h);
        const double err = std::abs(fd - exact);
        REQUIRE(err < prev_err + 1e-12);  // O(h^2) shrinkage
        prev_err = err;
    }
    REQUIRE(prev_err < 1e-4);
}

TEST_CASE("f_lambda_second also matches the rho * beta_lambda' route") {
    const auto m = MollifierSpec::make();
    const auto& gl = gauss_legendre(64);
    for (double lambda : {0.2, 0.05}) {
        RegularizationParams p(lambda);
        for (double x : {-1.2, -0.5, 0.0, 0.8, 2.0}) {
            double acc = 0.0;
            const double eps = lambda * lambda;
            for (int i = 0; i < gl.nodes.size(); ++i)
                acc += gl.weights[i] * m.profile(gl.nodes[i]) *
                       yosida_prime(kSpec, lambda, x - eps * gl.nodes[i]);
            REQUIRE(f_lambda_second(kSpec, m, p, x) == Catch::Approx(acc - kSpec.K).margin(1e-7));
        }
    }
}

TEST_CASE("regularized derivative bounds hold at sampled points") {
    const auto m = MollifierSpec::make();
    for (double lambda : {0.1, 0.01}) {
        RegularizationParams p(lambda);
        for (int i = 0; i <= 60; ++i) {
            const double x = -5.0 + 10.0 * i / 60;
            REQUIRE(std::abs(f_lambda_second(kSpec, m, p, x)) <= kSpec.K + 1.0 / lambda + 1e-6);
            REQUIRE(std::abs(f_lambda_third(kSpec, m, p, x)) <=
                    m.c_rho / (lambda * lambda * lambda) + 1e-6);
        }
    }
    REQUIRE(f_lambda_third(kSpec, m, RegularizationParams(0.1), 0.0) ==
            Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("smoothed potential table tracks the exact quadratures") {
    const auto m = MollifierSpec::make();
    RegularizationParams p(0.5);
    SmoothedPotential table(kSpec, m, p, 4.0);
    for (int i = 0; i <= 100; ++i) {
        const double x = -3.5 + 7.0 * i / 100;
        REQUIRE(table.prime(x) == Catch::Approx(f_lambda_prime(kSpec, m, p, x)).margin(1e-7));
        REQUIRE(table.second(x) == Catch::Approx(f_lambda_second(kSpec, m, p, x)).margin(1e-6));
    }
    // outside the table range the exact path is used
    REQUIRE(table.prime(5.0) == f_lambda_prime(kSpec, m, p, 5.0));
}

TEST_CASE("potential spec rejects bad temperatures") {
    REQUIRE_THROWS_AS(PotentialSpec::make(2.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(PotentialSpec::make(0.0, 1.0), std::invalid_argument);
}
