#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "saclab/quadrature.hpp"

namespace saclab {

/// Logarithmic double-well potential
///   F(r) = (theta/2)[(1+r)ln(1+r) + (1-r)ln(1-r)] - (theta0/2) r^2 + offset
/// on [-1,1], with F' blowing up at the barriers. The shifted graph
/// beta(r) = F'(r) + K r with K = theta0 - theta collapses to
///   beta(r) = theta (atanh r - r),
/// which is the form every solver below works with: the substitution
/// r = tanh(w) removes the singularity exactly.
struct PotentialSpec {
    double theta = 1.0;
    double theta0 = 2.0;
    double K = 1.0;       // semiconvexity constant, = theta0 - theta
    double C0 = 1.0;      // coercivity: F'(r) r >= C0 r^2 - C1
    double C1 = 0.0;
    double offset = 0.0;  // additive constant making min F = 0

    /// Builds the spec and derives (K, C0, C1, offset). Passing an explicit
    /// offset skips the minimization (used when a raw, unshifted F is wanted).
    static PotentialSpec make(double theta, double theta0,
                              double explicit_offset = std::numeric_limits<double>::quiet_NaN());

    double f_max() const;  // max of F + offset over [-1,1]
};

namespace potential_detail {

inline double raw_F(double theta, double theta0, double r) {
    // continuous extension with 0 ln 0 := 0 at the endpoints
    const double a = (1.0 + r) <= 0.0 ? 0.0 : (1.0 + r) * std::log1p(r);
    const double b = (1.0 - r) <= 0.0 ? 0.0 : (1.0 - r) * std::log1p(-r);
    return 0.5 * theta * (a + b) - 0.5 * theta0 * r * r;
}

/// Golden-section minimizer for a unimodal restriction; used on brackets only.
template <typename F>
double golden_min(F f, double lo, double hi, int iters = 200) {
    const double phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters && (b - a) > 1e-14; ++i) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - phi * (b - a); f1 = f(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + phi * (b - a); f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

} // namespace potential_detail

inline PotentialSpec PotentialSpec::make(double theta, double theta0, double explicit_offset) {
    if (!(theta > 0.0) || !(theta0 > theta))
        throw std::invalid_argument("PotentialSpec: need 0 < theta < theta0");
    PotentialSpec s;
    s.theta = theta;
    s.theta0 = theta0;
    s.K = theta0 - theta;
    s.C0 = theta0 - theta;
    // C1 = sup_r [ C0 r^2 - F'(r) r ]; the sup is interior since F'(r) r -> +inf
    // at the barriers. Coarse sweep plus golden refinement on [0,1) (even map).
    {
        auto neg = [&](double r) {
            const double fpr_r = theta * r * std::atanh(r) - theta0 * r * r;
            return -(s.C0 * r * r - fpr_r);
        };
        double best = 0.0, best_r = 0.0;
        const int n = 4096;
        for (int i = 0; i < n; ++i) {
            const double r = (i + 0.5) / n * (1.0 - 1e-9);
            const double v = -neg(r);
            if (v > best) { best = v; best_r = r; }
        }
        const double lo = std::max(0.0, best_r - 2.0 / n);
        const double hi = std::min(1.0 - 1e-12, best_r + 2.0 / n);
        const double rm = potential_detail::golden_min(neg, lo, hi);
        s.C1 = std::max(best, -neg(rm));
        if (s.C1 <= 0.0) s.C1 = 1e-12;
    }
    if (std::isnan(explicit_offset)) {
        // minimize F over [0,1]; F is even and the minimum is interior
        auto f = [&](double r) { return potential_detail::raw_F(theta, theta0, r); };
        const double rm = potential_detail::golden_min(f, 0.0, 1.0 - 1e-15);
        s.offset = -std::min(f(rm), std::min(f(0.0), f(1.0)));
    } else {
        s.offset = explicit_offset;
    }
    return s;
}

inline double eval_F(const PotentialSpec& s, double r) {
    if (std::abs(r) > 1.0) throw std::domain_error("eval_F: |r| > 1");
    return potential_detail::raw_F(s.theta, s.theta0, r) + s.offset;
}

inline double eval_F_prime(const PotentialSpec& s, double r) {
    if (std::abs(r) >= 1.0) throw std::domain_error("eval_F_prime: singular at |r| >= 1");
    return s.theta * std::atanh(r) - s.theta0 * r;
}

inline double eval_F_second(const PotentialSpec& s, double r) {
    if (std::abs(r) >= 1.0) throw std::domain_error("eval_F_second: singular at |r| >= 1");
    return s.theta / ((1.0 - r) * (1.0 + r)) - s.theta0;
}

inline double eval_F_third(const PotentialSpec& s, double r) {
    if (std::abs(r) >= 1.0) throw std::domain_error("eval_F_third: singular at |r| >= 1");
    const double q = (1.0 - r) * (1.0 + r);
    return 2.0 * s.theta * r / (q * q);
}

/// beta(r) = F'(r) + K r = theta (atanh r - r), the maximal monotone graph.
inline double eval_beta(const PotentialSpec& s, double r) {
    if (std::abs(r) >= 1.0) throw std::domain_error("eval_beta: singular at |r| >= 1");
    return s.theta * (std::atanh(r) - r);
}

inline double PotentialSpec::f_max() const {
    // F + offset is even with interior minima; max is at r = 0 or r = 1
    return std::max(eval_F(*this, 0.0), eval_F(*this, 1.0));
}

/// Resolvent solve result. The root of y + lambda beta(y) = x is carried both
/// as y in (-1,1) and as w = atanh(y); near the barriers y saturates in double
/// precision while w stays exactly representable, so residuals are evaluated
/// in the w form:  (1 - lambda theta) tanh(w) + lambda theta w - x.
struct ResolventResult {
    double y = 0.0;
    double w = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

inline ResolventResult resolvent_solve(const PotentialSpec& s, double lambda, double x) {
    if (!(lambda > 0.0)) throw std::invalid_argument("resolvent: lambda must be positive");
    const double lt = lambda * s.theta;
    const double c = 1.0 - lt;
    auto G = [&](double w) { return c * std::tanh(w) + lt * w - x; };
    auto Gp = [&](double w) {
        const double t = std::tanh(w);
        return c * (1.0 - t * t) + lt;  // >= min(1, lambda theta) > 0
    };

    // bracket: |w*| <= (|x| + |c|) / (lambda theta)
    double hi = (std::abs(x) + std::abs(c)) / lt + 1.0;
    double lo = -hi;
    double w;
    if (std::abs(x) < 1.0) {
        w = std::atanh(x);
    } else {
        w = (x - std::copysign(std::min(std::abs(c), 1.0), x)) / lt;
    }
    if (!(w > lo && w < hi)) w = 0.5 * (lo + hi);

    const double tol = 1e-14 * (1.0 + std::abs(x));
    int it = 0;
    double g = G(w);
    for (; it < 200; ++it) {
        if (std::abs(g) <= tol) break;
        if (g > 0.0) hi = w; else lo = w;
        double step = g / Gp(w);
        double wn = w - step;
        if (!(wn > lo && wn < hi)) wn = 0.5 * (lo + hi);  // bisection safeguard
        if (wn == w) break;
        w = wn;
        g = G(w);
    }
    if (std::abs(g) > 1e-10 * (1.0 + std::abs(x)))
        throw std::runtime_error("resolvent: solver failed to converge");

    ResolventResult res;
    res.w = w;
    res.residual = std::abs(g);
    res.iterations = it;
    const double one_minus = std::nextafter(1.0, 0.0);
    res.y = std::clamp(std::tanh(w), -one_minus, one_minus);
    return res;
}

/// J_lambda(x): the resolvent (I + lambda beta)^{-1}, mapping R into (-1,1).
inline double resolvent(const PotentialSpec& s, double lambda, double x) {
    return resolvent_solve(s, lambda, x).y;
}

/// Yosida approximation beta_lambda(x) = beta(J_lambda(x)) = (x - J_lambda(x))/lambda.
/// Evaluated as theta (w - tanh w), exact even where tanh w saturates.
inline double yosida(const PotentialSpec& s, double lambda, double x) {
    const auto r = resolvent_solve(s, lambda, x);
    return s.theta * (r.w - std::tanh(r.w));
}

/// beta_lambda'(x) = beta'(J)/(1 + lambda beta'(J)) with beta'(tanh w) = theta sinh^2 w;
/// nondecreasing, in [0, 1/lambda).
inline double yosida_prime(const PotentialSpec& s, double lambda, double x) {
    const auto r = resolvent_solve(s, lambda, x);
    double sh = std::sinh(r.w);
    double s2 = sh * sh;
    if (!std::isfinite(s2)) return 1.0 / lambda;
    return s.theta * s2 / (1.0 + lambda * s.theta * s2);
}

/// Smooth compactly supported bump on [-1,1], unit mass:
///   rho(r) = exp(-1/(1-r^2)) / Z.
/// c_rho = |rho'|_{L^1} = 2 rho(0) since the profile is even and unimodal.
struct MollifierSpec {
    double norm = 1.0;   // Z
    double c_rho = 0.0;
    int quad_points = 64;

    static MollifierSpec make(int quad_points = 64) {
        MollifierSpec m;
        m.quad_points = quad_points;
        const QuadratureRule gl = gauss_legendre(256);
        double z = 0.0;
        for (int i = 0; i < gl.nodes.size(); ++i) z += gl.weights[i] * raw_profile(gl.nodes[i]);
        m.norm = z;
        m.c_rho = 2.0 * (std::exp(-1.0) / z);
        return m;
    }

    static double raw_profile(double r) {
        const double q = 1.0 - r * r;
        return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
    }

    double profile(double r) const { return raw_profile(r) / norm; }

    double profile_prime(double r) const {
        const double q = 1.0 - r * r;
        if (q <= 0.0) return 0.0;
        return raw_profile(r) / norm * (-2.0 * r / (q * q));
    }

    /// Quadrature mass, for the unit-mass invariant check.
    double mass(int n = 0) const {
        const QuadratureRule gl = gauss_legendre(n > 0 ? n : quad_points);
        double z = 0.0;
        for (int i = 0; i < gl.nodes.size(); ++i) z += gl.weights[i] * profile(gl.nodes[i]);
        return z;
    }
};

struct RegularizationParams {
    double lambda = 0.1;
    double gamma = 4.0;
    int quadrature_points = 64;

    RegularizationParams() = default;
    RegularizationParams(double lam, double gam = 4.0, int qp = 64)
        : lambda(lam), gamma(gam), quadrature_points(qp) {
        if (!(lambda > 0.0) || !(gamma > 0.0))
            throw std::invalid_argument("RegularizationParams: lambda, gamma must be positive");
    }
};

namespace potential_detail {
inline const QuadratureRule& cached_gl(int n) {
    thread_local int cached_n = -1;
    thread_local QuadratureRule rule;
    if (cached_n != n) {
        rule = gauss_legendre(n);
        cached_n = n;
    }
    return rule;
}
} // namespace potential_detail

/// F_lambda'(x) = (rho_{lambda^2} * beta_lambda)(x) - K x, by Gauss-Legendre
/// over the mollifier support.
inline double f_lambda_prime(const PotentialSpec& s, const MollifierSpec& m,
                             const RegularizationParams& p, double x) {
    const auto& gl = potential_detail::cached_gl(p.quadrature_points);
    const double eps = p.lambda * p.lambda;
    double acc = 0.0;
    for (int i = 0; i < gl.nodes.size(); ++i)
        acc += gl.weights[i] * m.profile(gl.nodes[i]) * yosida(s, p.lambda, x - eps * gl.nodes[i]);
    if (!std::isfinite(acc)) throw std::runtime_error("f_lambda_prime: quadrature failure");
    return acc - s.K * x;
}

/// F_lambda''(x) = ((rho_{lambda^2})' * beta_lambda)(x) - K. The kernel
/// derivative integrates to zero, so beta_lambda(x) is subtracted inside the
/// quadrature; this keeps the 1/lambda^2 prefactor from amplifying roundoff.
inline double f_lambda_second(const PotentialSpec& s, const MollifierSpec& m,
                              const RegularizationParams& p, double x) {
    const auto& gl = potential_detail::cached_gl(p.quadrature_points);
    const double eps = p.lambda * p.lambda;
    const double center = yosida(s, p.lambda, x);
    double acc = 0.0;
    for (int i = 0; i < gl.nodes.size(); ++i)
        acc += gl.weights[i] * m.profile_prime(gl.nodes[i]) *
               (yosida(s, p.lambda, x - eps * gl.nodes[i]) - center);
    if (!std::isfinite(acc)) throw std::runtime_error("f_lambda_second: quadrature failure");
    return acc / eps - s.K;
}

/// F_lambda'''(x) = ((rho_{lambda^2})' * beta_lambda')(x), same subtracted form.
inline double f_lambda_third(const PotentialSpec& s, const MollifierSpec& m,
                             const RegularizationParams& p, double x) {
    const auto& gl = potential_detail::cached_gl(p.quadrature_points);
    const double eps = p.lambda * p.lambda;
    const double center = yosida_prime(s, p.lambda, x);
    double acc = 0.0;
    for (int i = 0; i < gl.nodes.size(); ++i)
        acc += gl.weights[i] * m.profile_prime(gl.nodes[i]) *
               (yosida_prime(s, p.lambda, x - eps * gl.nodes[i]) - center);
    if (!std::isfinite(acc)) throw std::runtime_error("f_lambda_third: quadrature failure");
    return acc / eps;
}

/// Table-backed evaluator for F_lambda' and F_lambda'' on [-range, range],
/// cubic Hermite between nodes (the stored next derivative supplies the
/// slopes). Arguments outside the range fall back to the exact quadrature.
/// Used in integrator hot loops; the exact ops above remain the reference.
class SmoothedPotential {
public:
    SmoothedPotential(const PotentialSpec& spec, const MollifierSpec& moll,
                      const RegularizationParams& params, double range = 8.0)
        : spec_(spec), moll_(moll), params_(params), range_(range) {
        const double h_target = std::min(0.25 * params.lambda * params.lambda, 5e-3);
        n_ = static_cast<int>(std::ceil(2.0 * range_ / h_target)) + 1;
        h_ = 2.0 * range_ / (n_ - 1);
        fp_.resize(n_);
        fpp_.resize(n_);
        fppp_.resize(n_);
        for (int i = 0; i < n_; ++i) {
            const double x = -range_ + i * h_;
            fp_[i] = f_lambda_prime(spec, moll, params, x);
            fpp_[i] = f_lambda_second(spec, moll, params, x);
            fppp_[i] = f_lambda_third(spec, moll, params, x);
        }
    }

    double lambda() const { return params_.lambda; }
    const PotentialSpec& spec() const { return spec_; }

    double prime(double x) const {
        if (std::abs(x) > range_) return f_lambda_prime(spec_, moll_, params_, x);
        return hermite(x, fp_, fpp_);
    }

    double second(double x) const {
        if (std::abs(x) > range_) return f_lambda_second(spec_, moll_, params_, x);
        return hermite(x, fpp_, fppp_);
    }

private:
    double hermite(double x, const std::vector<double>& v, const std::vector<double>& d) const {
        const double s = (x + range_) / h_;
        int k = std::min(n_ - 2, std::max(0, static_cast<int>(s)));
        const double t = s - k;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * v[k] + (t3 - 2 * t2 + t) * h_ * d[k] +
               (-2 * t3 + 3 * t2) * v[k + 1] + (t3 - t2) * h_ * d[k + 1];
    }

    PotentialSpec spec_;
    MollifierSpec moll_;
    RegularizationParams params_;
    double range_;
    int n_ = 0;
    double h_ = 0.0;
    std::vector<double> fp_, fpp_, fppp_;
};

} // namespace saclab
