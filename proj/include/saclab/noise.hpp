#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "saclab/field.hpp"
#include "saclab/potential.hpp"
#include "saclab/quadrature.hpp"

namespace saclab {

struct NoiseConfig {
    int num_modes = 8;
    double amplitude_exponent = 2.0;  // c_k = amplitude_scale * k^{-amplitude_exponent}
    double amplitude_scale = 1.0;     // 0 switches the noise off
    int shape_exponent = 2;           // h_k(r) = c_k (1-r^2)^shape_exponent
};

/// Degenerate noise family h_k(r) = c_k (1-r^2)^p, vanishing with its first
/// derivative at the potential barriers (p >= 2). All modes share one shape,
/// so B(u) dW collapses to phi(u) * sum_k c_k dW_k; the per-mode API is kept
/// because downstream operators (trace terms, smoothing) address modes
/// individually.
///
/// Constants are computed against a given potential on a fine grid:
///   C_B  = sum_k ( max(|h_k|_oo, |h_k'|_oo)^2 + |h_k^2 F''|_oo )
///   C_B' = sum_k |h_k''|_oo^2
/// (C^j norms in the max convention, which is what makes
///  sum |h_{k,lam}|^2_{C^2} <= C_B + C_B' come out true).
class NoiseFamily {
public:
    NoiseFamily(const NoiseConfig& cfg, const PotentialSpec& pot) : cfg_(cfg) {
        if (cfg.num_modes < 1) throw std::invalid_argument("NoiseFamily: num_modes >= 1");
        if (cfg.shape_exponent < 2)
            throw std::invalid_argument("NoiseFamily: shape_exponent >= 2 required (H2')");
        if (cfg.amplitude_scale < 0.0)
            throw std::invalid_argument("NoiseFamily: amplitude_scale >= 0");
        amps_.resize(cfg.num_modes);
        for (int k = 1; k <= cfg.num_modes; ++k)
            amps_[k - 1] =
                cfg.amplitude_scale * std::pow(static_cast<double>(k), -cfg.amplitude_exponent);
        sum_amp_sq_ = 0.0;
        for (double c : amps_) sum_amp_sq_ += c * c;
        // truncation tail sum_{k>m} c_k^2, reported in manifests
        amp_tail_sq_ = 0.0;
        for (int k = cfg.num_modes + 1; k <= 2000000; ++k) {
            const double t = std::pow(static_cast<double>(k), -2.0 * cfg.amplitude_exponent);
            amp_tail_sq_ += t;
            if (t < 1e-18 * amp_tail_sq_) break;
        }
        amp_tail_sq_ *= cfg.amplitude_scale * cfg.amplitude_scale;

        const int n = 10000;
        double sup_phi = 0.0, sup_dphi = 0.0, sup_ddphi = 0.0, sup_phi2F2 = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double r = -1.0 + 2.0 * i / n;
            sup_phi = std::max(sup_phi, std::abs(shape(r)));
            sup_dphi = std::max(sup_dphi, std::abs(shape_prime(r)));
            sup_ddphi = std::max(sup_ddphi, std::abs(shape_second(r)));
            // phi^2 F'' = c^{-2} h^2 F'' is bounded: (1-r^2)^{2p} kills the 1/(1-r^2) pole
            const double q = 1.0 - r * r;
            const double v = pot.theta * std::pow(q, 2 * cfg.shape_exponent - 1) -
                             pot.theta0 * std::pow(q, 2 * cfg.shape_exponent);
            sup_phi2F2 = std::max(sup_phi2F2, std::abs(v));
        }
        sup_shape_prime_ = sup_dphi;
        const double c1sq = std::max(sup_phi, sup_dphi) * std::max(sup_phi, sup_dphi);
        C_B_ = sum_amp_sq_ * (c1sq + sup_phi2F2);
        C_B_prime_ = sum_amp_sq_ * sup_ddphi * sup_ddphi;
    }

    int num_modes() const { return cfg_.num_modes; }
    const NoiseConfig& config() const { return cfg_; }
    double amplitude(int k) const { return amps_.at(k - 1); }
    double sum_amp_sq() const { return sum_amp_sq_; }
    double amp_tail_sq() const { return amp_tail_sq_; }
    double C_B() const { return C_B_; }
    double C_B_prime() const { return C_B_prime_; }
    double shape_lipschitz() const { return sup_shape_prime_; }

    /// Shape profile extended by zero outside [-1,1] (the paper's tilde-extension).
    double shape(double r) const {
        const double q = (1.0 - r) * (1.0 + r);
        if (q <= 0.0) return 0.0;
        return std::pow(q, cfg_.shape_exponent);
    }

    double shape_prime(double r) const {
        const double q = (1.0 - r) * (1.0 + r);
        if (q <= 0.0) return 0.0;
        return -2.0 * cfg_.shape_exponent * r * std::pow(q, cfg_.shape_exponent - 1);
    }

    double shape_second(double r) const {
        const double q = (1.0 - r) * (1.0 + r);
        if (q <= 0.0) return 0.0;
        const int p = cfg_.shape_exponent;
        return -2.0 * p * std::pow(q, p - 1) +
               4.0 * p * (p - 1) * r * r * std::pow(q, p - 2);
    }

    double eval_h(int k, double r) const {
        check_mode(k);
        return amplitude(k) * shape(r);
    }

    /// B(u) dW = sum_k h_k(u(.)) dW_k, pointwise on the grid.
    Field diffusion_apply(const Field& u, const Eigen::ArrayXd& dW) const {
        if (dW.size() != cfg_.num_modes)
            throw std::invalid_argument("diffusion_apply: dW dimension mismatch");
        double s = 0.0;
        for (int k = 0; k < cfg_.num_modes; ++k) s += amps_[k] * dW[k];
        Field out(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) out[i] = shape(u[i]) * s;
        return out;
    }

    /// sum_k |h_k(u)|_H^2 with uniform quadrature weight.
    double hs_norm_sq(const Field& u, double volume_element) const {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            const double ph = shape(u[i]);
            acc += ph * ph;
        }
        return acc * volume_element * sum_amp_sq_;
    }

    // ---- mollified family h_{k,lambda} = rho_{lambda^gamma} * h~_k ----

    /// (rho_eps * phi)(r) - phi(r), evaluated cancellation-free: the shape
    /// difference phi(r-s) - phi(r) is expanded in powers of s so the gap is
    /// resolvable far below the magnitude of phi itself (needed for the
    /// lambda^{2 gamma} rate checks, where the gap reaches ~1e-20).
    double shape_mollified_gap(const MollifierSpec& m, double eps, double r) const {
        return convolve_pieces(m, eps, r, [&](double sigma) {
            return shape_diff(r, eps * sigma);
        });
    }

    /// (rho_eps * phi^{(order)})(r) for order 0,1,2.
    double shape_mollified(const MollifierSpec& m, double eps, double r, int order = 0) const {
        return convolve_pieces(m, eps, r, [&](double sigma) {
            const double y = r - eps * sigma;
            switch (order) {
                case 0: return shape(y);
                case 1: return shape_prime(y);
                default: return shape_second(y);
            }
        });
    }

    double eval_h_mollified(const MollifierSpec& m, double lambda, double gamma, int k,
                            double r) const {
        check_mode(k);
        if (!(lambda > 0.0) || !(gamma > 0.0))
            throw std::invalid_argument("eval_h_mollified: lambda, gamma must be positive");
        const double eps = std::pow(lambda, gamma);
        return amplitude(k) * (shape(r) + shape_mollified_gap(m, eps, r));
    }

    /// sup_r sum_k |h_{k,lambda}(r) - h~_k(r)|^2. All modes share the shape, so
    /// this is (sum c_k^2) sup_r gap(r)^2; the sup is scanned globally and on
    /// refined windows around the kinks at +-1 where it is attained.
    double mollified_gap_sup_sq(const MollifierSpec& m, double lambda, double gamma) const {
        const double eps = std::pow(lambda, gamma);
        double sup = 0.0;
        auto scan = [&](double lo, double hi, int n) {
            for (int i = 0; i <= n; ++i) {
                const double r = lo + (hi - lo) * i / n;
                sup = std::max(sup, std::abs(shape_mollified_gap(m, eps, r)));
            }
        };
        scan(-1.0 - 2.0 * eps, 1.0 + 2.0 * eps, 2000);
        scan(1.0 - 4.0 * eps, 1.0 + 4.0 * eps, 2000);
        scan(-1.0 - 4.0 * eps, -1.0 + 4.0 * eps, 2000);
        return sum_amp_sq_ * sup * sup;
    }

    Field diffusion_apply_mollified(const MollifierSpec& m, double lambda, double gamma,
                                    const Field& u, const Eigen::ArrayXd& dW) const {
        if (dW.size() != cfg_.num_modes)
            throw std::invalid_argument("diffusion_apply_mollified: dW dimension mismatch");
        const double eps = std::pow(lambda, gamma);
        double s = 0.0;
        for (int k = 0; k < cfg_.num_modes; ++k) s += amps_[k] * dW[k];
        Field out(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i)
            out[i] = (shape(u[i]) + shape_mollified_gap(m, eps, u[i])) * s;
        return out;
    }

private:
    void check_mode(int k) const {
        if (k < 1 || k > cfg_.num_modes) throw std::invalid_argument("noise mode out of range");
    }

    /// phi(r-s) - phi(r) without cancellation. With A = 1-r^2 and
    /// v = s(2r-s):  1-(r-s)^2 = A+v, so the difference is
    /// sum_{i=1}^p binom(p,i) v^i A^{p-i} whenever both points are inside.
    double shape_diff(double r, double s) const {
        const double y = r - s;
        const bool rin = std::abs(r) <= 1.0, yin = std::abs(y) <= 1.0;
        if (!rin && !yin) return 0.0;
        if (rin && !yin) return -shape(r);
        if (!rin && yin) return shape(y);
        const int p = cfg_.shape_exponent;
        const double A = (1.0 - r) * (1.0 + r);
        const double v = s * (2.0 * r - s);
        double acc = 0.0;
        double binom = 1.0;
        double vpow = 1.0;
        for (int i = 1; i <= p; ++i) {
            binom = binom * (p - i + 1) / i;
            vpow *= v;
            acc += binom * vpow * std::pow(A, p - i);
        }
        return acc;
    }

    /// Gauss-Legendre over the mollifier support, split at the sigma values
    /// where r - eps sigma crosses the kinks +-1.
    template <typename F>
    double convolve_pieces(const MollifierSpec& m, double eps, double r, F integrand) const {
        const auto& gl = potential_detail::cached_gl(m.quad_points);
        std::vector<double> cuts{-1.0, 1.0};
        for (double kink : {-1.0, 1.0}) {
            const double sigma = (r - kink) / eps;
            if (sigma > -1.0 && sigma < 1.0) cuts.push_back(sigma);
        }
        std::sort(cuts.begin(), cuts.end());
        double acc = 0.0;
        for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
            const double a = cuts[j], b = cuts[j + 1];
            const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
            if (half <= 0.0) continue;
            for (int i = 0; i < gl.nodes.size(); ++i) {
                const double sigma = mid + half * gl.nodes[i];
                acc += half * gl.weights[i] * m.profile(sigma) * integrand(sigma);
            }
        }
        return acc;
    }

    NoiseConfig cfg_;
    std::vector<double> amps_;
    double sum_amp_sq_ = 0.0;
    double amp_tail_sq_ = 0.0;
    double C_B_ = 0.0;
    double C_B_prime_ = 0.0;
    double sup_shape_prime_ = 0.0;
};

/// Table for the mollified shape rho_{eps} * phi and its first derivative,
/// for integrator hot loops (cubic Hermite between nodes, exact zero outside
/// the support). The exact quadrature path stays in NoiseFamily.
class SmoothedShape {
public:
    SmoothedShape(const NoiseFamily& fam, const MollifierSpec& m, double lambda, double gamma) {
        eps_ = std::pow(lambda, gamma);
        lo_ = -1.0 - eps_;
        hi_ = 1.0 + eps_;
        const double h_target = std::max(std::min(eps_ / 8.0, 2e-3), 1e-4);
        n_ = static_cast<int>(std::ceil((hi_ - lo_) / h_target)) + 1;
        h_ = (hi_ - lo_) / (n_ - 1);
        v_.resize(n_);
        d_.resize(n_);
        dd_.resize(n_);
        for (int i = 0; i < n_; ++i) {
            const double r = lo_ + i * h_;
            v_[i] = fam.shape(r) + fam.shape_mollified_gap(m, eps_, r);
            d_[i] = fam.shape_mollified(m, eps_, r, 1);
            dd_[i] = fam.shape_mollified(m, eps_, r, 2);
        }
    }

    double value(double r) const {
        if (r <= lo_ || r >= hi_) return 0.0;
        return hermite(r, v_, d_);
    }

    double deriv(double r) const {
        if (r <= lo_ || r >= hi_) return 0.0;
        return hermite(r, d_, dd_);
    }

private:
    double hermite(double r, const std::vector<double>& v, const std::vector<double>& d) const {
        const double s = (r - lo_) / h_;
        int k = std::min(n_ - 2, std::max(0, static_cast<int>(s)));
        const double t = s - k;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * v[k] + (t3 - 2 * t2 + t) * h_ * d[k] +
               (-2 * t3 + 3 * t2) * v[k + 1] + (t3 - t2) * h_ * d[k + 1];
    }

    double eps_ = 0.0, lo_ = 0.0, hi_ = 0.0, h_ = 0.0;
    int n_ = 0;
    std::vector<double> v_, d_, dd_;
};

} // namespace saclab
