#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>

#include "saclab/field.hpp"
#include "saclab/noise.hpp"
#include "saclab/potential.hpp"
#include "saclab/quadrature.hpp"
#include "saclab/rng.hpp"
#include "saclab/spatial.hpp"

namespace saclab {

/// Parameters of the double regularisation: lambda mollifies the singular
/// drift and the noise shapes, n drives the Ornstein-Uhlenbeck smoothing in
/// function space. n = 0 is the "no OU smoothing" sentinel (n -> infinity
/// limit), under which the operators reduce exactly to their lambda-only
/// counterparts.
struct SmoothingParams {
    double lambda = 0.5;
    int n = 0;                 // 0 => infinity sentinel
    double gamma = 4.0;
    double delta = 2.0;
    int mc_samples = 256;
    int hermite_points = 20;
    int quadrature_points = 64;

    bool ou_active() const { return n > 0; }

    void validate() const {
        if (!(lambda > 0.0)) throw std::invalid_argument("SmoothingParams: lambda > 0");
        if (n < 0) throw std::invalid_argument("SmoothingParams: n must be >= 0");
        if (!(gamma > 0.0) || !(delta > 0.0))
            throw std::invalid_argument("SmoothingParams: gamma, delta > 0");
    }
};

struct FieldWithError {
    Field value;
    Field se;  // Monte-Carlo standard error per grid point (zero for quadrature path)
};

/// The smoothed operators
///   F_{lambda,n}(x) = E[ e^{-C/n} F_lambda'( e^{-C/n} x + Y ) ],   Y ~ N_{Q_{1/n}},
///   B_{lambda,n}(x) e_k = E[ e^{-C/n^d} h_{k,lambda}( e^{-C/n^d} x + Y' ) ],
/// together with their first derivatives (needed by the first-variation
/// process and the Kolmogorov residuals).
///
/// Because F_lambda' and h_{k,lambda} act pointwise and Q_t is diagonal in the
/// eigenbasis, the Gaussian average at a grid point only involves the scalar
/// marginal N(0, sigma_i^2) with sigma_i^2 = sum_j q_j phi_j(x_i)^2. The
/// default averaging is therefore one-dimensional Gauss-Hermite quadrature per
/// grid point, which is deterministic; plain Monte-Carlo over field draws is
/// kept as an alternative path and is what the *_mc entry points report
/// standard errors for.
class SmoothedOperators {
public:
    SmoothedOperators(const SpatialModel& model, const PotentialSpec& pot,
                      const MollifierSpec& moll, const NoiseFamily& noise,
                      const SmoothingParams& params)
        : model_(model), pot_(pot), moll_(moll), noise_(noise), params_(params) {
        params_.validate();
        RegularizationParams reg(params.lambda, params.gamma, params.quadrature_points);
        fp_ = std::make_shared<SmoothedPotential>(pot, moll, reg);
        shape_ = std::make_shared<SmoothedShape>(noise, moll, params.lambda, params.gamma);
        gh_ = gauss_hermite_prob(params.hermite_points);
        if (params_.ou_active()) {
            const double tF = 1.0 / params_.n;
            const double tB = 1.0 / std::pow(static_cast<double>(params_.n), params_.delta);
            semiF_ = model.semigroup_factors(tF);
            semiB_ = model.semigroup_factors(tB);
            covF_ = model.covariance(tF);
            covB_ = model.covariance(tB);
            sigmaF_ = model.pointwise_variance(covF_).sqrt();
            sigmaB_ = model.pointwise_variance(covB_).sqrt();
        }
    }

    const SmoothingParams& params() const { return params_; }
    const SpatialModel& model() const { return model_; }
    const NoiseFamily& noise() const { return noise_; }
    const SmoothedPotential& potential_table() const { return *fp_; }
    const SmoothedShape& shape_table() const { return *shape_; }

    /// Pointwise lambda-regularised drift F_lambda' (table-backed).
    double drift_scalar(double r) const { return fp_->prime(r); }

    Field drift(const Field& x) const {
        if (!params_.ou_active()) return pointwise(x, [&](double r) { return fp_->prime(r); });
        const Field w = apply_semi(semiF_, x);
        Field v = gh_average(w, sigmaF_, [&](double r) { return fp_->prime(r); });
        return apply_semi(semiF_, v);
    }

    /// Diagonal of DF_{lambda,n}(x) before the outer/inner semigroups:
    /// a_i = E[F_lambda''(w_i + Y_i)]. DF(x)[z] = e^{-C/n}(a .* e^{-C/n} z).
    Field drift_jacobian_diag(const Field& x) const {
        if (!params_.ou_active()) return pointwise(x, [&](double r) { return fp_->second(r); });
        const Field w = apply_semi(semiF_, x);
        return gh_average(w, sigmaF_, [&](double r) { return fp_->second(r); });
    }

    Field apply_drift_derivative(const Field& jac_diag, const Field& z) const {
        if (!params_.ou_active()) return jac_diag * z;
        return apply_semi(semiF_, Field(jac_diag * apply_semi(semiF_, z)));
    }

    /// Shared-shape part of B_{lambda,n}: mode k is amplitude(k) times
    /// e^{-C/n^d} applied to this field.
    Field diffusion_base(const Field& x) const {
        if (!params_.ou_active()) return pointwise(x, [&](double r) { return shape_->value(r); });
        const Field w = apply_semi(semiB_, x);
        Field v = gh_average(w, sigmaB_, [&](double r) { return shape_->value(r); });
        return apply_semi(semiB_, v);
    }

    Field diffusion_mode(const Field& x, int k) const {
        return noise_.amplitude(k) * diffusion_base(x);
    }

    /// B_{lambda,n}(x) dW = (sum_k c_k dW_k) * smoothed shape field.
    Field diffusion_apply(const Field& x, const Eigen::ArrayXd& dW) const {
        if (dW.size() != noise_.num_modes())
            throw std::invalid_argument("diffusion_apply: dW dimension mismatch");
        double s = 0.0;
        for (int k = 0; k < noise_.num_modes(); ++k) s += noise_.amplitude(k + 1) * dW[k];
        return s * diffusion_base(x);
    }

    /// Pointwise diagonal of DB before semigroups: b_i = E[phi_lambda'(w_i + Y_i)].
    Field diffusion_deriv_diag(const Field& x) const {
        if (!params_.ou_active()) return pointwise(x, [&](double r) { return shape_->deriv(r); });
        const Field w = apply_semi(semiB_, x);
        return gh_average(w, sigmaB_, [&](double r) { return shape_->deriv(r); });
    }

    /// sum_k DB_{lambda,n}(x)[z] e_k dW_k, the first-variation noise term.
    Field apply_diffusion_derivative(const Field& deriv_diag, const Field& z,
                                     const Eigen::ArrayXd& dW) const {
        double s = 0.0;
        for (int k = 0; k < noise_.num_modes(); ++k) s += noise_.amplitude(k + 1) * dW[k];
        if (!params_.ou_active()) return s * (deriv_diag * z);
        return s * apply_semi(semiB_, Field(deriv_diag * apply_semi(semiB_, z)));
    }

    /// sum_k |B_{lambda,n}(x) e_k|_H^2.
    double diffusion_hs_norm_sq(const Field& x) const {
        const Field b = diffusion_base(x);
        return noise_.sum_amp_sq() * model_.field_norm_H_sq(b);
    }

    // ---- Monte-Carlo averaging path (spec default variant, slower) ----

    FieldWithError drift_mc(const Field& x, RngStream& rng, int samples = 0) const {
        if (!params_.ou_active()) return {drift(x), Field::Zero(x.size())};
        if (samples <= 0) samples = params_.mc_samples;
        const Field w = apply_semi(semiF_, x);
        return mc_average(w, covF_, semiF_, samples, rng,
                          [&](double r) { return fp_->prime(r); });
    }

    FieldWithError diffusion_base_mc(const Field& x, RngStream& rng, int samples = 0) const {
        if (!params_.ou_active()) return {diffusion_base(x), Field::Zero(x.size())};
        if (samples <= 0) samples = params_.mc_samples;
        const Field w = apply_semi(semiB_, x);
        return mc_average(w, covB_, semiB_, samples, rng,
                          [&](double r) { return shape_->value(r); });
    }

private:
    Field apply_semi(const Eigen::ArrayXd& factors, const Field& x) const {
        return model_.to_field(factors * model_.to_modes(x));
    }

    template <typename F>
    Field pointwise(const Field& x, F f) const {
        Field out(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = f(x[i]);
        return out;
    }

    template <typename F>
    Field gh_average(const Field& w, const Eigen::ArrayXd& sigma, F f) const {
        Field out(w.size());
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            if (sigma[i] == 0.0) {
                out[i] = f(w[i]);
                continue;
            }
            double acc = 0.0;
            for (int q = 0; q < gh_.nodes.size(); ++q)
                acc += gh_.weights[q] * f(w[i] + sigma[i] * gh_.nodes[q]);
            out[i] = acc;
        }
        return out;
    }

    template <typename F>
    FieldWithError mc_average(const Field& w, const GaussianCovariance& cov,
                              const Eigen::ArrayXd& semi, int samples, RngStream& rng,
                              F f) const {
        Field mean = Field::Zero(w.size());
        Field m2 = Field::Zero(w.size());
        for (int s = 1; s <= samples; ++s) {
            const Field y = model_.sample_gaussian(cov, rng);
            Field v(w.size());
            for (Eigen::Index i = 0; i < w.size(); ++i) v[i] = f(w[i] + y[i]);
            const Field d = v - mean;
            mean += d / s;
            m2 += d * (v - mean);
        }
        Field se = (m2 / (static_cast<double>(samples) * std::max(1, samples - 1))).sqrt();
        return {apply_semi(semi, mean), se};
    }

    const SpatialModel& model_;
    PotentialSpec pot_;
    MollifierSpec moll_;
    const NoiseFamily& noise_;
    SmoothingParams params_;
    std::shared_ptr<SmoothedPotential> fp_;
    std::shared_ptr<SmoothedShape> shape_;
    QuadratureRule gh_;
    Eigen::ArrayXd semiF_, semiB_;
    GaussianCovariance covF_, covB_;
    Eigen::ArrayXd sigmaF_, sigmaB_;
};

} // namespace saclab
