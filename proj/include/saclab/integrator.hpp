#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>

#include "saclab/field.hpp"
#include "saclab/noise.hpp"
#include "saclab/potential.hpp"
#include "saclab/rng.hpp"
#include "saclab/smoothing.hpp"
#include "saclab/spatial.hpp"

namespace saclab {

enum class Scheme { resolvent_splitting, regularized_explicit };

struct IntegratorConfig {
    double dt = 1e-3;
    double T = 1.0;
    double nu = 1.0;
    Scheme scheme = Scheme::resolvent_splitting;
    std::uint64_t master_seed = 1;

    void validate() const {
        if (!(dt > 0.0) || !(T > 0.0) || dt > T)
            throw std::invalid_argument("IntegratorConfig: need 0 < dt <= T");
        if (!(nu > 0.0)) throw std::invalid_argument("IntegratorConfig: nu > 0");
    }

    int steps() const { return static_cast<int>(std::llround(T / dt)); }
};

struct TrajectoryState {
    double t = 0.0;
    Field u;
};

/// Time stepper for du - nu Lap(u) dt + F'(u) dt = B(u) dW.
///
/// The resolvent-splitting scheme decomposes F' = beta - K id and advances
///   (a) w   = u + K dt u + B(u) dW            (explicit part + noise)
///   (b) v   = (I + nu dt (-Lap))^{-1} w        (implicit heat, spectral)
///   (c) u+  = J_dt(v) pointwise                (implicit singular drift)
/// Step (c) is the Yosida resolvent with lambda = dt; it is the implicit Euler
/// substep for du/dt = -beta(u) and lands in (-1,1) at every grid point, which
/// is what keeps the hard bound |u| < 1 without any clipping.
///
/// The regularized scheme is semi-implicit Euler-Maruyama for the Lipschitz
/// drift/diffusion pair (F_{lambda,n}, B_{lambda,n}); it has no bound
/// constraint and is the carrier dynamics for the Kolmogorov machinery.
class SpdeIntegrator {
public:
    SpdeIntegrator(const SpatialModel& model, const PotentialSpec& pot, const NoiseFamily& noise,
                   const IntegratorConfig& cfg)
        : model_(model), pot_(pot), noise_(noise), cfg_(cfg) {
        cfg.validate();
        implicit_ = 1.0 / (1.0 + cfg.nu * cfg.dt * model.mu());
    }

    const IntegratorConfig& config() const { return cfg_; }
    const SpatialModel& model() const { return model_; }
    const PotentialSpec& potential() const { return pot_; }
    const NoiseFamily& noise_family() const { return noise_; }

    /// Independent N(0, dt) increments, one per noise mode.
    Eigen::ArrayXd draw_increments(RngStream& rng) const {
        return rng.normals(noise_.num_modes(), cfg_.dt);
    }

    RngStream trajectory_stream(std::uint64_t id) const {
        return RngStream(cfg_.master_seed, stream::kTrajectory, id);
    }

    void check_admissible(const Field& x0) const {
        if (x0.size() != model_.size())
            throw std::invalid_argument("integrator: initial field size mismatch");
        if (cfg_.scheme == Scheme::resolvent_splitting && x0.abs().maxCoeff() > 1.0)
            throw std::invalid_argument("integrator: |x0| <= 1 required for resolvent scheme");
    }

    void step(TrajectoryState& s, const Eigen::ArrayXd& dW) const {
        Field w = s.u * (1.0 + pot_.K * cfg_.dt) + noise_.diffusion_apply(s.u, dW);
        Coeffs a = model_.to_modes(w) * implicit_;
        const Field v = model_.to_field(a);
        for (Eigen::Index i = 0; i < v.size(); ++i) s.u[i] = resolvent(pot_, cfg_.dt, v[i]);
        s.t += cfg_.dt;
        if (s.u.abs().maxCoeff() >= 1.0)
            throw std::runtime_error("integrator: resolvent bound violated");  // unreachable
    }

    void step_regularized(TrajectoryState& s, const SmoothedOperators& ops,
                          const Eigen::ArrayXd& dW) const {
        Field w = s.u - cfg_.dt * ops.drift(s.u) + ops.diffusion_apply(s.u, dW);
        s.u = model_.to_field(model_.to_modes(w) * implicit_);
        s.t += cfg_.dt;
        if (!s.u.allFinite()) throw std::runtime_error("integrator: regularized step overflow");
    }

    /// Carrier + first-variation step along a common noise path:
    ///   dv - nu Lap v dt + DF_{l,n}(u) v dt = DB_{l,n}(u) v dW, v(0) = z.
    void step_with_variation(TrajectoryState& s, Field& v, const SmoothedOperators& ops,
                             const Eigen::ArrayXd& dW) const {
        const Field jac = ops.drift_jacobian_diag(s.u);
        const Field dd = ops.diffusion_deriv_diag(s.u);
        Field wv = v - cfg_.dt * ops.apply_drift_derivative(jac, v) +
                   ops.apply_diffusion_derivative(dd, v, dW);
        step_regularized(s, ops, dW);
        v = model_.to_field(model_.to_modes(wv) * implicit_);
    }

    /// Integrates from x0 for cfg.T, invoking on_step after every step.
    /// Returns the terminal state.
    TrajectoryState run(const Field& x0, RngStream& rng,
                        const std::function<void(const TrajectoryState&)>& on_step = nullptr,
                        const SmoothedOperators* ops = nullptr) const {
        check_admissible(x0);
        if (cfg_.scheme == Scheme::regularized_explicit && ops == nullptr)
            throw std::invalid_argument("integrator: regularized scheme needs SmoothedOperators");
        TrajectoryState s{0.0, x0};
        const int n = cfg_.steps();
        for (int k = 0; k < n; ++k) {
            const Eigen::ArrayXd dW = draw_increments(rng);
            if (cfg_.scheme == Scheme::resolvent_splitting)
                step(s, dW);
            else
                step_regularized(s, *ops, dW);
            if (on_step) on_step(s);
        }
        return s;
    }

    /// Synchronous coupling: both trajectories see identical increments.
    void run_coupled(TrajectoryState& a, TrajectoryState& b, RngStream& rng, int n_steps,
                     const std::function<void(const TrajectoryState&, const TrajectoryState&)>&
                         on_step = nullptr) const {
        for (int k = 0; k < n_steps; ++k) {
            const Eigen::ArrayXd dW = draw_increments(rng);
            step(a, dW);
            step(b, dW);
            if (on_step) on_step(a, b);
        }
    }

    const Eigen::ArrayXd& implicit_factors() const { return implicit_; }

private:
    const SpatialModel& model_;
    PotentialSpec pot_;
    const NoiseFamily& noise_;
    IntegratorConfig cfg_;
    Eigen::ArrayXd implicit_;
};

/// Discrete free energy E(u) = int ( (nu/2)|grad u|^2 + F(u) ), with the
/// gradient part summed spectrally.
inline double energy(const SpatialModel& model, const PotentialSpec& pot, double nu,
                     const Field& u) {
    const Coeffs a = model.to_modes(u);
    const double grad_sq = (model.mu() * a.square()).sum();
    double fsum = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) fsum += eval_F(pot, u[i]);
    return 0.5 * nu * grad_sq + model.weight() * fsum;
}

/// |F'(u)|_H^2 with the exact singular derivative; requires max|u| < 1.
inline double drift_norm_sq(const SpatialModel& model, const PotentialSpec& pot, const Field& u) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double f = eval_F_prime(pot, u[i]);
        acc += f * f;
    }
    return acc * model.weight();
}

} // namespace saclab
