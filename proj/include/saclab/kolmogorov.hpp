#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "saclab/integrator.hpp"
#include "saclab/observables.hpp"
#include "saclab/parallel.hpp"
#include "saclab/smoothing.hpp"
#include "saclab/stats.hpp"

namespace saclab {

/// bar_alpha = (1/2)(2K + 33 C_B + 1) v 16 C_B; resolvent solves need
/// alpha above this threshold.
inline double bar_alpha(double K, double C_B) {
    return std::max(0.5 * (2.0 * K + 33.0 * C_B + 1.0), 16.0 * C_B);
}

/// Dissipativity margin alpha0 = nu (1/K0^2 - 1) - C_B/2 - K; its sign gates
/// the uniqueness/mixing experiments.
inline double alpha0(double nu, double K0, double C_B, double K) {
    return nu * (1.0 / (K0 * K0) - 1.0) - 0.5 * C_B - K;
}

/// Membership test for the strong admissible set: strictly inside the
/// barriers with bounded discrete Z-norm and singular drift.
inline bool a_str_member(const SpatialModel& model, const PotentialSpec& pot, const Field& u,
                         double z_cap = 1e8, double drift_cap = 1e8) {
    if (u.abs().maxCoeff() >= 1.0) return false;
    if (model.norms(u).Z_sq > z_cap * z_cap) return false;
    return drift_norm_sq(model, pot, u) <= drift_cap * drift_cap;
}

struct KolmogorovProblem {
    double alpha = 0.0;             // must exceed bar_alpha(K, C_B)
    Observable g;
    SmoothingParams smoothing;
    int galerkin_dim = 4;           // M: noise directions kept in the trace
    int mc_samples = 10000;
    double dt = 5e-4;
    double t_max = 0.0;             // 0 => chosen from alpha so the tail is negligible
    double fd_eps = 1e-2;           // field-norm FD step
    double nu = 1.0;
    double h_semigroup = 0.05;      // lag of the Markov-consistency residual
    int outer_samples = 64;         // outer draws for P_h phi
    int workers = 1;

    KolmogorovProblem(double a, Observable obs, SmoothingParams sp)
        : alpha(a), g(std::move(obs)), smoothing(sp) {}

    void validate(double K, double C_B) const {
        const double bar = bar_alpha(K, C_B);
        if (!(alpha > bar))
            throw std::invalid_argument("KolmogorovProblem: alpha = " + std::to_string(alpha) +
                                        " must exceed bar_alpha = " + std::to_string(bar));
        if (galerkin_dim < 1) throw std::invalid_argument("KolmogorovProblem: galerkin_dim >= 1");
        smoothing.validate();
    }

    double horizon() const {
        if (t_max > 0.0) return t_max;
        return std::max(14.0 / alpha, 0.15);
    }
};

struct PhiEstimate {
    double value = 0.0;
    double se = 0.0;
    double tail = 0.0;  // analytic bound |g|_oo e^{-alpha T}/alpha on the cut integral
};

/// Monte-Carlo Feynman-Kac solver for the regularised resolvent equation
///   alpha phi + L0^{lambda,n} phi = g,
/// phi(x) = int_0^inf e^{-alpha t} E[g(u_{lambda,n}(t;x))] dt.
///
/// All estimates at a point are built from trajectory *bundles*: every Monte
/// Carlo sample integrates the whole family of finite-difference-shifted
/// initial conditions under one shared noise path (common random numbers), so
/// differences of phi values are estimated with strongly correlated errors.
class ResolventSolver {
public:
    ResolventSolver(const SpatialModel& model, const PotentialSpec& pot, const MollifierSpec& moll,
                    const NoiseFamily& noise, const KolmogorovProblem& prob,
                    std::uint64_t master_seed)
        : model_(model), pot_(pot), noise_(noise), prob_(prob), seed_(master_seed),
          ops_(model, pot, moll, noise, prob.smoothing) {
        prob.validate(pot.K, noise.C_B());
        icfg_.dt = prob.dt;
        icfg_.T = prob.horizon();
        icfg_.nu = prob.nu;
        icfg_.scheme = Scheme::regularized_explicit;
        icfg_.master_seed = master_seed;
        integrator_ = std::make_unique<SpdeIntegrator>(model, pot, noise, icfg_);
    }

    const SmoothedOperators& ops() const { return ops_; }
    const SpdeIntegrator& integrator() const { return *integrator_; }
    const KolmogorovProblem& problem() const { return prob_; }

    /// Per-sample discounted quadratures for a bundle of initial fields under
    /// common noise. Row j of `per_sample` holds sample j's trapezoid of
    /// e^{-alpha t} g(u_v(t)) for each variant v; `head` is the same quadrature
    /// cut at t <= h_semigroup (variant 0 only).
    struct BundleResult {
        Eigen::MatrixXd per_sample;          // samples x variants
        Eigen::VectorXd head;                // samples (variant 0, integral over [0, h])
        std::vector<PhiEstimate> phi;        // column summaries
    };

    BundleResult run_bundle(const std::vector<Field>& starts, int samples,
                            std::uint64_t stream_salt = 0, int head_steps = 0) const {
        const int nv = static_cast<int>(starts.size());
        const int n_steps = icfg_.steps();
        const double dt = icfg_.dt;
        const double alpha = prob_.alpha;
        BundleResult out;
        out.per_sample.resize(samples, nv);
        out.head.setZero(samples);

        parallel_for(samples, prob_.workers, [&](int j) {
            RngStream rng(seed_, stream::kTrajectory + stream_salt, static_cast<std::uint64_t>(j));
            std::vector<TrajectoryState> st;
            st.reserve(nv);
            for (const Field& x : starts) st.push_back({0.0, x});
            std::vector<double> acc(nv);
            double head = 0.0;
            for (int v = 0; v < nv; ++v)
                acc[v] = 0.5 * dt * prob_.g(model_, st[v].u);  // t = 0 end of the trapezoid
            head += 0.5 * dt * prob_.g(model_, st[0].u);
            for (int k = 1; k <= n_steps; ++k) {
                const Eigen::ArrayXd dW = integrator_->draw_increments(rng);
                const double disc = std::exp(-alpha * k * dt);
                const double w = (k == n_steps) ? 0.5 * dt : dt;
                for (int v = 0; v < nv; ++v) {
                    integrator_->step_regularized(st[v], ops_, dW);
                    acc[v] += w * disc * prob_.g(model_, st[v].u);
                }
                if (head_steps > 0 && k <= head_steps) {
                    const double wh = (k == head_steps) ? 0.5 * dt : dt;
                    head += wh * disc * prob_.g(model_, st[0].u);
                }
            }
            for (int v = 0; v < nv; ++v) out.per_sample(j, v) = acc[v];
            out.head[j] = head;
        });

        const double tail = prob_.g.sup_norm() * std::exp(-alpha * icfg_.T) / alpha;
        out.phi.resize(nv);
        for (int v = 0; v < nv; ++v) {
            RunningStat rs;
            for (int j = 0; j < samples; ++j) rs.add(out.per_sample(j, v));
            out.phi[v] = {rs.mean(), rs.standard_error(), tail};
        }
        return out;
    }

    PhiEstimate phi(const Field& x, int samples = 0, std::uint64_t stream_salt = 0) const {
        auto res = run_bundle({x}, samples > 0 ? samples : prob_.mc_samples, stream_salt);
        return res.phi[0];
    }

    struct L0Report {
        double value = 0.0;       // alpha phi + L0 phi estimate (before subtracting g)
        double phi_value = 0.0;
        double phi_se = 0.0;
        double se = 0.0;          // MC standard error of the combined estimator
        double fd_bias = 0.0;     // Richardson diagnostic |r(eps) - r(2 eps)| / 3
        double trace_tail = 0.0;  // bound on the neglected trace modes k > M
        double tail = 0.0;        // discount-cut contribution incl. FD amplification
        double hessian_scale = 0.0;
        Eigen::VectorXd head;     // per-sample head integrals (variant 0)
        Eigen::VectorXd base;     // per-sample phi integrals (variant 0)
    };

    /// Estimates alpha phi(x) + L0^{lambda,n} phi(x) by central finite
    /// differences of the Monte-Carlo phi along the drift direction and the
    /// first M noise directions, with a three-point Richardson diagnostic
    /// (the same bundle carries the 2-eps shifts).
    L0Report apply_L0(const Field& x, int samples = 0, std::uint64_t stream_salt = 0) const {
        const int M = prob_.galerkin_dim;
        if (M > noise_.num_modes())
            throw std::invalid_argument("apply_L0: galerkin_dim exceeds simulated noise modes");
        const double eps = prob_.fd_eps;

        // drift vector  d = nu Lap x - F_{lambda,n}(x); L0 pairs -d with D phi
        const Field drift_vec = prob_.nu * model_.laplacian(x) - ops_.drift(x);
        const double dnorm = std::sqrt(model_.field_norm_H_sq(drift_vec));
        const Field dhat = dnorm > 0 ? Field(drift_vec / dnorm) : Field(Field::Zero(x.size()));

        const Field base = ops_.diffusion_base(x);
        std::vector<Field> bdirs;
        std::vector<double> bnorms;
        for (int k = 1; k <= M; ++k) {
            Field bk = noise_.amplitude(k) * base;
            const double nb = std::sqrt(model_.field_norm_H_sq(bk));
            bnorms.push_back(nb);
            bdirs.push_back(nb > 0 ? Field(bk / nb) : Field(Field::Zero(x.size())));
        }

        // variants: 0: x; then for s in {eps, 2 eps}: x +- s dhat, x +- s bhat_k
        std::vector<Field> starts{x};
        for (double s : {eps, 2.0 * eps}) {
            starts.push_back(x + s * dhat);
            starts.push_back(x - s * dhat);
            for (int k = 0; k < M; ++k) {
                starts.push_back(x + s * bdirs[k]);
                starts.push_back(x - s * bdirs[k]);
            }
        }
        const int ns = samples > 0 ? samples : prob_.mc_samples;
        const int head_steps = std::max(1, static_cast<int>(std::llround(prob_.h_semigroup / prob_.dt)));
        auto bundle = run_bundle(starts, ns, stream_salt, head_steps);

        auto combine = [&](double s, int offset) {
            // per-sample alpha phi + L0 phi with FD step s; returns (mean, se, hscale)
            RunningStat rs;
            for (int j = 0; j < ns; ++j) {
                const double p0 = bundle.per_sample(j, 0);
                const double pd_p = bundle.per_sample(j, offset);
                const double pd_m = bundle.per_sample(j, offset + 1);
                double val = prob_.alpha * p0 - dnorm * (pd_p - pd_m) / (2.0 * s);
                for (int k = 0; k < M; ++k) {
                    const double pk_p = bundle.per_sample(j, offset + 2 + 2 * k);
                    const double pk_m = bundle.per_sample(j, offset + 3 + 2 * k);
                    val -= 0.5 * bnorms[k] * bnorms[k] * (pk_p - 2.0 * p0 + pk_m) / (s * s);
                }
                rs.add(val);
            }
            // crude Hessian magnitude estimate (normalized directions) for the
            // trace tail bound
            double hscale = 0.0;
            for (int k = 0; k < M; ++k) {
                const double h2 = std::abs(bundle.per_sample.col(offset + 2 + 2 * k).mean() -
                                           2.0 * bundle.per_sample.col(0).mean() +
                                           bundle.per_sample.col(offset + 3 + 2 * k).mean()) /
                                  (s * s);
                hscale = std::max(hscale, h2);
            }
            return std::tuple<double, double, double>(rs.mean(), rs.standard_error(), hscale);
        };

        const int stride = 2 + 2 * M;
        auto [v1, se1, hs1] = combine(eps, 1);
        auto [v2, se2, hs2] = combine(2.0 * eps, 1 + stride);
        (void)se2;
        (void)hs2;

        L0Report rep;
        rep.value = v1;
        rep.se = se1;
        rep.fd_bias = std::abs(v1 - v2) / 3.0;
        rep.phi_value = bundle.phi[0].value;
        rep.phi_se = bundle.phi[0].se;
        rep.hessian_scale = hs1;
        double tail_norm_sq = 0.0;  // sum_{k > M} |B e_k|_H^2
        for (int k = M + 1; k <= noise_.num_modes(); ++k) {
            const double ck = noise_.amplitude(k);
            tail_norm_sq += ck * ck;
        }
        tail_norm_sq *= model_.field_norm_H_sq(base);
        rep.trace_tail = 0.5 * tail_norm_sq * hs1;
        double bsum_sq = 0.0;
        for (double b : bnorms) bsum_sq += b * b;
        rep.tail = bundle.phi[0].tail *
                   (prob_.alpha + dnorm / eps + 2.0 * bsum_sq / (eps * eps));
        rep.head = bundle.head;
        rep.base = bundle.per_sample.col(0);
        return rep;
    }

    struct ResidualReport {
        double phi = 0.0;
        double phi_se = 0.0;
        double g_value = 0.0;
        double r_direct = 0.0;
        double r_direct_bar = 0.0;   // 1-sigma-equivalent combined bar
        double r_semigroup = 0.0;
        double r_semigroup_bar = 0.0;
        bool direct_pass = false;
        bool semigroup_pass = false;
        bool consistent = false;
        double dt_bias = 0.0;
        double fd_bias = 0.0;
        double hessian_scale = 0.0;
        bool in_a_str = true;
    };

    /// Verifies alpha phi + L0^{lambda,n} phi = g at x by two routes: the
    /// finite-difference generator (r_direct) and the finite-lag Markov
    /// consistency identity
    ///   phi(x) = int_0^h e^{-alpha t} E g(u(t)) dt + e^{-alpha h} P_h phi(x),
    /// whose defect, per unit lag, is reported as r_semigroup (this is the
    /// spec's (P_h phi - phi)/h - (alpha phi - g) with the exact finite-h
    /// Taylor offset removed, so it targets zero at any h).
    ResidualReport residual_check(const Field& x, double dt_bias_hint = 0.0) const {
        ResidualReport rep;
        rep.in_a_str = a_str_member(model_, pot_, x);
        rep.g_value = prob_.g(model_, x);

        auto l0 = apply_L0(x);
        rep.phi = l0.phi_value;
        rep.phi_se = l0.phi_se;
        rep.fd_bias = l0.fd_bias;
        rep.hessian_scale = l0.hessian_scale;
        rep.dt_bias = dt_bias_hint;
        rep.r_direct = l0.value - rep.g_value;
        rep.r_direct_bar = l0.se + l0.fd_bias + l0.trace_tail + l0.tail + dt_bias_hint;
        rep.direct_pass = std::abs(rep.r_direct) <= 3.0 * rep.r_direct_bar;

        // --- semigroup route ---
        const double h = prob_.h_semigroup;
        const int h_steps = std::max(1, static_cast<int>(std::llround(h / prob_.dt)));
        const double h_eff = h_steps * prob_.dt;
        const int O = prob_.outer_samples;
        const int inner = std::max(200, prob_.mc_samples / 8);

        // outer draws of u(h; x), then inner phi estimates sharing one CRN bank
        std::vector<Field> ends(O, Field(x.size()));
        parallel_for(O, prob_.workers, [&](int o) {
            RngStream rng(seed_, stream::kOuterSemigroup, static_cast<std::uint64_t>(o));
            TrajectoryState s{0.0, x};
            for (int k = 0; k < h_steps; ++k)
                integrator_->step_regularized(s, ops_, integrator_->draw_increments(rng));
            ends[o] = s.u;
        });
        auto inner_bundle = run_bundle(ends, inner, /*stream_salt=*/977);
        // P_h phi estimate: mean over (inner x outer)
        Eigen::ArrayXd outer_mean(O);
        for (int o = 0; o < O; ++o) outer_mean[o] = inner_bundle.per_sample.col(o).mean();
        Eigen::ArrayXd inner_mean(inner);
        for (int j = 0; j < inner; ++j) inner_mean[j] = inner_bundle.per_sample.row(j).mean();
        const double Ph = outer_mean.mean();
        RunningStat so, si;
        for (int o = 0; o < O; ++o) so.add(outer_mean[o]);
        for (int j = 0; j < inner; ++j) si.add(inner_mean[j]);
        const double Ph_se = so.standard_error() + si.standard_error();

        // phi(x) - int_0^h from the main bundle's per-sample data
        RunningStat sj;
        for (int j = 0; j < l0.base.size(); ++j) sj.add(l0.base[j] - l0.head[j]);
        const double J = sj.mean();
        const double J_se = sj.standard_error();
        const double eah = std::exp(prob_.alpha * h_eff);
        rep.r_semigroup = (Ph - eah * J) / h_eff;
        const double sg_tail = (1.0 + eah) * prob_.g.sup_norm() *
                               std::exp(-prob_.alpha * icfg_.T) / prob_.alpha / h_eff;
        rep.r_semigroup_bar =
            std::sqrt(Ph_se * Ph_se + eah * eah * J_se * J_se) / h_eff + sg_tail + dt_bias_hint / h_eff;
        rep.semigroup_pass = std::abs(rep.r_semigroup) <= 3.0 * rep.r_semigroup_bar;
        rep.consistent = std::abs(rep.r_direct - rep.r_semigroup) <=
                         3.0 * std::sqrt(rep.r_direct_bar * rep.r_direct_bar +
                                         rep.r_semigroup_bar * rep.r_semigroup_bar);
        return rep;
    }

private:
    const SpatialModel& model_;
    PotentialSpec pot_;
    const NoiseFamily& noise_;
    KolmogorovProblem prob_;
    std::uint64_t seed_;
    SmoothedOperators ops_;
    IntegratorConfig icfg_;
    std::unique_ptr<SpdeIntegrator> integrator_;
};

// ---- Friedrichs scaling sweep ----

struct RatePoint {
    int n = 0;
    double lambda = 0.0;
    double drift_gap = 0.0;      // max over sample fields of |F_{l,n}(x) - F'(x)|_H
    double diff_gap_sq = 0.0;    // max over sample fields of |B_{l,n}(x) - B(x)|_HS^2
    double envelope = 0.0;       // (1 + n^{7/4} + n^{3d/4})(n^{-d} + n^{-g/2})
    double combined = 0.0;
};

struct RateTable {
    std::vector<RatePoint> points;
    double fitted_exponent = 0.0;  // log-log slope of combined vs n
};

/// Discrepancy ingredients along the scaling lambda_n = n^{-1/4}; the combined
/// series must decay like n^{-1/4} for the Friedrichs passage to the limit.
inline RateTable scaling_sweep(const SpatialModel& model, const PotentialSpec& pot,
                               const MollifierSpec& moll, const NoiseFamily& noise,
                               const std::vector<Field>& samples, const std::vector<int>& n_values,
                               double gamma = 4.0, double delta = 2.0) {
    RateTable table;
    std::vector<double> ns, cs;
    for (int n : n_values) {
        RatePoint pt;
        pt.n = n;
        pt.lambda = std::pow(static_cast<double>(n), -0.25);
        SmoothingParams sp;
        sp.lambda = pt.lambda;
        sp.n = n;
        sp.gamma = gamma;
        sp.delta = delta;
        SmoothedOperators ops(model, pot, moll, noise, sp);
        for (const Field& x : samples) {
            Field exact_drift(x.size());
            Field exact_shape(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                exact_drift[i] = eval_F_prime(pot, x[i]);
                exact_shape[i] = noise.shape(x[i]);
            }
            const Field dgap = ops.drift(x) - exact_drift;
            pt.drift_gap = std::max(pt.drift_gap, std::sqrt(model.field_norm_H_sq(dgap)));
            const Field bgap = ops.diffusion_base(x) - exact_shape;
            pt.diff_gap_sq = std::max(pt.diff_gap_sq,
                                      noise.sum_amp_sq() * model.field_norm_H_sq(bgap));
        }
        const double blow = 1.0 + std::pow(n, 1.75) + std::pow(n, 0.75 * delta);
        pt.envelope = blow * (std::pow(n, -delta) + std::pow(n, -0.5 * gamma));
        pt.combined = pt.envelope + pt.drift_gap + pt.diff_gap_sq;
        table.points.push_back(pt);
        ns.push_back(n);
        cs.push_back(pt.combined);
    }
    table.fitted_exponent = log_log_fit(ns, cs).slope;
    return table;
}

} // namespace saclab
