#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "saclab/integrator.hpp"
#include "saclab/kolmogorov.hpp"
#include "saclab/observables.hpp"
#include "saclab/parallel.hpp"
#include "saclab/stats.hpp"

namespace saclab {

struct NamedObservable {
    std::string name;
    std::function<double(const SpatialModel&, const Field&)> fn;
};

struct TimeAverageConfig {
    double T = 50.0;
    double burn_in = 0.0;     // 0 => T/10
    int batches = 32;
    int snapshot_every = 0;   // steps between stored snapshots; 0 disables

    double effective_burn_in() const { return burn_in > 0.0 ? burn_in : T / 10.0; }
};

/// Krylov-Bogoliubov empirical measure: time averages of observables along a
/// single long trajectory, with batch-means error bars. Snapshots, when kept,
/// are decimated states after burn-in.
struct EmpiricalMeasure {
    std::vector<std::string> names;
    std::vector<Estimate> averages;
    std::vector<Field> snapshots;
    std::vector<double> snapshot_times;
    double burn_in = 0.0;
    double T = 0.0;
    std::size_t samples = 0;
    double max_abs_u = 0.0;  // over all post-burn-in states
};

inline EmpiricalMeasure krylov_bogoliubov(const SpdeIntegrator& integ, const Field& x0,
                                          const std::vector<NamedObservable>& observables,
                                          const TimeAverageConfig& cfg, RngStream& rng) {
    const double burn = cfg.effective_burn_in();
    if (!(cfg.T > burn)) throw std::invalid_argument("krylov_bogoliubov: horizon below burn-in");
    integ.check_admissible(x0);
    const SpatialModel& model = integ.model();
    const double dt = integ.config().dt;
    const int n_steps = static_cast<int>(std::llround(cfg.T / dt));
    const int burn_steps = static_cast<int>(std::llround(burn / dt));

    std::vector<std::vector<double>> series(observables.size());
    EmpiricalMeasure em;
    em.burn_in = burn;
    em.T = cfg.T;
    TrajectoryState s{0.0, x0};
    for (int k = 1; k <= n_steps; ++k) {
        integ.step(s, integ.draw_increments(rng));
        if (k <= burn_steps) continue;
        for (std::size_t i = 0; i < observables.size(); ++i)
            series[i].push_back(observables[i].fn(model, s.u));
        em.max_abs_u = std::max(em.max_abs_u, s.u.abs().maxCoeff());
        if (cfg.snapshot_every > 0 && (k - burn_steps) % cfg.snapshot_every == 0) {
            em.snapshots.push_back(s.u);
            em.snapshot_times.push_back(s.t);
        }
    }
    em.samples = series.empty() ? 0 : series[0].size();
    for (std::size_t i = 0; i < observables.size(); ++i) {
        em.names.push_back(observables[i].name);
        em.averages.push_back(batch_means(series[i], cfg.batches));
    }
    return em;
}

/// Support moments int (|x|_V^2 + |x|_Z^2 + |F'(x)|_H^2) d mu, with a Cauchy
/// stability check across doubling windows: the run is divided after burn-in
/// into nested windows of 1/4, 1/2 and full length; a moment is stable when
/// the last doubling moves its mean by less than max(3 SE, 5%).
struct MomentReport {
    std::vector<std::string> names;
    std::vector<Estimate> estimates;           // full-window batch means
    std::vector<std::array<double, 3>> window_means;
    std::vector<bool> stable;
    bool all_stable = false;
};

inline MomentReport support_moments(const SpdeIntegrator& integ, const Field& x0,
                                    const TimeAverageConfig& cfg, RngStream& rng) {
    const SpatialModel& model = integ.model();
    const PotentialSpec& pot = integ.potential();
    std::vector<NamedObservable> obs{
        {"H_sq", [](const SpatialModel& m, const Field& u) { return m.norms(u).H_sq; }},
        {"V_sq", [](const SpatialModel& m, const Field& u) { return m.norms(u).V_sq; }},
        {"Z_sq", [](const SpatialModel& m, const Field& u) { return m.norms(u).Z_sq; }},
        {"F_prime_sq",
         [&pot](const SpatialModel& m, const Field& u) { return drift_norm_sq(m, pot, u); }}};

    const double burn = cfg.effective_burn_in();
    const double dt = integ.config().dt;
    const int n_steps = static_cast<int>(std::llround(cfg.T / dt));
    const int burn_steps = static_cast<int>(std::llround(burn / dt));
    std::vector<std::vector<double>> series(obs.size());
    TrajectoryState s{0.0, x0};
    integ.check_admissible(x0);
    for (int k = 1; k <= n_steps; ++k) {
        integ.step(s, integ.draw_increments(rng));
        if (k <= burn_steps) continue;
        for (std::size_t i = 0; i < obs.size(); ++i)
            series[i].push_back(obs[i].fn(model, s.u));
    }

    MomentReport rep;
    rep.all_stable = true;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto& sr = series[i];
        const std::size_t n = sr.size();
        auto mean_to = [&](std::size_t m) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += sr[j];
            return acc / static_cast<double>(m);
        };
        std::array<double, 3> wm{mean_to(n / 4), mean_to(n / 2), mean_to(n)};
        const Estimate full = batch_means(sr, cfg.batches);
        const double drift_last = std::abs(wm[2] - wm[1]);
        const bool ok = std::isfinite(wm[2]) &&
                        drift_last <= std::max(3.0 * full.se, 0.05 * std::abs(wm[2]));
        rep.names.push_back(obs[i].name);
        rep.estimates.push_back(full);
        rep.window_means.push_back(wm);
        rep.stable.push_back(ok);
        rep.all_stable = rep.all_stable && ok;
    }
    return rep;
}

/// Synchronous-coupling mean-square contraction: the averaged series
/// t -> E|u^x(t) - u^y(t)|_H^2 with its log-linear fitted decay rate.
struct MixingEstimate {
    double fitted_rate = 0.0;
    double ci = 0.0;             // half-width from group-wise fits
    double theoretical_alpha0 = 0.0;
    bool gate_open = false;      // alpha0 > 0
    bool pass = false;           // fitted_rate >= alpha0 - ci
    double fit_t_lo = 0.0, fit_t_hi = 0.0;
    std::vector<double> times;
    std::vector<double> msd;     // mean squared difference
    std::vector<double> msd_se;
    bool degenerate = false;     // x0 == y0 handed in
};

inline MixingEstimate mixing_rate(const SpdeIntegrator& integ, const Field& x0, const Field& y0,
                                  int pairs, double fit_t_lo, int workers,
                                  double theoretical_alpha0) {
    MixingEstimate est;
    est.theoretical_alpha0 = theoretical_alpha0;
    est.gate_open = theoretical_alpha0 > 0.0;
    if (!est.gate_open) return est;

    const SpatialModel& model = integ.model();
    const int n_steps = integ.config().steps();
    const double dt = integ.config().dt;
    const int stride = std::max(1, n_steps / 512);  // recorded time resolution

    std::vector<int> rec_steps;
    for (int k = stride; k <= n_steps; k += stride) rec_steps.push_back(k);
    const int nrec = static_cast<int>(rec_steps.size());
    Eigen::MatrixXd msd(pairs, nrec);

    parallel_for(pairs, workers, [&](int p) {
        RngStream rng = integ.trajectory_stream(static_cast<std::uint64_t>(p));
        TrajectoryState a{0.0, x0}, b{0.0, y0};
        int r = 0;
        for (int k = 1; k <= n_steps; ++k) {
            const Eigen::ArrayXd dW = integ.draw_increments(rng);
            integ.step(a, dW);
            integ.step(b, dW);
            if (r < nrec && k == rec_steps[r]) {
                msd(p, r) = model.field_norm_H_sq(Field(a.u - b.u));
                ++r;
            }
        }
    });

    if ((x0 - y0).abs().maxCoeff() == 0.0) {
        est.degenerate = true;
        est.pass = msd.maxCoeff() == 0.0;
        return est;
    }

    est.fit_t_lo = fit_t_lo;
    est.fit_t_hi = integ.config().T;
    std::vector<double> ts, lm;
    for (int r = 0; r < nrec; ++r) {
        const double t = rec_steps[r] * dt;
        RunningStat rs;
        for (int p = 0; p < pairs; ++p) rs.add(msd(p, r));
        est.times.push_back(t);
        est.msd.push_back(rs.mean());
        est.msd_se.push_back(rs.standard_error());
        if (t >= fit_t_lo && rs.mean() > 0.0) {
            ts.push_back(t);
            lm.push_back(std::log(rs.mean()));
        }
    }
    if (ts.size() < 3) throw std::runtime_error("mixing_rate: fit window too short");
    est.fitted_rate = -linear_fit(ts, lm).slope;

    // CI from fits over disjoint seed groups
    const int groups = std::min(8, pairs);
    RunningStat gslopes;
    for (int gidx = 0; gidx < groups; ++gidx) {
        std::vector<double> gl;
        std::vector<double> gt;
        for (int r = 0; r < nrec; ++r) {
            const double t = rec_steps[r] * dt;
            if (t < fit_t_lo) continue;
            RunningStat rs;
            for (int p = gidx; p < pairs; p += groups) rs.add(msd(p, r));
            if (rs.mean() > 0.0) {
                gt.push_back(t);
                gl.push_back(std::log(rs.mean()));
            }
        }
        if (gt.size() >= 3) gslopes.add(-linear_fit(gt, gl).slope);
    }
    est.ci = gslopes.count() > 1 ? 2.0 * gslopes.standard_error() : 0.0;
    est.pass = est.fitted_rate >= theoretical_alpha0 - est.ci;
    return est;
}

/// max_x |P_t g(x) - time-average| against the envelope
/// Lip(g) 2 sqrt(|D|) e^{-alpha0 t / 2}, at each requested time.
struct StrongMixingReport {
    std::vector<double> times;
    std::vector<double> deviation;     // max over initial points
    std::vector<double> deviation_se;
    std::vector<double> envelope;
    double limit_value = 0.0;          // long-run time average of g
    bool pass = false;
};

inline StrongMixingReport strong_mixing_check(const SpdeIntegrator& integ,
                                              const std::vector<Field>& points,
                                              const NamedObservable& g, double lip_g,
                                              const std::vector<double>& t_grid, int seeds,
                                              double theoretical_alpha0, double limit_value,
                                              int workers) {
    if (!(theoretical_alpha0 > 0.0))
        throw std::invalid_argument("strong_mixing_check: requires alpha0 > 0");
    const SpatialModel& model = integ.model();
    const double dt = integ.config().dt;
    StrongMixingReport rep;
    rep.limit_value = limit_value;
    std::vector<int> t_steps;
    for (double t : t_grid) t_steps.push_back(static_cast<int>(std::llround(t / dt)));
    const int n_steps = *std::max_element(t_steps.begin(), t_steps.end());

    // ensemble mean of g(u(t;x)) for each start and time
    Eigen::MatrixXd mean(points.size(), t_grid.size());
    Eigen::MatrixXd se(points.size(), t_grid.size());
    for (std::size_t p = 0; p < points.size(); ++p) {
        std::vector<RunningStat> acc(t_grid.size());
        std::vector<std::vector<double>> vals(seeds, std::vector<double>(t_grid.size()));
        parallel_for(seeds, workers, [&](int sidx) {
            RngStream rng = integ.trajectory_stream(
                static_cast<std::uint64_t>(p) * 1000003u + static_cast<std::uint64_t>(sidx));
            TrajectoryState s{0.0, points[p]};
            std::size_t r = 0;
            for (int k = 1; k <= n_steps && r < t_steps.size(); ++k) {
                integ.step(s, integ.draw_increments(rng));
                while (r < t_steps.size() && k == t_steps[r]) {
                    vals[sidx][r] = g.fn(model, s.u);
                    ++r;
                }
            }
        });
        for (int sidx = 0; sidx < seeds; ++sidx)
            for (std::size_t r = 0; r < t_grid.size(); ++r) acc[r].add(vals[sidx][r]);
        for (std::size_t r = 0; r < t_grid.size(); ++r) {
            mean(p, r) = acc[r].mean();
            se(p, r) = acc[r].standard_error();
        }
    }

    rep.pass = true;
    for (std::size_t r = 0; r < t_grid.size(); ++r) {
        double dev = 0.0, dev_se = 0.0;
        for (std::size_t p = 0; p < points.size(); ++p) {
            const double d = std::abs(mean(p, r) - limit_value);
            if (d > dev) {
                dev = d;
                dev_se = se(p, r);
            }
        }
        const double env =
            lip_g * 2.0 * std::sqrt(model.volume()) * std::exp(-0.5 * theoretical_alpha0 * t_grid[r]);
        rep.times.push_back(t_grid[r]);
        rep.deviation.push_back(dev);
        rep.deviation_se.push_back(dev_se);
        rep.envelope.push_back(env);
        rep.pass = rep.pass && dev <= env + 3.0 * dev_se;
    }
    return rep;
}

/// Single-trajectory ergodic average vs an ensemble average of terminal
/// values restarted from empirical-measure snapshots; both estimate
/// int g d mu and must agree within combined error bars.
struct ErgodicComparison {
    Estimate time_average;
    Estimate ensemble_average;
    double discrepancy = 0.0;
    double combined_se = 0.0;
    bool pass = false;
};

inline ErgodicComparison ergodic_average_vs_ensemble(const SpdeIntegrator& integ, const Field& x0,
                                                     const TimeAverageConfig& cfg,
                                                     const NamedObservable& g, int n_seeds,
                                                     double relax_T, int workers) {
    TimeAverageConfig snap_cfg = cfg;
    snap_cfg.snapshot_every = std::max(1, static_cast<int>(std::llround(cfg.T / integ.config().dt)) /
                                                std::max(2 * n_seeds, 8));
    RngStream rng = integ.trajectory_stream(0);
    EmpiricalMeasure em = krylov_bogoliubov(integ, x0, {g}, snap_cfg, rng);

    ErgodicComparison cmp;
    cmp.time_average = em.averages[0];

    const int navail = static_cast<int>(em.snapshots.size());
    const int use = std::min(n_seeds, navail);
    const int relax_steps = std::max(1, static_cast<int>(std::llround(relax_T / integ.config().dt)));
    std::vector<double> terminal(use);
    parallel_for(use, workers, [&](int sidx) {
        RngStream r2 = integ.trajectory_stream(static_cast<std::uint64_t>(sidx) + 1);
        TrajectoryState s{0.0, em.snapshots[sidx * navail / use]};
        for (int k = 0; k < relax_steps; ++k) integ.step(s, integ.draw_increments(r2));
        terminal[sidx] = g.fn(integ.model(), s.u);
    });
    RunningStat rs;
    for (double v : terminal) rs.add(v);
    cmp.ensemble_average = {rs.mean(), rs.standard_error()};
    cmp.discrepancy = std::abs(cmp.time_average.value - cmp.ensemble_average.value);
    cmp.combined_se = std::sqrt(cmp.time_average.se * cmp.time_average.se +
                                cmp.ensemble_average.se * cmp.ensemble_average.se);
    cmp.pass = cmp.discrepancy <= 3.0 * std::max(cmp.combined_se, 1e-12);
    return cmp;
}

} // namespace saclab
