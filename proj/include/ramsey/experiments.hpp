// experiments.hpp: figure pipelines. Time series of the two limiting regimes,
// g/kappa sweeps sampled at the null-inversion time t*, and photon-flux curves.
//
// Every reported number passes the truncation gate: the same run repeated
// with n_max + 5 must agree to gate_tol, otherwise n_max is raised by 5 (up to
// the cap) and the comparison repeated.

#pragma once

#include "ramsey/dynamics.hpp"
#include "ramsey/hilbert.hpp"
#include "ramsey/thermo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ramsey {

class NoCrossing : public std::runtime_error {
  public:
    NoCrossing(double horizon)
        : std::runtime_error("<sigma_z> never reaches zero before t=" + std::to_string(horizon)),
          horizon_(horizon) {}
    double horizon() const noexcept { return horizon_; }

  private:
    double horizon_;
};

// Root of the cubic Hermite sigma_z(t) on [t0, t1] given sigma_z(t0) > 0 >= sigma_z(t1).
inline double bisect_hermite_root(double t0, double t1, double z0, double dz0, double z1,
                                  double dz1) {
    double lo = t0, hi = t1;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double z = hermite_value(t0, t1, z0, dz0, z1, dz1, mid);
        if (z > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    // hi always satisfies z <= 0; pick whichever endpoint is closer to zero.
    const double zl = hermite_value(t0, t1, z0, dz0, z1, dz1, lo);
    const double zh = hermite_value(t0, t1, z0, dz0, z1, dz1, hi);
    return std::abs(zl) < std::abs(zh) ? lo : hi;
}

// First downward zero of <sigma_z> on a stored trajectory: bracket on the
// knots, then bisect the dense output.
inline double find_tstar(const Trajectory& traj) {
    if (traj.empty()) throw std::invalid_argument("find_tstar: empty trajectory");
    auto z_at = [&](const ComplexMatrix& m) { return sigma_z_of(reduce_to_atom(m, traj.cutoff())); };
    if (z_at(traj.knot(0).rho) <= 0.0)
        throw std::invalid_argument("find_tstar: trajectory must start with <sigma_z> > 0");
    for (std::size_t k = 1; k < traj.size(); ++k) {
        const Knot& a = traj.knot(k - 1);
        const Knot& b = traj.knot(k);
        const double z0 = z_at(a.rho), z1 = z_at(b.rho);
        const double d0 = z_at(a.drho), d1 = z_at(b.drho);
        const double zmid = hermite_value(a.t, b.t, z0, d0, z1, d1, 0.5 * (a.t + b.t));
        if (z1 <= 0.0) return bisect_hermite_root(a.t, b.t, z0, d0, z1, d1);
        if (zmid <= 0.0) {
            const double tm = 0.5 * (a.t + b.t);
            const double dm = sigma_z_of(reduce_to_atom(
                traj.segment(k - 1).eval_derivative(tm), traj.cutoff()));
            return bisect_hermite_root(a.t, tm, z0, d0, zmid, dm);
        }
    }
    throw NoCrossing(traj.t_end());
}

// Integration horizon for a t* search: twenty times the longer of the
// effective-Rabi and vacuum-Rabi quarter periods.
inline double tstar_horizon(const SystemParams& p) {
    double t = std::numbers::pi / (4.0 * p.g);
    if (p.eps > 0.0) t = std::max(t, std::numbers::pi * p.kappa / (4.0 * p.eps * p.g));
    return 20.0 * t;
}

struct GateOptions {
    bool enabled = true;
    int n_max_start = 15;
    int n_max_step = 5;
    int n_max_cap = 40;
    double tolerance = 1e-6;
};

struct RunOptions {
    double tol = 1e-9;
    GateOptions gate{};
};

// --------------------------------------------------------------- one point

// Displaced-picture run from |e>|0> up to the first null inversion.
struct TstarRun {
    std::optional<double> t_star;
    FluxSample at_tstar;          // fluxes and atomic observables at t*
    double energy_residual = 0.0; // first-law residual over the run
    double horizon = 0.0;
    std::size_t steps = 0;
};

inline TstarRun run_to_tstar(const SystemParams& p_in, double tol) {
    const SystemParams p = p_in.with_picture(Picture::Displaced);
    const LindbladGenerator gen = build_generator(p);
    const LindbladGenerator heat = heat_generator(p);
    const int fd = p.cutoff.dim();
    TstarRun run;
    run.horizon = tstar_horizon(p);

    Integrator integ(gen, DensityMatrix::excited_vacuum(p.cutoff).matrix(), tol);
    Trajectory atom(std::nullopt);
    std::vector<FluxSample> samples;
    auto record = [&](double t, const ComplexMatrix& y, const ComplexMatrix& f) {
        ComplexMatrix a = partial_trace_field(y, fd);
        (void)DensityMatrix::atom(a, integration_tolerances(tol));
        samples.push_back(flux_sample_full(t, y, heat, p));
        atom.push(t, std::move(a), partial_trace_field(f, fd));
    };
    record(0.0, integ.state(), integ.derivative());

    while (integ.time() < run.horizon) {
        const StepSegment seg = integ.step(run.horizon);
        check_step_state(*seg.y1, seg.t1, tol);
        const double z0 = sigma_z_of(partial_trace_field(*seg.y0, fd));
        const double d0 = sigma_z_of(partial_trace_field(*seg.f0, fd));
        const double z1 = sigma_z_of(partial_trace_field(*seg.y1, fd));
        const double d1 = sigma_z_of(partial_trace_field(*seg.f1, fd));
        double t_root = -1.0;
        if (z1 <= 0.0) {
            t_root = bisect_hermite_root(seg.t0, seg.t1, z0, d0, z1, d1);
        } else if (hermite_value(seg.t0, seg.t1, z0, d0, z1, d1, 0.5 * (seg.t0 + seg.t1)) <= 0.0) {
            const double tm = 0.5 * (seg.t0 + seg.t1);
            t_root = bisect_hermite_root(
                seg.t0, tm, z0, d0, hermite_value(seg.t0, seg.t1, z0, d0, z1, d1, tm),
                sigma_z_of(partial_trace_field(seg.eval_derivative(tm), fd)));
        }
        if (t_root >= 0.0) {
            // Keep the energy-balance stencil inside the integrated range.
            record(seg.t1, *seg.y1, *seg.f1);
            const ComplexMatrix rho_star = seg.eval(t_root);
            const DensityMatrix checked = DensityMatrix::composite(rho_star, p.cutoff,
                                                                   integration_tolerances(tol));
            run.t_star = t_root;
            run.at_tstar = flux_sample_full(t_root, checked.matrix(), heat, p);
            samples.push_back(run.at_tstar);
            break;
        }
        record(seg.t1, *seg.y1, *seg.f1);
    }
    run.steps = integ.accepted_steps();
    run.energy_residual = energy_balance(atom, samples, p);
    return run;
}

struct SweepRow {
    double g_over_kappa = 0.0;
    std::optional<double> t_star;
    double entropy_norm = 0.0;
    double jw_norm = 0.0;
    double jq_norm = 0.0;
    double n_flux = 0.0;
    double re_sigma_plus = 0.0;
    double sigma_z_at_tstar = 0.0;
    double energy_residual = 0.0;
    double gate_drift = 0.0;
    int n_max = 0;
    bool converged = false;
    std::string error;  // empty unless the point failed
};

inline double relative_drift(double a, double b) {
    return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

// Largest disagreement between two runs of the same point at different
// cutoffs. Bounded quantities are compared absolutely, t* and n_flux
// relatively.
inline double gate_drift(const TstarRun& a, const TstarRun& b) {
    if (a.t_star.has_value() != b.t_star.has_value()) return std::numeric_limits<double>::infinity();
    if (!a.t_star) return 0.0;
    const FluxSample& x = a.at_tstar;
    const FluxSample& y = b.at_tstar;
    double d = relative_drift(*a.t_star, *b.t_star);
    for (auto [u, v] : {std::pair{x.jw_norm, y.jw_norm}, std::pair{x.jq_norm, y.jq_norm},
                        std::pair{x.entropy_norm(), y.entropy_norm()},
                        std::pair{x.re_sigma_plus, y.re_sigma_plus},
                        std::pair{x.im_sigma_plus, y.im_sigma_plus}})
        d = std::max(d, std::abs(u - v));
    return d;
}

inline SweepRow sweep_point(double eps, double g, const RunOptions& opt) {
    SweepRow row;
    row.g_over_kappa = g;
    SystemParams p;
    p.g = g;
    p.eps = eps;
    p.picture = Picture::Displaced;
    try {
        int n = opt.gate.n_max_start;
        TstarRun base = run_to_tstar(p.with_cutoff(FockCutoff(n)), opt.tol);
        bool passed = !opt.gate.enabled;
        double drift = 0.0;
        while (opt.gate.enabled) {
            TstarRun check = run_to_tstar(p.with_cutoff(FockCutoff(n + opt.gate.n_max_step)), opt.tol);
            drift = gate_drift(base, check);
            if (drift < opt.gate.tolerance) {
                passed = true;
                break;
            }
            if (n + 2 * opt.gate.n_max_step > opt.gate.n_max_cap) break;
            n += opt.gate.n_max_step;
            base = std::move(check);
        }
        row.n_max = n;
        row.gate_drift = drift;
        row.t_star = base.t_star;
        row.energy_residual = base.energy_residual;
        if (base.t_star) {
            const FluxSample& s = base.at_tstar;
            row.entropy_norm = s.entropy_norm();
            row.jw_norm = s.jw_norm;
            row.jq_norm = s.jq_norm;
            row.re_sigma_plus = s.re_sigma_plus;
            row.sigma_z_at_tstar = s.sigma_z;
            row.n_flux = photon_accounting(*base.t_star, p).n_flux;
        } else {
            row.error = "no null inversion before t=" + std::to_string(base.horizon);
        }
        row.converged = passed && base.t_star.has_value();
    } catch (const std::exception& e) {
        row.error = e.what();
        row.converged = false;
    }
    return row;
}

// ------------------------------------------------------------------ sweeps

// Runs fn(i) for i in [0, n) on up to `workers` threads.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    const std::size_t nthreads = std::min<std::size_t>(std::max(1, workers), n);
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(nthreads);
    for (std::size_t w = 0; w < nthreads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
}

inline std::vector<double> log_grid(double lo, double hi, int points) {
    if (!(lo > 0.0 && hi > lo) || points < 2)
        throw std::invalid_argument("log_grid: need 0 < lo < hi and at least 2 points");
    std::vector<double> g(static_cast<std::size_t>(points));
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < points; ++i)
        g[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (points - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

inline std::vector<double> default_g_grid() { return log_grid(1e-3, 1e2, 60); }

struct SweepOptions {
    RunOptions run{};
    int workers = 1;
};

struct SweepResult {
    double eps_over_kappa = 0.0;
    std::vector<SweepRow> rows;  // ascending g_over_kappa
};

inline SweepResult run_fig2(double eps_over_kappa, const std::vector<double>& g_grid,
                            const SweepOptions& opt = {}) {
    if (!(eps_over_kappa >= 0.0)) throw std::invalid_argument("run_fig2: eps must be >= 0");
    for (std::size_t i = 0; i < g_grid.size(); ++i) {
        if (!(g_grid[i] > 0.0)) throw std::invalid_argument("run_fig2: g grid must be positive");
        if (i > 0 && !(g_grid[i] > g_grid[i - 1]))
            throw std::invalid_argument("run_fig2: g grid must be ascending");
    }
    SweepResult res;
    res.eps_over_kappa = eps_over_kappa;
    res.rows.resize(g_grid.size());
    parallel_for(g_grid.size(), opt.workers, [&](std::size_t i) {
        res.rows[i] = sweep_point(eps_over_kappa, g_grid[i], opt.run);
    });
    return res;
}

// Fixed n_cav = (eps/kappa)^2 = 1, so n_flux = (kappa t*)^2.
inline SweepResult run_fig3(const std::vector<double>& g_grid, const SweepOptions& opt = {}) {
    return run_fig2(1.0, g_grid, opt);
}

// Number of sign changes of |jq| - |jw| across the rows that reached t*.
inline int flux_crossings(const SweepResult& sweep) {
    int changes = 0;
    std::optional<bool> prev;
    for (const auto& r : sweep.rows) {
        if (!r.t_star) continue;
        const double d = std::abs(r.jq_norm) - std::abs(r.jw_norm);
        if (d == 0.0) continue;
        const bool positive = d > 0.0;
        if (prev && *prev != positive) ++changes;
        prev = positive;
    }
    return changes;
}

// Linear interpolation (in log g) of the first |jq| = |jw| point.
inline std::optional<double> first_crossing_g(const SweepResult& sweep) {
    const SweepRow* prev = nullptr;
    for (const auto& r : sweep.rows) {
        if (!r.t_star) continue;
        if (prev) {
            const double d0 = std::abs(prev->jq_norm) - std::abs(prev->jw_norm);
            const double d1 = std::abs(r.jq_norm) - std::abs(r.jw_norm);
            if ((d0 < 0) != (d1 < 0)) {
                const double x0 = std::log(prev->g_over_kappa), x1 = std::log(r.g_over_kappa);
                return std::exp(x0 + (x1 - x0) * d0 / (d0 - d1));
            }
        }
        prev = &r;
    }
    return std::nullopt;
}

// ------------------------------------------------------------------ fig 1

enum class Fig1Regime { BD, CE };

inline const char* to_string(Fig1Regime r) { return r == Fig1Regime::BD ? "b_d" : "c_e"; }

inline Fig1Regime fig1_regime_from_string(std::string_view s) {
    if (s == "b_d") return Fig1Regime::BD;
    if (s == "c_e") return Fig1Regime::CE;
    throw std::invalid_argument("unknown fig1 regime '" + std::string(s) + "' (expected b_d or c_e)");
}

inline SystemParams fig1_params(Fig1Regime r) {
    SystemParams p;
    p.picture = Picture::Displaced;
    if (r == Fig1Regime::BD) {
        p.g = 1e-3;
        p.eps = 1.0;
    } else {
        p.g = 1.0;
        p.eps = 1e-3;
    }
    return p;
}

struct Fig1Options {
    double gt_max = 2.0 * std::numbers::pi;
    int samples = 401;
    RunOptions run{};
};

struct TimeSeries {
    std::vector<FluxSample> samples;
    double energy_residual = 0.0;
    std::size_t steps = 0;
};

// Displaced-picture run from |e>|0> sampled on a uniform time grid.
inline TimeSeries sample_displaced(const SystemParams& p, double t_end, int samples, double tol) {
    if (samples < 2) throw std::invalid_argument("sample_displaced: need at least 2 samples");
    const LindbladGenerator gen = build_generator(p);
    const LindbladGenerator heat = heat_generator(p);
    const int fd = p.cutoff.dim();
    const StateTolerances lim = integration_tolerances(tol);
    TimeSeries out;
    Integrator integ(gen, DensityMatrix::excited_vacuum(p.cutoff).matrix(), tol);
    Trajectory atom(std::nullopt);
    atom.push(0.0, partial_trace_field(integ.state(), fd), partial_trace_field(integ.derivative(), fd));
    out.samples.push_back(flux_sample_full(0.0, integ.state(), heat, p));

    int next = 1;
    auto t_of = [&](int i) { return i == samples - 1 ? t_end : t_end * i / (samples - 1); };
    while (next < samples) {
        const StepSegment seg = integ.step(t_end);
        check_step_state(*seg.y1, seg.t1, tol);
        ComplexMatrix a = partial_trace_field(*seg.y1, fd);
        (void)DensityMatrix::atom(a, lim);
        atom.push(seg.t1, std::move(a), partial_trace_field(*seg.f1, fd));
        while (next < samples && t_of(next) <= seg.t1) {
            const double t = t_of(next);
            const ComplexMatrix rho = seg.eval(t);
            (void)DensityMatrix::composite(rho, p.cutoff, lim);
            out.samples.push_back(flux_sample_full(t, rho, heat, p));
            ++next;
        }
    }
    out.steps = integ.accepted_steps();
    out.energy_residual = energy_balance(atom, out.samples, p);
    return out;
}

inline double series_drift(const TimeSeries& a, const TimeSeries& b) {
    if (a.samples.size() != b.samples.size()) return std::numeric_limits<double>::infinity();
    double d = 0.0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        const FluxSample& x = a.samples[i];
        const FluxSample& y = b.samples[i];
        for (auto [u, v] : {std::pair{x.sigma_z, y.sigma_z}, std::pair{x.jw_norm, y.jw_norm},
                            std::pair{x.jq_norm, y.jq_norm},
                            std::pair{x.entropy_norm(), y.entropy_norm()},
                            std::pair{x.re_sigma_plus, y.re_sigma_plus},
                            std::pair{x.im_sigma_plus, y.im_sigma_plus}})
            d = std::max(d, std::abs(u - v));
    }
    return d;
}

struct SeriesResult {
    SystemParams params;  // cutoff is the one that passed the gate
    TimeSeries series;
    double gate_drift = 0.0;
    bool converged = false;
};

// Effective or rotating-frame run from |e>(|0>) sampled on a uniform time
// grid. Fluxes are only defined for the effective model; rotating-frame
// samples carry NaN there.
inline TimeSeries sample_atom_series(const SystemParams& p, double t_end, int samples, double tol) {
    if (samples < 2) throw std::invalid_argument("sample_atom_series: need at least 2 samples");
    const bool eff = p.picture == Picture::EffectiveAtom;
    DensityMatrix rho0 = DensityMatrix::excited_vacuum(p.cutoff);
    if (eff) rho0 = partial_trace_field(rho0);
    EvolveOptions eo;
    eo.record = Record::Atom;
    const Trajectory traj = evolve(build_generator(p), rho0, t_end, tol, eo);
    TimeSeries out;
    for (int i = 0; i < samples; ++i) {
        const double t = i == samples - 1 ? t_end : t_end * i / (samples - 1);
        const ComplexMatrix a = traj.interpolate(t);
        if (eff) {
            out.samples.push_back(flux_sample_effective(t, a, p));
        } else {
            FluxSample s = atom_observables(t, a);
            s.jw_norm = s.jq_norm = std::numeric_limits<double>::quiet_NaN();
            out.samples.push_back(s);
        }
    }
    out.steps = traj.size() - 1;
    if (eff && p.g > 0.0) out.energy_residual = energy_balance(traj, out.samples, p);
    return out;
}

inline TimeSeries sample_series(const SystemParams& p, double t_end, int samples, double tol) {
    return p.picture == Picture::Displaced ? sample_displaced(p, t_end, samples, tol)
                                           : sample_atom_series(p, t_end, samples, tol);
}

// Runs a time series under the truncation gate. The effective model has no
// field and is run once.
inline SeriesResult gated_series(const SystemParams& p_in, double t_end, int samples,
                                 const RunOptions& opt) {
    p_in.validate();
    if (!(t_end > 0.0)) throw std::invalid_argument("gated_series: t_end must be > 0");
    SeriesResult res;
    int n = opt.gate.n_max_start;
    SystemParams p = p_in.with_cutoff(FockCutoff(n));
    TimeSeries base = sample_series(p, t_end, samples, opt.tol);
    bool passed = !opt.gate.enabled || p.picture == Picture::EffectiveAtom;
    while (!passed) {
        TimeSeries check =
            sample_series(p.with_cutoff(FockCutoff(n + opt.gate.n_max_step)), t_end, samples, opt.tol);
        res.gate_drift = series_drift(base, check);
        if (res.gate_drift < opt.gate.tolerance) {
            passed = true;
            break;
        }
        if (n + 2 * opt.gate.n_max_step > opt.gate.n_max_cap) break;
        n += opt.gate.n_max_step;
        p = p.with_cutoff(FockCutoff(n));
        base = std::move(check);
    }
    res.params = p;
    res.series = std::move(base);
    res.converged = passed;
    return res;
}

inline SeriesResult run_fig1(Fig1Regime regime, const Fig1Options& opt = {}) {
    const SystemParams p = fig1_params(regime);
    if (!(opt.gt_max > 0.0)) throw std::invalid_argument("run_fig1: gt_max must be > 0");
    return gated_series(p, opt.gt_max / p.g, opt.samples, opt.run);
}

}  // namespace ramsey
