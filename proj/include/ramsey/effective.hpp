// effective.hpp: results for the adiabatically eliminated atom-only model.
//
// With the field eliminated the atom sees a resonant classical drive of Rabi
// frequency Omega = 2 eps g / kappa and decays at Gamma_eff = g^2/kappa + gamma
// (factor-2 dissipator convention). Its Bloch vector from |e> obeys
//   x' = -Gamma x + Omega z,  y' = -Gamma y,  z' = -Omega x - 2 Gamma (z + 1).

#pragma once

#include "ramsey/dynamics.hpp"
#include "ramsey/experiments.hpp"
#include "ramsey/thermo.hpp"

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

namespace ramsey {

struct BlochPoint {
    double sigma_z;
    Complex sigma_plus;
};

inline double rabi_frequency(const SystemParams& p) { return 2.0 * p.eps * p.g / p.kappa; }

// Closed-form solution of the (x, z) block; y stays zero from |e>.
inline BlochPoint damped_rabi_oracle(const SystemParams& p, double t) {
    if (!(p.kappa > 0.0)) throw std::invalid_argument("damped_rabi_oracle: kappa must be > 0");
    const double omega = rabi_frequency(p);
    const double gam = p.gamma_eff();

    // Fixed point of the inhomogeneous system.
    const double det = 2.0 * gam * gam + omega * omega;
    const double x_ss = det > 0.0 ? -2.0 * gam * omega / det : 0.0;
    const double z_ss = det > 0.0 ? -2.0 * gam * gam / det : 0.0;

    // exp(M t) = e^{mu t} [cosh(nu t) I + sinh(nu t)/nu (M - mu I)], written with
    // e^{(mu +- nu) t} so nothing overflows at long times.
    const Complex mu = -1.5 * gam;
    const Complex nu = std::sqrt(Complex(0.25 * gam * gam - omega * omega));
    Complex c, s;  // e^{mu t} cosh(nu t), e^{mu t} sinh(nu t)/nu
    if (std::abs(nu * t) < 1e-6) {
        const Complex em = std::exp(mu * t);
        const Complex nt2 = nu * nu * t * t;
        c = em * (1.0 + nt2 / 2.0);
        s = em * t * (1.0 + nt2 / 6.0);
    } else {
        const Complex ep = std::exp((mu + nu) * t);
        const Complex en = std::exp((mu - nu) * t);
        c = 0.5 * (ep + en);
        s = (ep - en) / (2.0 * nu);
    }
    // M - mu I = [[Gamma/2, Omega], [-Omega, -Gamma/2]]
    const double dx = 0.0 - x_ss, dz = 1.0 - z_ss;
    const Complex x = x_ss + c * dx + s * (0.5 * gam * dx + omega * dz);
    const Complex z = z_ss + c * dz + s * (-omega * dx - 0.5 * gam * dz);
    return BlochPoint{z.real(), Complex(0.5 * x.real(), 0.0)};
}

// ------------------------------------------------------------ t* (effective)

struct EffectiveTstar {
    double t_star;
    ComplexMatrix rho_at;  // state at t*
};

inline EffectiveTstar effective_tstar(const SystemParams& p_in, double tol = 1e-10) {
    const SystemParams p = p_in.with_picture(Picture::EffectiveAtom);
    const LindbladGenerator gen = build_generator(p);
    const double horizon = tstar_horizon(p);
    ComplexMatrix e = ComplexMatrix::Zero(2, 2);
    e(0, 0) = 1.0;
    Integrator integ(gen, e, tol);
    while (integ.time() < horizon) {
        const StepSegment seg = integ.step(horizon);
        const double z0 = sigma_z_of(*seg.y0), d0 = sigma_z_of(*seg.f0);
        const double z1 = sigma_z_of(*seg.y1), d1 = sigma_z_of(*seg.f1);
        const double tm = 0.5 * (seg.t0 + seg.t1);
        const double zm = hermite_value(seg.t0, seg.t1, z0, d0, z1, d1, tm);
        double root = -1.0;
        if (z1 <= 0.0)
            root = bisect_hermite_root(seg.t0, seg.t1, z0, d0, z1, d1);
        else if (zm <= 0.0)
            root = bisect_hermite_root(seg.t0, tm, z0, d0, zm, sigma_z_of(seg.eval_derivative(tm)));
        if (root >= 0.0) return EffectiveTstar{root, seg.eval(root)};
    }
    throw NoCrossing(horizon);
}

// ---------------------------------------------------------- crossing point

struct CrossingResult {
    double eps_over_kappa = 0.0;
    double g_cross_over_kappa = 0.0;
    double re_sigma_plus_at_tstar = 0.0;
    double signed_difference = 0.0;  // jq + jw at the crossing, signed fluxes
};

struct CrossingOptions {
    double g_tolerance = 1e-6;  // bisection width in g/kappa
    double tol = 1e-10;         // integrator tolerance
    int scan_points = 40;       // log grid over [1e-3 eps, 10 eps]
};

class NoCrossingFound : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// |J_Q| - |J_W| at t* for the effective model at coupling g.
inline double effective_flux_gap(double eps, double g, double tol, double* re_sp = nullptr,
                                 double* signed_sum = nullptr) {
    SystemParams p;
    p.g = g;
    p.eps = eps;
    p.picture = Picture::EffectiveAtom;
    const EffectiveTstar ts = effective_tstar(p, tol);
    const double jw = work_flux_norm(ts.rho_at, p);
    const double jq = heat_flux_norm_effective(ts.rho_at, p);
    if (re_sp) *re_sp = sigma_plus_of(ts.rho_at).real();
    if (signed_sum) *signed_sum = jq + jw;
    return std::abs(jq) - std::abs(jw);
}

inline CrossingResult crossing_point(double eps_over_kappa, const CrossingOptions& opt = {}) {
    if (!(eps_over_kappa > 0.0)) throw std::invalid_argument("crossing_point: eps must be > 0");
    const double eps = eps_over_kappa;
    const std::vector<double> grid = log_grid(1e-3 * eps, 10.0 * eps, opt.scan_points);
    double lo = grid.front();
    double f_lo = effective_flux_gap(eps, lo, opt.tol);
    std::optional<double> hi;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double f = effective_flux_gap(eps, grid[i], opt.tol);
        if ((f > 0.0) != (f_lo > 0.0)) {
            hi = grid[i];
            break;
        }
        lo = grid[i];
        f_lo = f;
    }
    if (!hi)
        throw NoCrossingFound("crossing_point: |J_Q| and |J_W| do not cross for g/kappa in [" +
                              std::to_string(grid.front()) + ", " + std::to_string(grid.back()) + "]");
    double a = lo, b = *hi;
    while (b - a > opt.g_tolerance) {
        const double mid = 0.5 * (a + b);
        const double f = effective_flux_gap(eps, mid, opt.tol);
        if ((f > 0.0) == (f_lo > 0.0))
            a = mid;
        else
            b = mid;
    }
    CrossingResult r;
    r.eps_over_kappa = eps;
    r.g_cross_over_kappa = 0.5 * (a + b);
    effective_flux_gap(eps, r.g_cross_over_kappa, opt.tol, &r.re_sigma_plus_at_tstar,
                       &r.signed_difference);
    if (r.g_cross_over_kappa > 0.25)
        warn("crossing_point: g_cross is not small against kappa; adiabatic elimination is unreliable");
    return r;
}

// ----------------------------------------------------------- critical drive

struct CriticalDriveOptions {
    std::vector<double> g_grid = default_g_grid();
    SweepOptions sweep{};
    double resolution = 0.05;
};

struct CriticalDriveResult {
    double threshold = 0.0;
    double lo = 0.0, hi = 0.0;  // final bracket
    std::vector<std::pair<double, bool>> probes;  // (eps, crosses)
    std::vector<SweepResult> sweeps;               // one per probe
};

// True when |J_Q| and |J_W| cross somewhere on the g grid at this drive.
inline bool drive_crosses(double eps, const CriticalDriveOptions& opt,
                          std::vector<SweepResult>* keep = nullptr) {
    SweepResult sweep = run_fig2(eps, opt.g_grid, opt.sweep);
    const bool crosses = flux_crossings(sweep) > 0;
    if (keep) keep->push_back(std::move(sweep));
    return crosses;
}

inline CriticalDriveResult critical_drive(double search_lo, double search_hi,
                                          const CriticalDriveOptions& opt = {}) {
    if (!(search_lo > 0.0 && search_hi > search_lo))
        throw std::invalid_argument("critical_drive: need 0 < lo < hi");
    CriticalDriveResult r;
    double lo = search_lo, hi = search_hi;
    const bool at_lo = drive_crosses(lo, opt, &r.sweeps);
    r.probes.emplace_back(lo, at_lo);
    const bool at_hi = drive_crosses(hi, opt, &r.sweeps);
    r.probes.emplace_back(hi, at_hi);
    if (at_lo == at_hi)
        throw std::invalid_argument("critical_drive: both ends of the search interval are in the " +
                                    std::string(at_lo ? "crossing" : "non-crossing") + " regime");
    while (hi - lo > opt.resolution) {
        const double mid = 0.5 * (lo + hi);
        const bool c = drive_crosses(mid, opt, &r.sweeps);
        r.probes.emplace_back(mid, c);
        if (c == at_lo)
            lo = mid;
        else
            hi = mid;
    }
    r.lo = lo;
    r.hi = hi;
    r.threshold = 0.5 * (lo + hi);
    return r;
}

}  // namespace ramsey
