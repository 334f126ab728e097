// thermo.hpp: work and heat fluxes on the atom, first-law residual, photon
// bookkeeping.
//
// Energies are measured with the bare atomic energy (omega/2) sigma_z and every
// flux is reported normalized by omega*g, so omega never takes a numeric value.
// Work is the part of d<(omega/2) sigma_z>/dt generated by the semiclassical
// drive H_SC; heat is everything else (JC exchange plus both dissipators),
// traced over the field.

#pragma once

#include "ramsey/dynamics.hpp"
#include "ramsey/hilbert.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace ramsey {

struct FluxSample {
    double t = 0.0;
    double jw_norm = 0.0;   // J_W / (omega g)
    double jq_norm = 0.0;   // J_Q / (omega g)
    double entropy = 0.0;   // nats
    double sigma_z = 0.0;
    double re_sigma_plus = 0.0;
    double im_sigma_plus = 0.0;

    double entropy_norm() const { return entropy / std::numbers::ln2; }
};

struct PhotonAccounting {
    double n_flux = 0.0;  // photons that crossed the cavity, (eps t)^2
    double n_cav = 0.0;   // steady intra-cavity photons, (eps/kappa)^2
};

inline double work_flux_norm(const ComplexMatrix& rho_at, const SystemParams& p) {
    if (p.kappa == 0.0) return 0.0;  // no drive survives in the displaced frame
    return -2.0 * (p.eps / p.kappa) * sigma_plus_of(rho_at).real();
}

inline double work_flux_norm(const DensityMatrix& rho_at, const SystemParams& p) {
    if (rho_at.space() != Space::AtomOnly)
        throw std::invalid_argument("work_flux_norm: expects an atom-only state");
    return work_flux_norm(rho_at.matrix(), p);
}

// The heat part of the displaced generator: H_JC plus both dissipators.
inline LindbladGenerator heat_generator(const SystemParams& p) {
    return LindbladGenerator(displaced_hamiltonian(p).jc, composite_collapse_terms(p), p.cutoff);
}

inline double heat_flux_norm_full(const ComplexMatrix& rho_tilde, const LindbladGenerator& heat,
                                  const SystemParams& p) {
    if (p.g == 0.0) throw std::invalid_argument("heat_flux_norm_full: normalization needs g > 0");
    const ComplexMatrix d_at = partial_trace_field(heat.apply(rho_tilde), p.cutoff.dim());
    return 0.5 * sigma_z_of(d_at) / p.g;
}

inline double heat_flux_norm_full(const DensityMatrix& rho_tilde, const SystemParams& p) {
    if (p.picture != Picture::Displaced)
        throw std::invalid_argument("heat_flux_norm_full: requires a displaced-picture state");
    if (rho_tilde.space() != Space::Composite || !(*rho_tilde.cutoff() == p.cutoff))
        throw std::invalid_argument("heat_flux_norm_full: state does not match the parameters");
    return heat_flux_norm_full(rho_tilde.matrix(), heat_generator(p), p);
}

// Adiabatically eliminated model; the g^3 Im<sigma+> term of the full
// expression is subleading in g/omega and left out.
inline double heat_flux_norm_effective(const ComplexMatrix& rho_at, const SystemParams& p) {
    const double pe = rho_at(0, 0).real();
    if (p.g == 0.0) {
        if (p.gamma == 0.0 || pe == 0.0) return 0.0;
        throw std::invalid_argument("heat_flux_norm_effective: normalization needs g > 0");
    }
    double jq = -2.0 * (p.g / p.kappa) * pe;
    if (p.gamma > 0.0) jq -= 2.0 * (p.gamma / p.g) * pe;
    return jq;
}

inline double heat_flux_norm_effective(const DensityMatrix& rho_at, const SystemParams& p) {
    if (rho_at.space() != Space::AtomOnly)
        throw std::invalid_argument("heat_flux_norm_effective: expects an atom-only state");
    return heat_flux_norm_effective(rho_at.matrix(), p);
}

inline FluxSample atom_observables(double t, const ComplexMatrix& rho_at) {
    FluxSample s;
    s.t = t;
    s.sigma_z = sigma_z_of(rho_at);
    const Complex sp = sigma_plus_of(rho_at);
    s.re_sigma_plus = sp.real();
    s.im_sigma_plus = sp.imag();
    s.entropy = von_neumann_entropy(rho_at);
    return s;
}

// Flux sample from a displaced-picture composite state.
inline FluxSample flux_sample_full(double t, const ComplexMatrix& rho_tilde,
                                   const LindbladGenerator& heat, const SystemParams& p) {
    const ComplexMatrix rho_at = partial_trace_field(rho_tilde, p.cutoff.dim());
    FluxSample s = atom_observables(t, rho_at);
    s.jw_norm = work_flux_norm(rho_at, p);
    s.jq_norm = heat_flux_norm_full(rho_tilde, heat, p);
    return s;
}

inline FluxSample flux_sample_effective(double t, const ComplexMatrix& rho_at,
                                        const SystemParams& p) {
    FluxSample s = atom_observables(t, rho_at);
    s.jw_norm = work_flux_norm(rho_at, p);
    s.jq_norm = heat_flux_norm_effective(rho_at, p);
    return s;
}

// First-law residual: max over the samples of
//   | (1/g) d<sigma_z/2>/dt - (jw + jq) |,
// with the derivative taken by centered differences on the dense output of an
// atom-level (or composite) trajectory. The base step is half the local knot
// spacing; one Richardson extrapolation (h, h/2) removes the O(h^2) term.
// Samples whose stencil leaves the trajectory are skipped.
inline double energy_balance(const Trajectory& traj, std::span<const FluxSample> samples,
                             const SystemParams& p) {
    if (p.g == 0.0) throw std::invalid_argument("energy_balance: normalization needs g > 0");
    if (traj.size() < 2) return 0.0;
    auto half_sz = [&](double t) { return 0.5 * sigma_z_of(traj.atom_at(t)); };
    double worst = 0.0;
    for (const auto& s : samples) {
        if (s.t < traj.t_begin() || s.t > traj.t_end()) continue;
        const std::size_t k = traj.interval(s.t);
        const double h = 0.5 * (traj.knot(k + 1).t - traj.knot(k).t);
        if (s.t - h < traj.t_begin() || s.t + h > traj.t_end()) continue;
        const double d1 = (half_sz(s.t + h) - half_sz(s.t - h)) / (2 * h);
        const double d2 = (half_sz(s.t + h / 2) - half_sz(s.t - h / 2)) / h;
        const double deriv = (4 * d2 - d1) / 3;
        worst = std::max(worst, std::abs(deriv / p.g - (s.jw_norm + s.jq_norm)));
    }
    return worst;
}

// Composite displaced-picture trajectory: fluxes evaluated at every knot.
inline double energy_balance(const Trajectory& traj, const SystemParams& p) {
    if (traj.atom_only())
        throw std::invalid_argument("energy_balance: composite trajectory required for fluxes");
    const LindbladGenerator heat = heat_generator(p);
    std::vector<FluxSample> samples;
    samples.reserve(traj.size());
    for (const auto& k : traj.knots()) samples.push_back(flux_sample_full(k.t, k.rho, heat, p));
    return energy_balance(traj, samples, p);
}

inline PhotonAccounting photon_accounting(double t, const SystemParams& p) {
    if (t < 0.0) throw std::invalid_argument("photon_accounting: t must be >= 0");
    if (p.kappa <= 0.0) throw std::invalid_argument("photon_accounting: kappa must be > 0");
    const double et = p.eps * t;
    const double r = p.eps / p.kappa;
    return PhotonAccounting{et * et, r * r};
}

}  // namespace ramsey
