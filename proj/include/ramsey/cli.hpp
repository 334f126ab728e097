// cli.hpp: command-line front end over the experiment pipelines. Parses and
// validates flags, merges a key=value config file, runs one command and
// writes CSV tables, sibling .meta files and optional SVG plots.
//
// Exit codes: 0 success, 1 pipeline failure, 2 usage error.

#pragma once

#include "ramsey/effective.hpp"
#include "ramsey/experiments.hpp"
#include "ramsey/io.hpp"
#include "ramsey/svg.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#ifndef RAMSEY_THERMO_VERSION
#define RAMSEY_THERMO_VERSION "unknown"
#endif

namespace ramsey::cli {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string out_dir = "out";
    std::string config;
    double tol = 1e-9;
    int workers = 1;
    int n_max = 15;
    int n_max_cap = 40;
    double gate_tol = 1e-6;
    bool overwrite = false;
    bool svg = false;
};

struct GridFlags {
    int points = 60;
    double g_min = 1e-3;
    double g_max = 1e2;
};

// Boolean flags take no value on the command line; in a config file they are
// written as key=true / key=false.
inline const std::vector<std::string>& boolean_flags() {
    static const std::vector<std::string> f = {"overwrite", "svg", "no-svg-fluxes"};
    return f;
}

// Appends config-file settings that the command line does not already set.
inline std::vector<std::string> merge_config(std::vector<std::string> args) {
    std::optional<std::string> path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (!path) return args;
    std::vector<std::pair<std::string, std::string>> kv;
    try {
        kv = io::read_config(*path);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    auto given = [&](const std::string& key) {
        const std::string flag = "--" + key;
        return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
    };
    std::vector<std::string> extra;
    for (const auto& [key, value] : kv) {
        if (key == "config" || given(key)) continue;
        const auto& bf = boolean_flags();
        if (std::find(bf.begin(), bf.end(), key) != bf.end()) {
            if (value == "true")
                extra.push_back("--" + key);
            else if (value != "false")
                throw UsageError("config: " + key + " must be true or false");
            continue;
        }
        extra.push_back("--" + key);
        extra.push_back(value);
    }
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
}

inline void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--out-dir", c.out_dir, "Output directory (created if absent)")->capture_default_str();
    sub->add_option("--config", c.config, "key=value file; command-line flags take precedence");
    sub->add_option("--tol", c.tol, "Integrator tolerance")
        ->check(CLI::Range(1e-12, 1e-4))
        ->capture_default_str();
    sub->add_option("--workers", c.workers, "Concurrent sweep points")
        ->envname("RAMSEY_THERMO_WORKERS")
        ->check(CLI::Range(1, 1024))
        ->capture_default_str();
    sub->add_option("--n-max", c.n_max, "Initial Fock cutoff")->check(CLI::Range(1, 200))->capture_default_str();
    sub->add_option("--n-max-cap", c.n_max_cap, "Largest Fock cutoff the gate may reach")
        ->check(CLI::Range(1, 200))
        ->capture_default_str();
    sub->add_option("--gate-tol", c.gate_tol, "Truncation gate tolerance")
        ->check(CLI::Range(1e-14, 1e-2))
        ->capture_default_str();
    sub->add_flag("--overwrite", c.overwrite, "Replace existing output files");
    sub->add_flag("--svg", c.svg, "Also write an SVG plot");
}

inline void add_grid(CLI::App* sub, GridFlags& g) {
    sub->add_option("--grid-points", g.points, "Log-spaced g/kappa points")
        ->check(CLI::Range(2, 100000))
        ->capture_default_str();
    sub->add_option("--g-min", g.g_min, "Smallest g/kappa")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--g-max", g.g_max, "Largest g/kappa")->check(CLI::PositiveNumber)->capture_default_str();
}

inline RunOptions run_options(const Common& c) {
    if (c.n_max_cap < c.n_max) throw UsageError("--n-max-cap must be >= --n-max");
    RunOptions o;
    o.tol = c.tol;
    o.gate.n_max_start = c.n_max;
    o.gate.n_max_cap = c.n_max_cap;
    o.gate.tolerance = c.gate_tol;
    return o;
}

inline std::vector<double> grid_of(const GridFlags& g) {
    if (!(g.g_max > g.g_min)) throw UsageError("--g-max must exceed --g-min");
    return log_grid(g.g_min, g.g_max, g.points);
}

inline void common_meta(io::MetaFile& m, const Common& c, const std::string& command) {
    m.comment(std::string("ramsey_thermo ") + RAMSEY_THERMO_VERSION);
    m.comment("command=" + command);
    m.comment("tstar_tolerance=1e-06");
    m.set("tol", c.tol);
    m.set("n-max", c.n_max);
    m.set("n-max-cap", c.n_max_cap);
    m.set("gate-tol", c.gate_tol);
    m.set("svg", c.svg);
}

inline void grid_meta(io::MetaFile& m, const GridFlags& g) {
    m.set("grid-points", g.points);
    m.set("g-min", g.g_min);
    m.set("g-max", g.g_max);
}

// Output files of one command; checked for clobbering before any work starts.
struct Outputs {
    fs::path csv, meta;
    std::optional<fs::path> svg;

    Outputs(const Common& c, const std::string& stem) {
        csv = fs::path(c.out_dir) / (stem + ".csv");
        meta = fs::path(c.out_dir) / (stem + ".meta");
        if (c.svg) svg = fs::path(c.out_dir) / (stem + ".svg");
        try {
            io::ensure_writable(csv, c.overwrite);
            io::ensure_writable(meta, c.overwrite);
            if (svg) io::ensure_writable(*svg, c.overwrite);
        } catch (const io::OutputExists& e) {
            throw UsageError(e.what());
        }
    }

    void write(const Common& c, const io::CsvTable& table, const io::MetaFile& m,
               const std::optional<svg::PlotSpec>& plot, std::ostream& out) const {
        io::write_file(csv, table.str(), c.overwrite);
        io::write_file(meta, m.str(), c.overwrite);
        fmt::print(out, "wrote {}\n", csv.string());
        if (svg && plot) {
            io::write_file(*svg, svg::render(*plot), c.overwrite);
            fmt::print(out, "wrote {}\n", svg->string());
        }
    }
};

inline std::string n_max_list(const std::vector<int>& n) {
    std::string s;
    for (std::size_t i = 0; i < n.size(); ++i) s += (i ? "," : "") + std::to_string(n[i]);
    return s;
}

// ------------------------------------------------------------ time series

inline svg::PlotSpec series_plot(const std::string& title, const std::string& xlabel,
                                 const std::vector<double>& x, const TimeSeries& ts, bool fluxes) {
    svg::PlotSpec spec;
    spec.title = title;
    spec.x = {xlabel, false};
    spec.left = {"normalized value", false};
    svg::Series sz{"<σ_z>", x, {}}, s{"S/ln(2)", x, {}}, jw{"J_W/ħωg", x, {}, svg::Side::Left, true},
        jq{"J_Q/ħωg", x, {}, svg::Side::Left, true};
    for (const auto& p : ts.samples) {
        sz.y.push_back(p.sigma_z);
        s.y.push_back(p.entropy_norm());
        jw.y.push_back(p.jw_norm);
        jq.y.push_back(p.jq_norm);
    }
    spec.series = {sz, s};
    if (fluxes) {
        spec.series.push_back(jw);
        spec.series.push_back(jq);
    }
    return spec;
}

inline std::string flux_field(double v) { return std::isnan(v) ? std::string() : io::format_number(v); }

inline void series_meta(io::MetaFile& m, const SeriesResult& r) {
    m.comment("n_max_used=" + std::to_string(r.params.cutoff.n_max()));
    m.comment("gate_drift=" + io::format_number(r.gate_drift));
    m.comment(std::string("converged=") + (r.converged ? "true" : "false"));
    m.comment("energy_residual=" + io::format_number(r.series.energy_residual));
    m.comment("accepted_steps=" + std::to_string(r.series.steps));
}

inline int finish_series(const SeriesResult& r, std::ostream& err) {
    if (r.converged) return 0;
    fmt::print(err, "error: truncation gate not passed (drift {} at n_max={})\n",
               io::format_number(r.gate_drift), r.params.cutoff.n_max());
    return 1;
}

// ------------------------------------------------------------------ sweeps

inline void sweep_meta(io::MetaFile& m, const SweepResult& r) {
    std::vector<int> n;
    int failed = 0;
    for (const auto& row : r.rows) {
        n.push_back(row.n_max);
        if (!row.converged) ++failed;
    }
    m.comment("n_max_used=" + n_max_list(n));
    m.comment("unconverged_rows=" + std::to_string(failed));
    for (const auto& row : r.rows)
        if (!row.error.empty())
            m.comment("row g=" + io::format_number(row.g_over_kappa) + ": " + row.error);
}

inline void report_rows(const SweepResult& r, std::ostream& err) {
    for (const auto& row : r.rows)
        if (!row.converged)
            fmt::print(err, "warning: g/kappa={} not converged{}{}\n", io::format_number(row.g_over_kappa),
                       row.error.empty() ? "" : ": ", row.error);
}

// --------------------------------------------------------------- dispatch

inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Thermodynamics of a two-level atom in a driven lossy cavity"};
    app.set_version_flag("--version", RAMSEY_THERMO_VERSION);
    app.require_subcommand(1, 1);

    Common common;
    GridFlags grid;

    std::string regime;
    double gt_max = 2.0 * std::numbers::pi;
    int samples = 401;
    bool no_svg_fluxes = false;
    auto* fig1 = app.add_subcommand("fig1", "Time series of the weak- or strong-coupling regime");
    fig1->add_option("--regime", regime, "b_d (g=1e-3, eps=1) or c_e (g=1, eps=1e-3)")
        ->required()
        ->check(CLI::IsMember({"b_d", "c_e"}));
    fig1->add_option("--gt-max", gt_max, "End of the gt axis")->check(CLI::PositiveNumber)->capture_default_str();
    fig1->add_option("--samples", samples, "Uniform samples over [0, gt-max]")
        ->check(CLI::Range(2, 10000000))
        ->capture_default_str();
    fig1->add_flag("--no-svg-fluxes", no_svg_fluxes, "Leave the flux curves out of the SVG");
    add_common(fig1, common);

    double eps = 0.0;
    auto* fig2 = app.add_subcommand("fig2", "Observables at t* versus g/kappa at fixed drive");
    fig2->add_option("--eps", eps, "Drive eps/kappa")->required()->check(CLI::NonNegativeNumber);
    add_grid(fig2, grid);
    add_common(fig2, common);

    auto* fig3 = app.add_subcommand("fig3", "Photon flux and entropy at t* versus g/kappa (eps = kappa)");
    add_grid(fig3, grid);
    add_common(fig3, common);

    double g = 0.0, kappa = 1.0, gamma = 0.0, t_end = 0.0;
    std::string picture = "displaced";
    auto* ev = app.add_subcommand("evolve", "Time series for arbitrary parameters");
    ev->add_option("--g", g, "Coupling g/kappa")->required()->check(CLI::NonNegativeNumber);
    ev->add_option("--eps", eps, "Drive eps/kappa")->required()->check(CLI::NonNegativeNumber);
    ev->add_option("--kappa", kappa, "Cavity decay")->check(CLI::NonNegativeNumber)->capture_default_str();
    ev->add_option("--gamma", gamma, "Atomic decay")->check(CLI::NonNegativeNumber)->capture_default_str();
    ev->add_option("--picture", picture, "displaced, effective or rotating")
        ->check(CLI::IsMember({"displaced", "effective", "rotating"}))
        ->capture_default_str();
    ev->add_option("--t-end", t_end, "Final time in 1/kappa")->required()->check(CLI::PositiveNumber);
    ev->add_option("--samples", samples, "Uniform samples over [0, t-end]")
        ->check(CLI::Range(2, 10000000))
        ->capture_default_str();
    ev->add_flag("--no-svg-fluxes", no_svg_fluxes, "Leave the flux curves out of the SVG");
    add_common(ev, common);

    double g_tol = 1e-6;
    auto* cross = app.add_subcommand("crossing", "Coupling where |J_Q| = |J_W| at t* (effective model)");
    cross->add_option("--eps", eps, "Drive eps/kappa")->required()->check(CLI::PositiveNumber);
    cross->add_option("--g-tol", g_tol, "Bisection width in g/kappa")
        ->check(CLI::Range(1e-12, 1e-1))
        ->capture_default_str();
    cross->add_option("--tol", common.tol, "Integrator tolerance")
        ->check(CLI::Range(1e-12, 1e-4))
        ->capture_default_str();

    double lo = 0.5, hi = 2.0, resolution = 0.05;
    auto* crit = app.add_subcommand("critical-drive", "Drive separating crossing and non-crossing sweeps");
    crit->add_option("--lo", lo, "Lower end of the eps/kappa search")->check(CLI::PositiveNumber)->capture_default_str();
    crit->add_option("--hi", hi, "Upper end of the eps/kappa search")->check(CLI::PositiveNumber)->capture_default_str();
    crit->add_option("--resolution", resolution, "Bracket width at which to stop")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_grid(crit, grid);
    add_common(crit, common);

    std::vector<std::string> args(argv, argv + argc);
    std::vector<const char*> ptrs;
    try {
        args = merge_config(std::move(args));
        for (const auto& a : args) ptrs.push_back(a.c_str());
        app.parse(static_cast<int>(ptrs.size()), ptrs.data());
        if (common.workers < 1) throw UsageError("--workers must be at least 1");
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    } catch (const UsageError& e) {
        fmt::print(err, "usage error: {}\n", e.what());
        return 2;
    }

    try {
        if (fig1->parsed()) {
            const Fig1Regime reg = fig1_regime_from_string(regime);
            Fig1Options opt;
            opt.gt_max = gt_max;
            opt.samples = samples;
            opt.run = run_options(common);
            const Outputs files(common, std::string("fig1_") + regime);
            const SeriesResult r = run_fig1(reg, opt);
            io::CsvTable t({"gt", "sigma_z", "entropy_norm", "jw_norm", "jq_norm"});
            std::vector<double> gt;
            for (const auto& s : r.series.samples) {
                gt.push_back(s.t * r.params.g);
                t.add_row({io::format_number(gt.back()), io::format_number(s.sigma_z),
                           io::format_number(s.entropy_norm()), io::format_number(s.jw_norm),
                           io::format_number(s.jq_norm)});
            }
            io::MetaFile m;
            common_meta(m, common, "fig1");
            m.set("regime", regime);
            m.set("gt-max", gt_max);
            m.set("samples", samples);
            m.set("no-svg-fluxes", no_svg_fluxes);
            m.comment(fmt::format("g_over_kappa={} eps_over_kappa={} gamma=0", io::format_number(r.params.g),
                                  io::format_number(r.params.eps)));
            series_meta(m, r);
            files.write(common, t, m,
                        series_plot("regime " + regime, "gt", gt, r.series, !no_svg_fluxes),
                        out);
            return finish_series(r, err);
        }

        if (ev->parsed()) {
            SystemParams p;
            p.g = g;
            p.eps = eps;
            p.kappa = kappa;
            p.gamma = gamma;
            p.picture = picture_from_string(picture);
            try {
                p.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            if ((p.picture != Picture::RotatingLab) && g == 0.0)
                throw UsageError("fluxes are normalized by g; use --g > 0");
            const RunOptions ro = run_options(common);
            const Outputs files(common, "evolve");
            const SeriesResult r = gated_series(p, t_end, samples, ro);
            io::CsvTable t({"t", "sigma_z", "re_sigma_plus", "im_sigma_plus", "entropy_norm", "jw_norm", "jq_norm"});
            std::vector<double> ts;
            for (const auto& s : r.series.samples) {
                ts.push_back(s.t);
                t.add_row({io::format_number(s.t), io::format_number(s.sigma_z), io::format_number(s.re_sigma_plus),
                           io::format_number(s.im_sigma_plus), io::format_number(s.entropy_norm()),
                           flux_field(s.jw_norm), flux_field(s.jq_norm)});
            }
            io::MetaFile m;
            common_meta(m, common, "evolve");
            m.set("g", g);
            m.set("eps", eps);
            m.set("kappa", kappa);
            m.set("gamma", gamma);
            m.set("picture", picture);
            m.set("t-end", t_end);
            m.set("samples", samples);
            m.set("no-svg-fluxes", no_svg_fluxes);
            series_meta(m, r);
            const bool fluxes = !no_svg_fluxes && p.picture != Picture::RotatingLab;
            files.write(common, t, m, series_plot("evolve (" + picture + ")", "κt", ts, r.series, fluxes), out);
            return finish_series(r, err);
        }

        if (fig2->parsed() || fig3->parsed()) {
            const bool is3 = fig3->parsed();
            const double drive = is3 ? 1.0 : eps;
            const std::vector<double> gg = grid_of(grid);
            SweepOptions so;
            so.run = run_options(common);
            so.workers = common.workers;
            const Outputs files(common, is3 ? std::string("fig3") : "fig2_eps" + io::format_number(drive));
            const SweepResult r = is3 ? run_fig3(gg, so) : run_fig2(drive, gg, so);

            io::CsvTable t = is3 ? io::CsvTable({"g_over_kappa", "t_star", "entropy_norm", "n_flux", "converged"})
                                 : io::CsvTable({"g_over_kappa", "t_star", "entropy_norm", "jw_norm", "jq_norm",
                                                 "converged"});
            svg::PlotSpec plot;
            plot.x = {"g/κ", true};
            if (is3) {
                plot.title = "Photon flux and entropy at t* (n_cav = 1)";
                plot.left = {"n_flux", true};
                plot.right = svg::Axis{"S/ln(2)", false};
                plot.series = {{"n_flux", {}, {}}, {"S/ln(2)", {}, {}, svg::Side::Right, true}};
            } else {
                plot.title = "Fluxes and entropy at t*, ε/κ = " + io::format_number(drive);
                plot.left = {"normalized value", false};
                plot.series = {{"|J_W|/ħωg", {}, {}}, {"|J_Q|/ħωg", {}, {}}, {"S/ln(2)", {}, {}, svg::Side::Left, true}};
            }
            for (const auto& row : r.rows) {
                const bool has = row.t_star.has_value();
                auto f = [&](double v) { return has ? io::format_number(v) : std::string(); };
                const std::string conv = row.converged ? "true" : "false";
                if (is3)
                    t.add_row({io::format_number(row.g_over_kappa), io::format_optional(row.t_star),
                               f(row.entropy_norm), f(row.n_flux), conv});
                else
                    t.add_row({io::format_number(row.g_over_kappa), io::format_optional(row.t_star),
                               f(row.entropy_norm), f(row.jw_norm), f(row.jq_norm), conv});
                if (!has) continue;
                const std::vector<double> ys = is3 ? std::vector<double>{row.n_flux, row.entropy_norm}
                                                   : std::vector<double>{std::abs(row.jw_norm),
                                                                         std::abs(row.jq_norm), row.entropy_norm};
                for (std::size_t k = 0; k < ys.size(); ++k) {
                    plot.series[k].x.push_back(row.g_over_kappa);
                    plot.series[k].y.push_back(ys[k]);
                }
            }
            io::MetaFile m;
            common_meta(m, common, is3 ? "fig3" : "fig2");
            if (!is3) m.set("eps", drive);
            grid_meta(m, grid);
            sweep_meta(m, r);
            const bool any = std::any_of(r.rows.begin(), r.rows.end(), [](const SweepRow& row) { return row.t_star.has_value(); });
            files.write(common, t, m, any ? std::optional<svg::PlotSpec>(plot) : std::nullopt, out);
            if (common.svg && !any) fmt::print(err, "warning: no row reached t*; SVG skipped\n");
            if (!is3) {
                const int n = flux_crossings(r);
                fmt::print(out, "flux_crossings = {}\n", n);
                if (auto gc = first_crossing_g(r)) fmt::print(out, "first_crossing_g_over_kappa = {}\n", io::format_number(*gc));
            }
            report_rows(r, err);
            return 0;
        }

        if (cross->parsed()) {
            CrossingOptions co;
            co.g_tolerance = g_tol;
            co.tol = common.tol;
            const CrossingResult r = crossing_point(eps, co);
            fmt::print(out, "g_cross_over_kappa = {}\n", io::format_number(r.g_cross_over_kappa));
            fmt::print(out, "re_sigma_plus_at_tstar = {}\n", io::format_number(r.re_sigma_plus_at_tstar));
            fmt::print(out, "g_over_eps = {}\n", io::format_number(r.g_cross_over_kappa / eps));
            fmt::print(out, "jq_plus_jw = {}\n", io::format_number(r.signed_difference));
            return 0;
        }

        if (crit->parsed()) {
            if (!(hi > lo)) throw UsageError("--hi must exceed --lo");
            CriticalDriveOptions co;
            co.g_grid = grid_of(grid);
            co.sweep.run = run_options(common);
            co.sweep.workers = common.workers;
            co.resolution = resolution;
            const Outputs files(common, "critical_drive");
            const CriticalDriveResult r = critical_drive(lo, hi, co);
            io::CsvTable t({"eps_over_kappa", "crosses", "flux_crossings", "converged_rows"});
            for (std::size_t i = 0; i < r.probes.size(); ++i) {
                const auto& sw = r.sweeps[i];
                const auto conv = std::count_if(sw.rows.begin(), sw.rows.end(), [](const SweepRow& row) { return row.converged; });
                t.add_row({io::format_number(r.probes[i].first), r.probes[i].second ? "true" : "false",
                           std::to_string(flux_crossings(sw)), std::to_string(conv)});
            }
            io::MetaFile m;
            common_meta(m, common, "critical-drive");
            m.set("lo", lo);
            m.set("hi", hi);
            m.set("resolution", resolution);
            grid_meta(m, grid);
            m.comment("bracket=" + io::format_number(r.lo) + "," + io::format_number(r.hi));
            files.write(common, t, m, std::nullopt, out);
            fmt::print(out, "critical_eps_over_kappa = {}\n", io::format_number(r.threshold));
            fmt::print(out, "bracket = [{}, {}]\n", io::format_number(r.lo), io::format_number(r.hi));
            return 0;
        }
    } catch (const UsageError& e) {
        fmt::print(err, "usage error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return 1;
    }
    return 2;
}

}  // namespace ramsey::cli
