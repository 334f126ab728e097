// svg.hpp: standalone SVG line plots with linear or log axes, an optional
// right-hand axis and a legend. Output is plain text and deterministic.

#pragma once

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ramsey::svg {

enum class Side { Left, Right };

struct Axis {
    std::string label;
    bool log = false;
};

struct Series {
    std::string name;
    std::vector<double> x, y;
    Side side = Side::Left;
    bool dashed = false;
};

struct PlotSpec {
    std::string title;
    Axis x;
    Axis left;
    std::optional<Axis> right;
    std::vector<Series> series;
    double width = 720, height = 480;
};

namespace detail {

inline std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
            case '&': o += "&amp;"; break;
            case '<': o += "&lt;"; break;
            case '>': o += "&gt;"; break;
            case '"': o += "&quot;"; break;
            default: o += c;
        }
    }
    return o;
}

inline std::string num(double v) { return fmt::format("{:.2f}", v == 0.0 ? 0.0 : v); }

inline bool usable(double v, bool log) { return std::isfinite(v) && (!log || v > 0.0); }

struct Range {
    double lo, hi;
    bool log;

    double map(double v, double a, double b) const {
        const double t = log ? (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo))
                             : (v - lo) / (hi - lo);
        return a + t * (b - a);
    }
};

// Data range of the usable values, padded when degenerate.
inline Range data_range(const std::vector<const std::vector<double>*>& cols, bool log) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto* c : cols)
        for (double v : *c)
            if (usable(v, log)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    if (!(lo <= hi)) return log ? Range{0.1, 10.0, true} : Range{-1.0, 1.0, false};
    if (log) {
        if (hi / lo < 1.0 + 1e-9) return Range{lo / 10.0, hi * 10.0, true};
        return Range{std::pow(10.0, std::floor(std::log10(lo))), std::pow(10.0, std::ceil(std::log10(hi))),
                     true};
    }
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) {
        const double pad = lo == 0.0 ? 1.0 : 0.1 * std::abs(lo);
        return Range{lo - pad, hi + pad, false};
    }
    const double pad = 0.05 * (hi - lo);
    return Range{lo - pad, hi + pad, false};
}

inline std::vector<double> ticks(const Range& r) {
    std::vector<double> t;
    if (r.log) {
        for (double e = std::ceil(std::log10(r.lo) - 1e-9); e <= std::log10(r.hi) + 1e-9; e += 1.0)
            t.push_back(std::pow(10.0, e));
        return t;
    }
    const double span = r.hi - r.lo;
    const double raw = span / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    for (double v = std::ceil(r.lo / step) * step; v <= r.hi + 1e-9 * step; v += step)
        t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return t;
}

inline std::string tick_label(double v, bool log) {
    if (log) return fmt::format("1e{}", static_cast<int>(std::lround(std::log10(v))));
    return fmt::format("{:g}", v);
}

}  // namespace detail

inline std::string render(const PlotSpec& spec) {
    using namespace detail;
    if (spec.series.empty()) throw std::invalid_argument("svg::render: no series");
    for (const auto& s : spec.series)
        if (s.x.size() != s.y.size()) throw std::invalid_argument("svg::render: x/y length mismatch");

    const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    const double W = spec.width, H = spec.height;
    const double ml = 80, mr = spec.right ? 80 : 30, mt = 40, mb = 60;
    const double x0 = ml, x1 = W - mr, y0 = H - mb, y1 = mt;

    std::vector<const std::vector<double>*> xs, yl, yr;
    for (const auto& s : spec.series) {
        xs.push_back(&s.x);
        (s.side == Side::Left ? yl : yr).push_back(&s.y);
    }
    const Range rx = data_range(xs, spec.x.log);
    const Range rl = data_range(yl, spec.left.log);
    const Range rr = spec.right ? data_range(yr, spec.right->log) : Range{0, 1, false};

    std::string o;
    o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o += fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
                     num(W), num(H), num(W), num(H));
    o += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", num(W), num(H));
    o += "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    if (!spec.title.empty())
        o += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                         num((x0 + x1) / 2), num(mt - 15), escape(spec.title));
    o += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                     num(x0), num(y1), num(x1 - x0), num(y0 - y1));

    for (double t : ticks(rx)) {
        const double px = rx.map(t, x0, x1);
        o += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", num(px),
                         num(y0), num(y0 + 5));
        o += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(px), num(y0 + 18),
                         escape(tick_label(t, rx.log)));
    }
    for (double t : ticks(rl)) {
        const double py = rl.map(t, y0, y1);
        o += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", num(x0 - 5),
                         num(py), num(x0));
        o += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", num(x0 - 8), num(py + 4),
                         escape(tick_label(t, rl.log)));
    }
    if (spec.right)
        for (double t : ticks(rr)) {
            const double py = rr.map(t, y0, y1);
            o += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", num(x1),
                             num(py), num(x1 + 5));
            o += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"start\">{}</text>\n", num(x1 + 8),
                             num(py + 4), escape(tick_label(t, rr.log)));
        }

    o += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num((x0 + x1) / 2),
                     num(H - 15), escape(spec.x.label));
    o += fmt::format("<text transform=\"translate({},{}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
                     num(20), num((y0 + y1) / 2), escape(spec.left.label));
    if (spec.right)
        o += fmt::format("<text transform=\"translate({},{}) rotate(90)\" text-anchor=\"middle\">{}</text>\n",
                         num(W - 20), num((y0 + y1) / 2), escape(spec.right->label));

    for (std::size_t i = 0; i < spec.series.size(); ++i) {
        const Series& s = spec.series[i];
        const Range& ry = s.side == Side::Left ? rl : rr;
        const bool ylog = s.side == Side::Left ? spec.left.log : (spec.right && spec.right->log);
        const char* color = palette[i % 6];
        const std::string dash = s.dashed ? " stroke-dasharray=\"6,4\"" : "";
        std::string pts;
        auto flush = [&] {
            if (!pts.empty())
                o += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{} points=\"{}\"/>\n",
                                 color, dash, pts);
            pts.clear();
        };
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            if (!usable(s.x[k], spec.x.log) || !usable(s.y[k], ylog)) {
                flush();
                continue;
            }
            if (!pts.empty()) pts += ' ';
            pts += num(rx.map(s.x[k], x0, x1)) + "," + num(ry.map(s.y[k], y0, y1));
        }
        flush();
    }

    const double lx = x1 - 190, ly = y1 + 10;
    o += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"180\" height=\"{}\" fill=\"white\" stroke=\"#888\"/>\n",
                     num(lx), num(ly), num(8 + 18.0 * spec.series.size()));
    for (std::size_t i = 0; i < spec.series.size(); ++i) {
        const double yy = ly + 16 + 18.0 * i;
        o += fmt::format("<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"{3}\" stroke-width=\"2\"{4}/>\n",
                         num(lx + 8), num(lx + 32), num(yy - 4), palette[i % 6],
                         spec.series[i].dashed ? " stroke-dasharray=\"6,4\"" : "");
        o += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(lx + 38), num(yy),
                         escape(spec.series[i].name));
    }
    o += "</g>\n</svg>\n";
    return o;
}

}  // namespace ramsey::svg
