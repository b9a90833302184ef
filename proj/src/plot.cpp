#include "gazealign/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace gazealign::plot {

namespace {

constexpr double kWidth = 720;
constexpr double kHeight = 480;
constexpr double kLeft = 70;
constexpr double kRight = 170;
constexpr double kTop = 40;
constexpr double kBottom = 60;

constexpr std::array<const char*, 12> kColors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                                 "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string header(const std::string& title) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
           "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) +
           "</text>\n";
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    void finish() {
        if (!(lo <= hi)) {
            lo = 0;
            hi = 1;
        }
        if (hi - lo < 1e-12) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

}  // namespace

std::string render_svg(const XYPlot& plot) {
    const auto tx = [&](double x) { return plot.log_x ? (x > 0 ? std::log10(x) : std::numeric_limits<double>::quiet_NaN()) : x; };
    Range xr;
    Range yr;
    for (const auto& s : plot.series) {
        for (const double x : s.x) {
            xr.add(tx(x));
        }
        for (const double y : s.y) {
            yr.add(y);
        }
    }
    xr.finish();
    yr.finish();
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    const auto px = [&](double x) {
        const double t = tx(x);
        return kLeft + (std::isfinite(t) ? (t - xr.lo) / (xr.hi - xr.lo) : 0.0) * pw;
    };
    const auto py = [&](double y) { return kTop + (1.0 - (y - yr.lo) / (yr.hi - yr.lo)) * ph; };

    std::string svg = header(plot.title);
    svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
        const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
        svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(fy) + 4) + "\" text-anchor=\"end\">" + tick(fy) + "</text>\n";
        const double xpos = kLeft + (fx - xr.lo) / (xr.hi - xr.lo) * pw;
        svg += "<text x=\"" + num(xpos) + "\" y=\"" + num(kTop + ph + 16) + "\" text-anchor=\"middle\">" +
               tick(plot.log_x ? std::pow(10.0, fx) : fx) + "</text>\n";
    }
    svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 18) + "\" text-anchor=\"middle\">" +
           escape(plot.x_label) + "</text>\n";
    svg += "<text transform=\"translate(18," + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
           escape(plot.y_label) + "</text>\n";

    for (std::size_t si = 0; si < plot.series.size(); ++si) {
        const auto& s = plot.series[si];
        const char* color = kColors[si % kColors.size()];
        const std::size_t n = std::min(s.x.size(), s.y.size());
        if (plot.lines && n > 1) {
            svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"";
            for (std::size_t i = 0; i < n; ++i) {
                svg += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
            }
            svg += "\"/>\n";
        }
        for (std::size_t i = 0; i < n; ++i) {
            svg += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
        }
        const double ly = kTop + 14.0 * static_cast<double>(si) + 6;
        svg += "<rect x=\"" + num(kWidth - kRight + 12) + "\" y=\"" + num(ly - 8) + "\" width=\"10\" height=\"10\" fill=\"" +
               color + "\"/><text x=\"" + num(kWidth - kRight + 26) + "\" y=\"" + num(ly + 1) + "\">" + escape(s.label) +
               "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

std::string render_bars_svg(const std::string& title, const std::string& y_label, const std::vector<BarGroup>& groups) {
    Range yr;
    yr.add(0.0);
    std::map<std::string, std::size_t> color_of;
    for (const auto& g : groups) {
        for (const auto& [name, value] : g.bars) {
            yr.add(value);
            color_of.try_emplace(name, color_of.size());
        }
    }
    yr.finish();
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    const auto py = [&](double y) { return kTop + (1.0 - (y - yr.lo) / (yr.hi - yr.lo)) * ph; };

    std::string svg = header(title);
    svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kLeft + pw) + "\" y1=\"" + num(py(0)) + "\" y2=\"" + num(py(0)) +
           "\" stroke=\"gray\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
        svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(fy) + 4) + "\" text-anchor=\"end\">" + tick(fy) + "</text>\n";
    }
    svg += "<text transform=\"translate(18," + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
           escape(y_label) + "</text>\n";
    const double group_w = groups.empty() ? pw : pw / static_cast<double>(groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        const double x0 = kLeft + group_w * static_cast<double>(gi);
        const double bar_w = g.bars.empty() ? 0.0 : group_w * 0.8 / static_cast<double>(g.bars.size());
        for (std::size_t bi = 0; bi < g.bars.size(); ++bi) {
            const double v = g.bars[bi].second;
            const double top = std::min(py(v), py(0));
            const double h = std::abs(py(v) - py(0));
            svg += "<rect x=\"" + num(x0 + group_w * 0.1 + bar_w * static_cast<double>(bi)) + "\" y=\"" + num(top) +
                   "\" width=\"" + num(bar_w) + "\" height=\"" + num(h) + "\" fill=\"" +
                   kColors[color_of[g.bars[bi].first] % kColors.size()] + "\"/>\n";
        }
        svg += "<text x=\"" + num(x0 + group_w / 2) + "\" y=\"" + num(kTop + ph + 16) + "\" text-anchor=\"middle\">" +
               escape(g.label) + "</text>\n";
    }
    std::size_t li = 0;
    for (const auto& [name, ci] : color_of) {
        const double ly = kTop + 14.0 * static_cast<double>(li++) + 6;
        svg += "<rect x=\"" + num(kWidth - kRight + 12) + "\" y=\"" + num(ly - 8) + "\" width=\"10\" height=\"10\" fill=\"" +
               kColors[ci % kColors.size()] + "\"/><text x=\"" + num(kWidth - kRight + 26) + "\" y=\"" + num(ly + 1) +
               "\">" + escape(name) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace gazealign::plot
