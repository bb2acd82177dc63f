#pragma once

// Minimal static SVG line plots: stacked panels with axes, polylines, shaded
// bands and a legend.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace scatsep::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    bool markers = false;
};

struct Band {
    std::vector<double> x;
    std::vector<double> lo;
    std::vector<double> hi;
    std::string color = "#1f77b4";
};

struct Panel {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    std::vector<Series> series;
    std::vector<Band> bands;
    bool log_y = false;
};

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    return colors[i % 6];
}

namespace detail {

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace detail

inline std::string render(const std::vector<Panel>& panels, int width = 900, int panel_height = 260) {
    const int ml = 70, mr = 160, mt = 30, mb = 45;
    const int height = static_cast<int>(panels.size()) * panel_height;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const Panel& pn = panels[p];
        const int top = static_cast<int>(p) * panel_height + mt;
        const int h = panel_height - mt - mb, w = width - ml - mr;
        auto ty = [&](double v) { return pn.log_y ? std::log10(std::max(v, 1e-300)) : v; };
        double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
        auto extend = [&](const std::vector<double>& xs, const std::vector<double>& ys) {
            for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
                if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]) || (pn.log_y && ys[i] <= 0.0)) continue;
                x0 = std::min(x0, xs[i]), x1 = std::max(x1, xs[i]);
                y0 = std::min(y0, ty(ys[i])), y1 = std::max(y1, ty(ys[i]));
            }
        };
        for (const auto& s : pn.series) extend(s.x, s.y);
        for (const auto& b : pn.bands) extend(b.x, b.lo), extend(b.x, b.hi);
        if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
        if (x1 == x0) x1 = x0 + 1;
        if (y1 == y0) y1 = y0 + 1;
        const double pad = 0.05 * (y1 - y0);
        y0 -= pad, y1 += pad;
        auto px = [&](double v) { return ml + (v - x0) / (x1 - x0) * w; };
        auto py = [&](double v) { return top + h - (ty(v) - y0) / (y1 - y0) * h; };

        os << "<g>\n<text x=\"" << ml << "\" y=\"" << top - 8 << "\" font-size=\"13\">" << detail::escape(pn.title)
           << "</text>\n";
        os << "<rect x=\"" << ml << "\" y=\"" << top << "\" width=\"" << w << "\" height=\"" << h
           << "\" fill=\"none\" stroke=\"#444\"/>\n";
        for (int t = 0; t <= 4; ++t) {
            double xv = x0 + (x1 - x0) * t / 4.0, yv = y0 + (y1 - y0) * t / 4.0;
            double X = ml + w * t / 4.0, Y = top + h - h * t / 4.0;
            os << "<text x=\"" << X << "\" y=\"" << top + h + 14 << "\" text-anchor=\"middle\">" << detail::num(xv)
               << "</text>\n";
            os << "<text x=\"" << ml - 4 << "\" y=\"" << Y + 4 << "\" text-anchor=\"end\">"
               << detail::num(pn.log_y ? std::pow(10.0, yv) : yv) << "</text>\n";
        }
        os << "<text x=\"" << ml + w / 2 << "\" y=\"" << top + h + 32 << "\" text-anchor=\"middle\">"
           << detail::escape(pn.xlabel) << "</text>\n";
        os << "<text transform=\"translate(" << 16 << ',' << top + h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
           << detail::escape(pn.ylabel) << "</text>\n";

        for (const auto& b : pn.bands) {
            os << "<polygon fill=\"" << b.color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < b.x.size(); ++i) os << px(b.x[i]) << ',' << py(b.hi[i]) << ' ';
            for (std::size_t i = b.x.size(); i-- > 0;) os << px(b.x[i]) << ',' << py(b.lo[i]) << ' ';
            os << "\"/>\n";
        }
        for (std::size_t si = 0; si < pn.series.size(); ++si) {
            const auto& s = pn.series[si];
            os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\" points=\"";
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
                if (!std::isfinite(s.y[i]) || (pn.log_y && s.y[i] <= 0.0)) continue;
                os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
            }
            os << "\"/>\n";
            if (s.markers)
                for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
                    if (std::isfinite(s.y[i]) && !(pn.log_y && s.y[i] <= 0.0))
                        os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"2.5\" fill=\""
                           << s.color << "\"/>\n";
            const int ly = top + 12 + static_cast<int>(si) * 16;
            os << "<line x1=\"" << ml + w + 10 << "\" y1=\"" << ly << "\" x2=\"" << ml + w + 30 << "\" y2=\"" << ly
               << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n<text x=\"" << ml + w + 34 << "\" y=\""
               << ly + 4 << "\">" << detail::escape(s.name) << "</text>\n";
        }
        os << "</g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace scatsep::svg
