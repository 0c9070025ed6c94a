#include "sievekit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "sievekit/errors.hpp"

namespace sievekit {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
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

}  // namespace

std::string render_svg(const LinePlot& plot) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    auto tx = [&](double x) { return plot.log_x ? std::log10(x) : x; };
    for (const auto& s : plot.series) {
        if (s.x.size() != s.y.size()) throw DomainError("plot series '" + s.label + "' has mismatched lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || (plot.log_x && !(s.x[i] > 0))) continue;
            xmin = std::min(xmin, tx(s.x[i]));
            xmax = std::max(xmax, tx(s.x[i]));
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (plot.reference) {
        ymin = std::min(ymin, *plot.reference);
        ymax = std::max(ymax, *plot.reference);
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1;
    if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
    if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
    if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (tx(x) - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return kTop + (ymax - y) / (ymax - ymin) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << fixed(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(plot.title) << "</text>\n";
    o << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop + ph) << "\" x2=\"" << fixed(kLeft + pw)
      << "\" y2=\"" << fixed(kTop + ph) << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(kLeft) << "\" y2=\""
      << fixed(kTop + ph) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0;
        const double fy = ymin + (ymax - ymin) * i / 4.0;
        const double sx = kLeft + pw * i / 4.0, sy = kTop + ph - ph * i / 4.0;
        o << "<text x=\"" << fixed(sx) << "\" y=\"" << fixed(kTop + ph + 16) << "\" text-anchor=\"middle\">"
          << (plot.log_x ? "1e" + tick(fx) : tick(fx)) << "</text>\n";
        o << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(sy + 4) << "\" text-anchor=\"end\">" << tick(fy)
          << "</text>\n";
    }
    o << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"" << fixed(kHeight - 10) << "\" text-anchor=\"middle\">"
      << escape(plot.x_label) << "</text>\n";
    o << "<text x=\"15\" y=\"" << fixed(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << fixed(kTop + ph / 2) << ")\">" << escape(plot.y_label) << "</text>\n";

    double legend_y = kTop + 10;
    if (plot.reference) {
        o << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(py(*plot.reference)) << "\" x2=\""
          << fixed(kLeft + pw) << "\" y2=\"" << fixed(py(*plot.reference))
          << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
        o << "<text x=\"" << fixed(kLeft + pw + 10) << "\" y=\"" << fixed(legend_y) << "\" fill=\"gray\">"
          << escape(plot.reference_label) << "</text>\n";
        legend_y += 16;
    }
    for (std::size_t s = 0; s < plot.series.size(); ++s) {
        const auto& series = plot.series[s];
        const char* colour = kPalette[s % (sizeof kPalette / sizeof *kPalette)];
        o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < series.x.size(); ++i) {
            if (!std::isfinite(series.y[i]) || (plot.log_x && !(series.x[i] > 0))) continue;
            o << (first ? "" : " ") << fixed(px(series.x[i])) << ',' << fixed(py(series.y[i]));
            first = false;
        }
        o << "\"/>\n";
        o << "<text x=\"" << fixed(kLeft + pw + 10) << "\" y=\"" << fixed(legend_y) << "\" fill=\"" << colour << "\">"
          << escape(series.label) << "</text>\n";
        legend_y += 16;
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace sievekit
