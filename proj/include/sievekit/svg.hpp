#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sievekit {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    std::vector<PlotSeries> series;
    std::optional<double> reference;  ///< horizontal dashed line
    std::string reference_label = "oracle";
};

/// Static SVG with axes, one polyline per series and an optional reference
/// line. Output depends only on the inputs.
std::string render_svg(const LinePlot& plot);

}  // namespace sievekit
