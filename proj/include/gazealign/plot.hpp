#pragma once

#include <string>
#include <utility>
#include <vector>

namespace gazealign::plot {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct XYPlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool lines = true;   ///< false draws markers only
    bool log_x = false;  ///< log10 x axis; non-positive x are drawn at the left edge
    std::vector<Series> series;
};

std::string render_svg(const XYPlot& plot);

struct BarGroup {
    std::string label;
    std::vector<std::pair<std::string, double>> bars;
};

std::string render_bars_svg(const std::string& title, const std::string& y_label, const std::vector<BarGroup>& groups);

}  // namespace gazealign::plot
