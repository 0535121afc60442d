#pragma once

#include <string>
#include <vector>

namespace lcps {

struct Series {
    std::string label;
    std::vector<double> y; // y[k] plotted at x = k + 1
};

/// Minimal standalone SVG line chart with a legend; y axis fixed to [0, 1].
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

} // namespace lcps
