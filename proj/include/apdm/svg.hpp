#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "apdm/common.hpp"

namespace apdm {

struct PlotSeries {
  std::string name;
  std::vector<double> y;
};

// Minimal SVG line plot: one x axis, any number of named series, auto-scaled
// axes with min/max tick labels and a legend.
void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::vector<double>& x,
                     const std::vector<PlotSeries>& series);

}  // namespace apdm
