#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rio::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool line = true;
};

/// Minimal scatter/line chart with axes, tick labels and a legend.
void write_svg(const std::filesystem::path& path, const std::string& title,
               const std::string& x_label, const std::string& y_label,
               const std::vector<Series>& series);

}  // namespace rio::plot
