#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace csakd::plot {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

// Minimal deterministic SVG line chart (axes, ticks, legend). Good enough
// for the robustness sweep figures; no interactive UI by design.
void write_line_svg(const std::filesystem::path& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<Series>& series);

}  // namespace csakd::plot
