#pragma once

#include <optional>
#include <string>
#include <vector>

namespace pnact {

struct ChartSeries {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
  // CSS color; empty picks from a fixed palette by series index.
  std::string color;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 720;
  int height = 440;
  // Dashed horizontal reference line (e.g. the cost budget).
  std::optional<double> hline;
  std::string hline_label;
};

// Writes a self-contained line chart. Output depends only on the inputs, so
// repeated runs produce byte-identical files.
void write_line_chart_svg(const std::string& path,
                          const std::vector<ChartSeries>& series,
                          const ChartOptions& options);

}  // namespace pnact
