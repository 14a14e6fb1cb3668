#include "pnact/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace pnact {

namespace {

constexpr std::array<const char*, 6> kPalette{
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

void write_line_chart_svg(const std::string& path,
                          const std::vector<ChartSeries>& series,
                          const ChartOptions& options) {
  if (series.empty())
    throw std::invalid_argument("write_line_chart_svg: no series");
  double x_min = std::numeric_limits<double>::infinity();
  double x_max = -x_min;
  double y_min = x_min;
  double y_max = -x_min;
  std::size_t points = 0;
  for (const auto& s : series) {
    if (s.xs.size() != s.ys.size())
      throw std::invalid_argument(
          "write_line_chart_svg: series '" + s.label +
          "' has mismatched coordinate counts");
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      x_min = std::min(x_min, s.xs[i]);
      x_max = std::max(x_max, s.xs[i]);
      y_min = std::min(y_min, s.ys[i]);
      y_max = std::max(y_max, s.ys[i]);
      ++points;
    }
  }
  if (points == 0)
    throw std::invalid_argument("write_line_chart_svg: all series are empty");
  if (options.hline) {
    y_min = std::min(y_min, *options.hline);
    y_max = std::max(y_max, *options.hline);
  }
  if (x_min == x_max) {
    x_min -= 1.0;
    x_max += 1.0;
  }
  if (y_min == y_max) {
    y_min -= 1.0;
    y_max += 1.0;
  }
  const double x_pad = 0.05 * (x_max - x_min);
  const double y_pad = 0.05 * (y_max - y_min);
  x_min -= x_pad;
  x_max += x_pad;
  y_min -= y_pad;
  y_max += y_pad;

  const double W = options.width;
  const double H = options.height;
  const double L = 64, R = 20, T = 44, B = 52;
  auto px = [&](double x) {
    return L + (x - x_min) / (x_max - x_min) * (W - L - R);
  };
  auto py = [&](double y) {
    return H - B - (y - y_min) / (y_max - y_min) * (H - T - B);
  };

  std::ofstream out(path);
  if (!out)
    throw std::invalid_argument("write_line_chart_svg: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width
      << "\" height=\"" << options.height << "\" viewBox=\"0 0 "
      << options.width << " " << options.height << "\">\n";
  out << "<rect width=\"" << options.width << "\" height=\"" << options.height
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(W / 2) << "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\" font-weight=\"bold\">"
      << escape(options.title) << "</text>\n";

  // Frame and ticks.
  out << "<rect x=\"" << num(L) << "\" y=\"" << num(T) << "\" width=\""
      << num(W - L - R) << "\" height=\"" << num(H - T - B)
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double fx = x_min + (x_max - x_min) * i / ticks;
    const double fy = y_min + (y_max - y_min) * i / ticks;
    out << "<line x1=\"" << num(px(fx)) << "\" y1=\"" << num(H - B)
        << "\" x2=\"" << num(px(fx)) << "\" y2=\"" << num(H - B + 5)
        << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(H - B + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << num(fx) << "</text>\n";
    out << "<line x1=\"" << num(L - 5) << "\" y1=\"" << num(py(fy))
        << "\" x2=\"" << num(L) << "\" y2=\"" << num(py(fy))
        << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << num(L - 8) << "\" y=\"" << num(py(fy) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << num(fy) << "</text>\n";
  }
  out << "<text x=\"" << num(L + (W - L - R) / 2) << "\" y=\"" << num(H - 14)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">"
      << escape(options.x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << num(T + (H - T - B) / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 16 "
      << num(T + (H - T - B) / 2) << ")\">" << escape(options.y_label)
      << "</text>\n";

  if (options.hline) {
    out << "<line x1=\"" << num(L) << "\" y1=\"" << num(py(*options.hline))
        << "\" x2=\"" << num(W - R) << "\" y2=\"" << num(py(*options.hline))
        << "\" stroke=\"#888\" stroke-dasharray=\"6 4\"/>\n";
    if (!options.hline_label.empty())
      out << "<text x=\"" << num(W - R - 4) << "\" y=\""
          << num(py(*options.hline) - 5)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
             "font-size=\"11\" fill=\"#666\">"
          << escape(options.hline_label) << "</text>\n";
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    if (s.xs.empty()) continue;
    const std::string color =
        s.color.empty() ? kPalette[si % kPalette.size()] : s.color;
    if (s.xs.size() > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.8\" points=\"";
      for (std::size_t i = 0; i < s.xs.size(); ++i) {
        if (i) out << ' ';
        out << num(px(s.xs[i])) << ',' << num(py(s.ys[i]));
      }
      out << "\"/>\n";
    }
    if (s.xs.size() <= 60) {
      for (std::size_t i = 0; i < s.xs.size(); ++i)
        out << "<circle cx=\"" << num(px(s.xs[i])) << "\" cy=\""
            << num(py(s.ys[i])) << "\" r=\"2.6\" fill=\"" << color << "\"/>\n";
    }
    const double ly = T + 16 + 16 * static_cast<double>(si);
    out << "<line x1=\"" << num(W - R - 150) << "\" y1=\"" << num(ly)
        << "\" x2=\"" << num(W - R - 126) << "\" y2=\"" << num(ly)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(W - R - 120) << "\" y=\"" << num(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("write_line_chart_svg: write failed");
}

}  // namespace pnact
