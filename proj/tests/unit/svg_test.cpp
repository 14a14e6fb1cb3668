#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnact/svg.hpp"

using namespace pnact;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

ChartSeries series(const std::string& label, int points) {
  ChartSeries s;
  s.label = label;
  for (int i = 0; i < points; ++i) {
    s.xs.push_back(i);
    s.ys.push_back(i * 0.5 - 1.0);
  }
  return s;
}

}  // namespace

TEST_SUITE("svg") {

TEST_CASE("rejects unusable input") {
  ChartOptions opt;
  CHECK_THROWS_AS(write_line_chart_svg("svg_err.svg", {}, opt),
                  std::invalid_argument);

  ChartSeries bad = series("bad", 3);
  bad.ys.pop_back();
  try {
    write_line_chart_svg("svg_err.svg", {bad}, opt);
    FAIL("expected std::invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }

  ChartSeries empty;
  empty.label = "empty";
  CHECK_THROWS_AS(write_line_chart_svg("svg_err.svg", {empty}, opt),
                  std::invalid_argument);

  CHECK_THROWS_AS(
      write_line_chart_svg("/nonexistent_dir_zzz/chart.svg", {series("a", 3)}, opt),
      std::invalid_argument);
}

TEST_CASE("well-formed chart with markers, legend and reference line") {
  ChartOptions opt;
  opt.title = "test chart";
  opt.x_label = "x";
  opt.y_label = "y";
  opt.hline = 0.25;
  opt.hline_label = "budget";

  ChartSeries a = series("a<b", 5);
  ChartSeries b = series("plain", 5);
  const std::string path = "svg_basic_test.svg";
  write_line_chart_svg(path, {a, b}, opt);
  const std::string text = slurp(path);
  std::remove(path.c_str());

  CHECK(text.rfind("<svg xmlns=", 0) == 0);
  CHECK(text.find("</svg>") != std::string::npos);
  CHECK(text.find("<polyline") != std::string::npos);
  CHECK(text.find("<circle") != std::string::npos);
  CHECK(text.find("stroke-dasharray=\"6 4\"") != std::string::npos);
  CHECK(text.find("budget") != std::string::npos);
  CHECK(text.find("test chart") != std::string::npos);
  CHECK(text.find("#1f77b4") != std::string::npos);
  CHECK(text.find("a&lt;b") != std::string::npos);
  CHECK(text.find("a<b") == std::string::npos);
}

TEST_CASE("large series drop point markers") {
  ChartOptions opt;
  const std::string path = "svg_dense_test.svg";
  write_line_chart_svg(path, {series("dense", 200)}, opt);
  const std::string text = slurp(path);
  std::remove(path.c_str());
  CHECK(text.find("<polyline") != std::string::npos);
  CHECK(text.find("<circle") == std::string::npos);
}

TEST_CASE("single-point series still renders") {
  ChartOptions opt;
  const std::string path = "svg_point_test.svg";
  write_line_chart_svg(path, {series("dot", 1)}, opt);
  const std::string text = slurp(path);
  std::remove(path.c_str());
  CHECK(text.rfind("<svg xmlns=", 0) == 0);
  CHECK(text.find("<circle") != std::string::npos);
}

TEST_CASE("custom series color wins over the palette") {
  ChartOptions opt;
  ChartSeries s = series("tinted", 4);
  s.color = "#ff00aa";
  const std::string path = "svg_color_test.svg";
  write_line_chart_svg(path, {s}, opt);
  const std::string text = slurp(path);
  std::remove(path.c_str());
  CHECK(text.find("#ff00aa") != std::string::npos);
}

TEST_CASE("output is byte-stable across rewrites") {
  ChartOptions opt;
  opt.title = "stability";
  opt.hline = -0.125;
  const std::string p1 = "svg_stable_1.svg";
  const std::string p2 = "svg_stable_2.svg";
  const std::vector<ChartSeries> data{series("a", 7), series("b", 3)};
  write_line_chart_svg(p1, data, opt);
  write_line_chart_svg(p2, data, opt);
  const std::string t1 = slurp(p1);
  const std::string t2 = slurp(p2);
  std::remove(p1.c_str());
  std::remove(p2.c_str());
  CHECK(t1 == t2);
  CHECK(!t1.empty());
}

}  // TEST_SUITE
