#pragma once

// Minimal SVG line and marker plots with linear axes.

#include <iosfwd>
#include <string>
#include <vector>

namespace radshoot {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool markers = false;  // squares at the points instead of a polyline
};

class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add(PlotSeries s) { series_.push_back(std::move(s)); }
  bool empty() const noexcept { return series_.empty(); }
  /// Output depends only on the series, so equal plots give equal bytes.
  void write(std::ostream& os) const;

  /// A qualitative palette entry, cycling.
  static const char* color(std::size_t i) noexcept;

 private:
  std::string title_;
  std::string x_label_;
  std::string y_label_;
  std::vector<PlotSeries> series_;
};

}  // namespace radshoot
