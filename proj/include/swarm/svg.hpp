#pragma once

#include <string>
#include <vector>

namespace swarm {

struct SvgPoint {
  double x = 0;
  double y = 0;
  double yerr = 0;  // half-length of the error bar; 0 = none
};

struct SvgSeries {
  std::string label;
  std::vector<SvgPoint> points;
  bool line = true;
  bool markers = true;
};

// Minimal static line-chart emitter. Output is deterministic text.
struct SvgChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<SvgSeries> series;

  std::string render() const;
  void save(const std::string& path) const;
};

}  // namespace swarm
