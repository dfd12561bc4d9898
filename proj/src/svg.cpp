#include "swarm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace swarm {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                         "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[32];
  if (v != 0 && (std::fabs(v) >= 10000 || std::fabs(v) < 0.01))
    std::snprintf(buf, sizeof(buf), "%.1e", v);
  else
    std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

double nice_step(double range) {
  if (range <= 0) return 1;
  double raw = range / 5.0;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double norm = raw / mag;
  double step = norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10;
  return step * mag;
}

}  // namespace

std::string SvgChart::render() const {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y - p.yerr);
      ymax = std::max(ymax, p.y + p.yerr);
    }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (ymin > 0 && ymin < ymax * 0.5) ymin = 0;  // anchor near-zero axes at zero
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  double ypad = (ymax - ymin) * 0.05;
  ymax += ypad;

  double lxmin = log_x ? std::log2(xmin) : xmin;
  double lxmax = log_x ? std::log2(xmax) : xmax;
  auto sx = [&](double x) {
    double v = log_x ? std::log2(x) : x;
    return kLeft + (v - lxmin) / (lxmax - lxmin) * (kWidth - kLeft - kRight);
  };
  auto sy = [&](double y) {
    return kHeight - kBottom - (y - ymin) / (ymax - ymin) * (kHeight - kTop - kBottom);
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";

  // axes
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\""
      << kWidth - kRight << "\" y2=\"" << kHeight - kBottom
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kHeight - kBottom << "\" stroke=\"black\"/>\n";

  // x ticks: data values when log-scaled, nice steps otherwise
  std::set<double> xticks;
  if (log_x) {
    for (const auto& s : series)
      for (const auto& p : s.points) xticks.insert(p.x);
  } else {
    double step = nice_step(xmax - xmin);
    for (double v = std::ceil(xmin / step) * step; v <= xmax + 1e-9; v += step)
      xticks.insert(v);
  }
  for (double v : xticks) {
    double x = sx(v);
    out << "<line x1=\"" << fmt(x) << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << fmt(x)
        << "\" y2=\"" << kHeight - kBottom + 4 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt(x) << "\" y=\"" << kHeight - kBottom + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt_tick(v) << "</text>\n";
  }
  double ystep = nice_step(ymax - ymin);
  for (double v = std::ceil(ymin / ystep) * ystep; v <= ymax + 1e-9; v += ystep) {
    double y = sy(v);
    out << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << fmt(y) << "\" x2=\"" << kLeft
        << "\" y2=\"" << fmt(y) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kLeft - 7 << "\" y=\"" << fmt(y + 3)
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt_tick(v) << "</text>\n";
  }
  out << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << (kTop + kHeight - kBottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (kTop + kHeight - kBottom) / 2 << ")\">" << y_label << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % 8];
    if (s.line && s.points.size() > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& p : s.points) out << fmt(sx(p.x)) << "," << fmt(sy(p.y)) << " ";
      out << "\"/>\n";
    }
    for (const auto& p : s.points) {
      if (p.yerr > 0) {
        out << "<line x1=\"" << fmt(sx(p.x)) << "\" y1=\"" << fmt(sy(p.y - p.yerr))
            << "\" x2=\"" << fmt(sx(p.x)) << "\" y2=\"" << fmt(sy(p.y + p.yerr))
            << "\" stroke=\"" << color << "\"/>\n";
      }
      if (s.markers)
        out << "<circle cx=\"" << fmt(sx(p.x)) << "\" cy=\"" << fmt(sy(p.y))
            << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    out << "<text x=\"" << kWidth - kRight - 6 << "\" y=\"" << kTop + 14 * (i + 1)
        << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << color << "\">" << s.label
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void SvgChart::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write chart file: " + path);
  out << render();
}

}  // namespace swarm
