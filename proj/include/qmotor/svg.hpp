#pragma once

// Minimal quick-look SVG plots (lines, scatter, heatmap). Deliberately bare:
// one size, fixed palette, no styling knobs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace qmotor {

struct SvgSeries {
  std::string name;
  std::vector<double> y;
  bool points_only = false;  ///< scatter markers instead of a polyline
};

namespace detail {

inline const char* svg_palette(size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  return colors[i % 8];
}

inline std::string svg_fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

struct SvgAxes {
  double x0, x1, y0, y1;        // data range
  double px0, px1, py0, py1;    // pixel box
  double px(double x) const { return px0 + (x - x0) / (x1 - x0 + 1e-300) * (px1 - px0); }
  double py(double y) const { return py1 - (y - y0) / (y1 - y0 + 1e-300) * (py1 - py0); }
};

inline void svg_frame(std::ofstream& out, const SvgAxes& a, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel) {
  out << "<rect x='" << a.px0 << "' y='" << a.py0 << "' width='" << a.px1 - a.px0
      << "' height='" << a.py1 - a.py0 << "' fill='none' stroke='#333'/>\n";
  out << "<text x='" << 0.5 * (a.px0 + a.px1) << "' y='18' text-anchor='middle' font-size='14'>"
      << title << "</text>\n";
  out << "<text x='" << 0.5 * (a.px0 + a.px1) << "' y='" << a.py1 + 32
      << "' text-anchor='middle' font-size='12'>" << xlabel << "</text>\n";
  out << "<text x='14' y='" << 0.5 * (a.py0 + a.py1)
      << "' text-anchor='middle' font-size='12' transform='rotate(-90 14 "
      << 0.5 * (a.py0 + a.py1) << ")'>" << ylabel << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = a.x0 + (a.x1 - a.x0) * i / 4.0;
    const double fy = a.y0 + (a.y1 - a.y0) * i / 4.0;
    out << "<text x='" << a.px(fx) << "' y='" << a.py1 + 14
        << "' text-anchor='middle' font-size='10'>" << svg_fmt(fx) << "</text>\n";
    out << "<text x='" << a.px0 - 4 << "' y='" << a.py(fy) + 3
        << "' text-anchor='end' font-size='10'>" << svg_fmt(fy) << "</text>\n";
  }
}

}  // namespace detail

inline void svg_line_plot(const std::string& path, const std::string& title,
                          const std::string& xlabel, const std::string& ylabel,
                          const std::vector<double>& x, const std::vector<SvgSeries>& series) {
  const double w = 720, h = 480;
  detail::SvgAxes a{0, 1, 0, 1, 64, w - 16, 28, h - 48};
  a.x0 = *std::min_element(x.begin(), x.end());
  a.x1 = *std::max_element(x.begin(), x.end());
  a.y0 = 1e300;
  a.y1 = -1e300;
  for (const auto& s : series)
    for (double v : s.y) {
      a.y0 = std::min(a.y0, v);
      a.y1 = std::max(a.y1, v);
    }
  if (a.y1 <= a.y0) {
    a.y0 -= 1.0;
    a.y1 += 1.0;
  }
  const double pad = 0.05 * (a.y1 - a.y0);
  a.y0 -= pad;
  a.y1 += pad;

  std::ofstream out(path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  detail::svg_frame(out, a, title, xlabel, ylabel);
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = detail::svg_palette(si);
    if (s.points_only) {
      for (size_t i = 0; i < x.size(); ++i)
        out << "<circle cx='" << a.px(x[i]) << "' cy='" << a.py(s.y[i])
            << "' r='2.4' fill='" << color << "'/>\n";
    } else {
      out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.4' points='";
      for (size_t i = 0; i < x.size(); ++i)
        out << a.px(x[i]) << ',' << a.py(s.y[i]) << ' ';
      out << "'/>\n";
    }
    out << "<text x='" << a.px1 - 8 << "' y='" << 40 + 14 * si
        << "' text-anchor='end' font-size='11' fill='" << color << "'>" << s.name << "</text>\n";
  }
  out << "</svg>\n";
}

/// Heatmap of z(i, j) on the grid x[i] (columns) by y[j] (rows), z row-major
/// in j. Diverging blue-white-red ramp symmetric around zero.
inline void svg_heatmap(const std::string& path, const std::string& title,
                        const std::string& xlabel, const std::string& ylabel,
                        const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<std::vector<double>>& z) {
  const double w = 720, h = 480;
  detail::SvgAxes a{0, 1, 0, 1, 64, w - 16, 28, h - 48};
  a.x0 = x.front();
  a.x1 = x.back();
  a.y0 = y.front();
  a.y1 = y.back();
  double zmax = 1e-300;
  for (const auto& row : z)
    for (double v : row) zmax = std::max(zmax, std::abs(v));

  std::ofstream out(path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  const double cw = (a.px1 - a.px0) / x.size();
  const double ch = (a.py1 - a.py0) / y.size();
  for (size_t j = 0; j < y.size(); ++j)
    for (size_t i = 0; i < x.size(); ++i) {
      const double t = std::clamp(z[j][i] / zmax, -1.0, 1.0);
      const int r = t > 0 ? 255 : static_cast<int>(255 * (1.0 + t));
      const int b = t < 0 ? 255 : static_cast<int>(255 * (1.0 - t));
      const int g = static_cast<int>(255 * (1.0 - std::abs(t)));
      out << "<rect x='" << a.px0 + i * cw << "' y='" << a.py1 - (j + 1) * ch << "' width='"
          << cw + 0.5 << "' height='" << ch + 0.5 << "' fill='rgb(" << r << ',' << g << ',' << b
          << ")'/>\n";
    }
  detail::svg_frame(out, a, title, xlabel, ylabel);
  out << "</svg>\n";
}

}  // namespace qmotor
