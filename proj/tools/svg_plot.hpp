#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace fosep::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
};

struct Panel {
  std::string ylabel;
  std::vector<Series> series;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

// Roughly 5 round tick values covering [lo, hi].
inline std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) out.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
  return out;
}

}  // namespace detail

/// Writes vertically stacked panels sharing the x axis as a standalone SVG.
inline bool write_svg(const std::string& file, const std::string& title, const std::string& xlabel,
                      const std::vector<Panel>& panels) {
  constexpr double kWidth = 900.0;
  constexpr double kPanelHeight = 220.0;
  constexpr double kLeft = 80.0;
  constexpr double kRight = 160.0;
  constexpr double kTop = 40.0;
  constexpr double kGap = 30.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double height = kTop + panels.size() * (kPanelHeight + kGap) + 40.0;

  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  for (const auto& p : panels) {
    for (const auto& s : p.series) {
      for (double v : s.x) {
        xmin = std::min(xmin, v);
        xmax = std::max(xmax, v);
      }
    }
  }
  if (!(xmax > xmin)) xmax = xmin + 1.0;

  std::ofstream out(file);
  if (!out) return false;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << detail::escape(title)
      << "</text>\n";

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const Panel& p = panels[pi];
    const double top = kTop + pi * (kPanelHeight + kGap);
    double ymin = std::numeric_limits<double>::infinity();
    double ymax = -ymin;
    for (const auto& s : p.series) {
      for (double v : s.y) {
        if (!std::isfinite(v)) continue;
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
      }
    }
    if (!(ymax > ymin)) {
      ymin -= 1.0;
      ymax += 1.0;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    const auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * plot_w; };
    const auto py = [&](double y) { return top + kPanelHeight - (y - ymin) / (ymax - ymin) * kPanelHeight; };

    out << "<rect x=\"" << kLeft << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << kPanelHeight
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (double t : detail::ticks(ymin, ymax)) {
      out << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + plot_w << "\" y1=\"" << py(t) << "\" y2=\"" << py(t)
          << "\" stroke=\"#ddd\"/>\n";
      out << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">" << detail::num(t)
          << "</text>\n";
    }
    for (double t : detail::ticks(xmin, xmax)) {
      out << "<line x1=\"" << px(t) << "\" x2=\"" << px(t) << "\" y1=\"" << top << "\" y2=\"" << top + kPanelHeight
          << "\" stroke=\"#eee\"/>\n";
      if (pi + 1 == panels.size()) {
        out << "<text x=\"" << px(t) << "\" y=\"" << top + kPanelHeight + 16 << "\" text-anchor=\"middle\">"
            << detail::num(t) << "</text>\n";
      }
    }
    out << "<text transform=\"translate(18," << top + kPanelHeight / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << detail::escape(p.ylabel) << "</text>\n";

    for (std::size_t si = 0; si < p.series.size(); ++si) {
      const Series& s = p.series[si];
      const std::size_t n = std::min(s.x.size(), s.y.size());
      const std::size_t stride = std::max<std::size_t>(1, n / 2000);
      out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.3\" points=\"";
      for (std::size_t k = 0; k < n; k += stride) {
        if (std::isfinite(s.y[k])) out << detail::num(px(s.x[k])) << "," << detail::num(py(s.y[k])) << " ";
      }
      out << "\"/>\n";
      const double ly = top + 16 + 16.0 * si;
      out << "<line x1=\"" << kLeft + plot_w + 10 << "\" x2=\"" << kLeft + plot_w + 30 << "\" y1=\"" << ly - 4
          << "\" y2=\"" << ly - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
      out << "<text x=\"" << kLeft + plot_w + 34 << "\" y=\"" << ly << "\">" << detail::escape(s.name) << "</text>\n";
    }
  }
  out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">"
      << detail::escape(xlabel) << "</text>\n";
  out << "</svg>\n";
  return static_cast<bool>(out);
}

}  // namespace fosep::plot
