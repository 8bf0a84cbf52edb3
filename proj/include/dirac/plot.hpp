#pragma once

/**
 * @file plot.hpp
 * @brief CSV reading and static SVG line charts (800 x 600), byte-stable for
 * identical input.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dirac/errors.hpp"

namespace dirac {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  int index_of(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  }
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(in, line)) throw ConfigError("csv: empty file");
  t.header = split(line);
  t.columns.assign(t.header.size(), {});
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) throw ConfigError("csv: wrong number of cells on line " + std::to_string(row));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      try {
        t.columns[j].push_back(std::stod(cells[j]));
      } catch (const std::exception&) {
        throw ConfigError("csv: bad number on line " + std::to_string(row));
      }
    }
  }
  return t;
}

namespace detail {

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

inline std::string fmt_tick(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

}  // namespace detail

/// Line chart of `columns` against column `x`. Unknown columns raise
/// ConfigError.
inline std::string svg_plot(const CsvTable& t, const std::vector<std::string>& columns, const std::string& x = "t") {
  constexpr double W = 800.0;
  constexpr double H = 600.0;
  constexpr double left = 70.0;
  constexpr double right = 160.0;
  constexpr double top = 30.0;
  constexpr double bottom = 50.0;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  const int xi = t.index_of(x);
  if (xi < 0) throw ConfigError("plot: no column '" + x + "'");
  if (columns.empty()) throw ConfigError("plot: no columns selected");
  std::vector<int> yi;
  for (const auto& c : columns) {
    const int j = t.index_of(c);
    if (j < 0) throw ConfigError("plot: no column '" + c + "'");
    yi.push_back(j);
  }
  const auto& xs = t.columns[static_cast<std::size_t>(xi)];
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (!xs.empty()) {
    x0 = *std::min_element(xs.begin(), xs.end());
    x1 = *std::max_element(xs.begin(), xs.end());
    y0 = std::numeric_limits<double>::infinity();
    y1 = -y0;
    for (int j : yi) {
      for (double y : t.columns[static_cast<std::size_t>(j)]) {
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pw = W - left - right;
  const double ph = H - top - bottom;
  auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + (y1 - v) / (y1 - y0) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n";
  os << "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";
  os << "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
  os << "<rect x=\"" << detail::fmt(left) << "\" y=\"" << detail::fmt(top) << "\" width=\"" << detail::fmt(pw)
     << "\" height=\"" << detail::fmt(ph) << "\"/>\n";
  os << "</g>\n<g font-family=\"sans-serif\" font-size=\"12\" fill=\"black\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0;
    const double fy = y0 + (y1 - y0) * k / 4.0;
    os << "<text x=\"" << detail::fmt(px(fx)) << "\" y=\"" << detail::fmt(H - bottom + 18.0)
       << "\" text-anchor=\"middle\">" << detail::fmt_tick(fx) << "</text>\n";
    os << "<text x=\"" << detail::fmt(left - 6.0) << "\" y=\"" << detail::fmt(py(fy) + 4.0)
       << "\" text-anchor=\"end\">" << detail::fmt_tick(fy) << "</text>\n";
  }
  os << "<text x=\"" << detail::fmt(left + pw / 2.0) << "\" y=\"" << detail::fmt(H - 10.0)
     << "\" text-anchor=\"middle\">" << x << "</text>\n";
  os << "</g>\n";
  for (std::size_t c = 0; c < yi.size(); ++c) {
    const auto& ys = t.columns[static_cast<std::size_t>(yi[c])];
    const char* color = colors[c % (sizeof colors / sizeof *colors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) os << (i ? " " : "") << detail::fmt(px(xs[i])) << ',' << detail::fmt(py(ys[i]));
    os << "\"/>\n";
    const double ly = top + 20.0 + 20.0 * static_cast<double>(c);
    os << "<line x1=\"" << detail::fmt(W - right + 15.0) << "\" y1=\"" << detail::fmt(ly) << "\" x2=\""
       << detail::fmt(W - right + 40.0) << "\" y2=\"" << detail::fmt(ly) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << detail::fmt(W - right + 46.0) << "\" y=\"" << detail::fmt(ly + 4.0)
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << columns[c] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace dirac
