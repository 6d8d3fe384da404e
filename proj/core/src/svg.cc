/*
 * Copyright 2026 The xfdd Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "xfdd/svg.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "xfdd/error.h"

namespace xfdd::svg {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf"};

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string Tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Diverging colour for t in [0, 1]: blue at 0, white at 0.5, red at 1.
std::string Diverging(double t) {
  t = std::clamp(t, 0.0, 1.0);
  int r, g, b;
  if (t < 0.5) {
    const double s = t / 0.5;
    r = static_cast<int>(std::lround(33 + s * (255 - 33)));
    g = static_cast<int>(std::lround(102 + s * (255 - 102)));
    b = static_cast<int>(std::lround(172 + s * (255 - 172)));
  } else {
    const double s = (t - 0.5) / 0.5;
    r = static_cast<int>(std::lround(255 - s * (255 - 178)));
    g = static_cast<int>(std::lround(255 - s * (255 - 24)));
    b = static_cast<int>(std::lround(255 - s * (255 - 43)));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string Escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::string LineChart(const std::string& title, const std::string& x_label,
                      const std::string& y_label, std::span<const Series> series) {
  constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ShapeError("series '" + s.name + "' has x/y mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double pw = W - L - R, ph = H - T - B;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return T + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << Num(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << Escape(title) << "</text>\n"
     << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fy = ymin + (ymax - ymin) * i / 4.0, fx = xmin + (xmax - xmin) * i / 4.0;
    os << "<text x=\"" << Num(L - 6) << "\" y=\"" << Num(py(fy) + 4)
       << "\" text-anchor=\"end\">" << Tick(fy) << "</text>\n"
       << "<text x=\"" << Num(px(fx)) << "\" y=\"" << Num(T + ph + 16)
       << "\" text-anchor=\"middle\">" << Tick(fx) << "</text>\n";
  }
  os << "<text x=\"" << Num(L + pw / 2) << "\" y=\"" << Num(H - 10)
     << "\" text-anchor=\"middle\">" << Escape(x_label) << "</text>\n"
     << "<text transform=\"translate(16," << Num(T + ph / 2)
     << ") rotate(-90)\" text-anchor=\"middle\">" << Escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = kPalette[k % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      os << Num(px(s.x[i])) << ',' << Num(py(s.y[i])) << ' ';
    }
    os << "\"/>\n";
    const double ly = T + 14 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << Num(L + pw + 12) << "\" y1=\"" << Num(ly - 4) << "\" x2=\""
       << Num(L + pw + 32) << "\" y2=\"" << Num(ly - 4) << "\" stroke=\"" << colour
       << "\" stroke-width=\"2\"/>\n<text x=\"" << Num(L + pw + 38) << "\" y=\"" << Num(ly)
       << "\">" << Escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string Heatmap(const std::string& title, const std::vector<std::string>& labels,
                    const std::vector<std::vector<double>>& values, double lo, double hi) {
  const std::size_t n = values.size();
  if (labels.size() != n) throw ShapeError("heatmap label count does not match rows");
  for (const auto& row : values) {
    if (row.size() != n) throw ShapeError("heatmap matrix is not square");
  }
  if (!(hi > lo)) throw InvalidArgument("heatmap range must satisfy lo < hi");
  constexpr double kCell = 22, kMargin = 170, kTop = 40;
  const double side = kCell * static_cast<double>(n);
  const double w = kMargin + side + 90, h = kTop + kMargin + side;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Num(w) << "\" height=\""
     << Num(h) << "\" font-family=\"sans-serif\" font-size=\"10\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << Num(w / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << Escape(title) << "</text>\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double y = kTop + kCell * static_cast<double>(i);
    os << "<text x=\"" << Num(kMargin - 4) << "\" y=\"" << Num(y + kCell * 0.7)
       << "\" text-anchor=\"end\">" << Escape(labels[i]) << "</text>\n";
    const double x = kMargin + kCell * (static_cast<double>(i) + 0.5);
    os << "<text transform=\"translate(" << Num(x) << "," << Num(kTop + side + 6)
       << ") rotate(60)\">" << Escape(labels[i]) << "</text>\n";
    for (std::size_t j = 0; j < n; ++j) {
      const double v = values[i][j];
      os << "<rect x=\"" << Num(kMargin + kCell * static_cast<double>(j)) << "\" y=\""
         << Num(y) << "\" width=\"" << kCell << "\" height=\"" << kCell << "\" fill=\""
         << Diverging((v - lo) / (hi - lo)) << "\"><title>" << Escape(labels[i]) << " / "
         << Escape(labels[j]) << ": " << Tick(v) << "</title></rect>\n";
    }
  }
  const double bx = kMargin + side + 20;
  for (int k = 0; k < 20; ++k) {
    const double t = 1.0 - k / 19.0;
    os << "<rect x=\"" << Num(bx) << "\" y=\"" << Num(kTop + side * k / 20.0)
       << "\" width=\"14\" height=\"" << Num(side / 20.0 + 0.5) << "\" fill=\""
       << Diverging(t) << "\"/>\n";
  }
  os << "<text x=\"" << Num(bx + 18) << "\" y=\"" << Num(kTop + 8) << "\">" << Tick(hi)
     << "</text>\n<text x=\"" << Num(bx + 18) << "\" y=\"" << Num(kTop + side)
     << "\">" << Tick(lo) << "</text>\n</svg>\n";
  return os.str();
}

}  // namespace xfdd::svg
