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

// Minimal standalone SVG charts for training curves and interaction heatmaps.

#ifndef XFDD_SVG_H_
#define XFDD_SVG_H_

#include <span>
#include <string>
#include <vector>

namespace xfdd::svg {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

std::string Escape(const std::string& text);

// Polylines over shared axes scaled to the data range, with a legend.
std::string LineChart(const std::string& title, const std::string& x_label,
                      const std::string& y_label, std::span<const Series> series);

// Square matrix as coloured cells on a diverging blue-white-red scale over
// [lo, hi], labelled on both axes.
std::string Heatmap(const std::string& title, const std::vector<std::string>& labels,
                    const std::vector<std::vector<double>>& values, double lo = -1.0,
                    double hi = 1.0);

}  // namespace xfdd::svg

#endif  // XFDD_SVG_H_
