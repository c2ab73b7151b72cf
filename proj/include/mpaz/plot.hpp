// Copyright 2026 The mpaz Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MPAZ_PLOT_HPP_
#define MPAZ_PLOT_HPP_

// Minimal SVG line charts for gauntlet summaries.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mpaz/arena.hpp"

namespace mpaz {

struct PlotSeries {
  std::string name;
  std::vector<double> values;
};

// X positions are categorical (one slot per label), matching ladder rungs.
inline std::string svg_line_chart(const std::string& title, const std::string& x_title,
                                  const std::string& y_title,
                                  const std::vector<std::string>& x_labels,
                                  const std::vector<PlotSeries>& series) {
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  const double W = 640, H = 400, left = 60, right = 150, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  double lo = 0.0, hi = 0.0;
  for (const auto& s : series) {
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi - lo < 1e-9) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const size_t nx = x_labels.size();
  auto xpos = [&](size_t i) {
    return nx <= 1 ? left + pw / 2 : left + pw * static_cast<double>(i) / (nx - 1);
  };
  auto ypos = [&](double v) { return top + ph * (hi - v) / (hi - lo); };

  std::ostringstream os;
  os << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      W, H);
  os << fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", W, H);
  os << fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                    left + pw / 2, title);
  os << fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
      left, top, pw, ph);
  if (lo < 0 && hi > 0) {
    os << fmt::format(
        "<line x1=\"{}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"#999\" "
        "stroke-dasharray=\"4 3\"/>\n",
        left, ypos(0), left + pw, ypos(0));
  }
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    os << fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\">{:.1f}</text>\n",
                      left - 6, ypos(v) + 4, v);
  }
  for (size_t i = 0; i < nx; ++i) {
    os << fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", xpos(i),
                      top + ph + 18, x_labels[i]);
  }
  os << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2,
                    H - 10, x_title);
  os << fmt::format(
      "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n",
      top + ph / 2, top + ph / 2, y_title);
  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % 4];
    std::string pts;
    for (size_t i = 0; i < series[s].values.size() && i < nx; ++i) {
      pts += fmt::format("{:.2f},{:.2f} ", xpos(i), ypos(series[s].values[i]));
    }
    os << fmt::format(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", pts, color);
    for (size_t i = 0; i < series[s].values.size() && i < nx; ++i) {
      os << fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", xpos(i),
                        ypos(series[s].values[i]), color);
    }
    const double ly = top + 10 + 18 * static_cast<double>(s);
    os << fmt::format(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
        left + pw + 10, ly, left + pw + 30, ly, color);
    os << fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", left + pw + 35, ly + 4,
                      series[s].name);
  }
  os << "</svg>\n";
  return os.str();
}

inline std::vector<std::string> rung_labels(const std::vector<GauntletRow>& rows) {
  std::vector<std::string> labels;
  for (const auto& r : rows) labels.push_back(std::to_string(r.opponent_rollouts));
  return labels;
}

// Subject total against the opponents' totals per rung.
inline std::string plot_scores(const std::vector<GauntletRow>& rows, const std::string& subject) {
  PlotSeries mine{subject, {}};
  PlotSeries opp{"opponent (mean)", {}};
  for (const auto& r : rows) {
    mine.values.push_back(r.subject_total);
    opp.values.push_back(r.opponent_mean());
  }
  return svg_line_chart("Scores vs. opponent rollouts", "opponent rollouts", "total score",
                        rung_labels(rows), {mine, opp});
}

// Score difference per rung for the subject and, if given, a control run.
inline std::string plot_difference(const std::vector<GauntletRow>& rows,
                                   const std::string& subject,
                                   const std::vector<GauntletRow>* control = nullptr,
                                   const std::string& control_name = "control") {
  std::vector<PlotSeries> series{{subject, {}}};
  for (const auto& r : rows) series[0].values.push_back(r.score_difference);
  if (control) {
    series.push_back({control_name, {}});
    for (const auto& r : *control) series[1].values.push_back(r.score_difference);
  }
  return svg_line_chart("Score difference vs. opponent rollouts", "opponent rollouts",
                        "score difference", rung_labels(rows), series);
}

}  // namespace mpaz

#endif  // MPAZ_PLOT_HPP_
