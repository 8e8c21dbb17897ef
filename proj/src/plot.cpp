/*
 * Copyright 2026 The tripcon Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "tripcon/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace tripcon::plot {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 360;
constexpr double kLeft = 56;
constexpr double kRight = 150;
constexpr double kTop = 36;
constexpr double kBottom = 44;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
     << "</text>\n";
}

void axes(std::ostringstream& os, double lo, double hi) {
  const double x1 = kWidth - kRight;
  const double y1 = kHeight - kBottom;
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << y1
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << y1 << "\" x2=\"" << x1 << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    const double y = y1 - (y1 - kTop) * i / 4.0;
    os << "<text x=\"" << kLeft - 4 << "\" y=\"" << fmt(y + 4) << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label, const std::vector<Series>& series) {
  double lo = INFINITY, hi = -INFINITY;
  std::size_t n = 0;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  std::ostringstream os;
  header(os, title);
  axes(os, lo, hi);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  auto px = [&](std::size_t i) { return n > 1 ? x0 + (x1 - x0) * static_cast<double>(i) / (n - 1) : (x0 + x1) / 2; };
  auto py = [&](double v) { return y0 - (y0 - y1) * (v - lo) / (hi - lo); };
  os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">" << escape(x_label)
     << " (0.." << (n ? n - 1 : 0) << ")</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < series[k].values.size(); ++i) {
      const double v = series[k].values[i];
      if (!std::isfinite(v)) continue;
      points += fmt(px(i)) + "," + fmt(py(v)) + " ";
    }
    if (!points.empty()) points.pop_back();
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << points << "\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(k);
    os << "<rect x=\"" << x1 + 10 << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n"
       << "<text x=\"" << x1 + 24 << "\" y=\"" << ly + 9 << "\">" << escape(series[k].name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values, double y_max) {
  std::ostringstream os;
  header(os, title);
  axes(os, 0.0, y_max);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  const double slot = labels.empty() ? 0.0 : (x1 - x0) / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double cx = x0 + slot * (static_cast<double>(i) + 0.5);
    const double v = i < values.size() ? values[i] : NAN;
    if (std::isfinite(v)) {
      const double h = (y0 - y1) * std::clamp(v / y_max, 0.0, 1.0);
      os << "<rect x=\"" << fmt(cx - slot * 0.35) << "\" y=\"" << fmt(y0 - h) << "\" width=\"" << fmt(slot * 0.7)
         << "\" height=\"" << fmt(h) << "\" fill=\"" << kPalette[0] << "\"/>\n"
         << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(y0 - h - 3) << "\" text-anchor=\"middle\">" << fmt(v)
         << "</text>\n";
    } else {
      os << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(y0 - 3) << "\" text-anchor=\"middle\">n/a</text>\n";
    }
    os << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(y0 + 14) << "\" text-anchor=\"middle\">" << escape(labels[i])
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace tripcon::plot
