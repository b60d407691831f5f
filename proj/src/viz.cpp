#include "aero/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace aero::viz {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

std::string line_chart(const std::string& title, const std::vector<double>& x, const std::vector<Line>& lines,
                       std::optional<double> threshold, int width, int height) {
  const double left = 60, right = 20, top = 28, bottom = 30;
  const double pw = width - left - right, ph = height - top - bottom;
  double xmin = x.empty() ? 0.0 : x.front(), xmax = x.empty() ? 1.0 : x.back();
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  for (const auto& l : lines) {
    for (double v : l.y) {
      if (std::isfinite(v)) {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
      }
    }
  }
  if (threshold) {
    ymin = std::min(ymin, *threshold);
    ymax = std::max(ymax, *threshold);
  }
  if (!std::isfinite(ymin)) ymin = 0.0, ymax = 1.0;
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  auto px = [&](double v) { return left + (v - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double v) { return top + (1.0 - (v - ymin) / (ymax - ymin)) * ph; };

  std::string s = header(width, height);
  s += "<text x=\"" + num(left) + "\" y=\"16\" font-size=\"13\">" + escape(title) + "</text>\n";
  s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"#888\"/>\n";
  s += "<text x=\"4\" y=\"" + num(top + 10) + "\">" + num(ymax) + "</text>\n";
  s += "<text x=\"4\" y=\"" + num(top + ph) + "\">" + num(ymin) + "</text>\n";
  s += "<text x=\"" + num(left) + "\" y=\"" + num(height - 8.0) + "\">" + num(xmin) + "</text>\n";
  s += "<text x=\"" + num(left + pw - 40) + "\" y=\"" + num(height - 8.0) + "\">" + num(xmax) + "</text>\n";
  double legend_x = left + 200;
  for (const auto& l : lines) {
    std::string pts;
    for (std::size_t i = 0; i < x.size() && i < l.y.size(); ++i) {
      if (!pts.empty()) pts += ' ';
      pts += num(px(x[i])) + "," + num(py(l.y[i]));
    }
    s += "<polyline fill=\"none\" stroke=\"" + l.color + "\" stroke-width=\"1\" points=\"" + pts + "\"/>\n";
    s += "<text x=\"" + num(legend_x) + "\" y=\"16\" fill=\"" + l.color + "\">" + escape(l.label) + "</text>\n";
    legend_x += 12.0 + 7.0 * static_cast<double>(l.label.size());
  }
  if (threshold) {
    const double y = py(*threshold);
    s += "<line x1=\"" + num(left) + "\" x2=\"" + num(left + pw) + "\" y1=\"" + num(y) + "\" y2=\"" + num(y) +
         "\" stroke=\"#d62728\" stroke-dasharray=\"6,3\"/>\n";
    s += "<text x=\"" + num(legend_x) + "\" y=\"16\" fill=\"#d62728\">threshold " + num(*threshold) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string heatmap(const std::string& title, const nn::Tensor2& values, const std::vector<std::string>& labels) {
  const std::size_t n = values.rows();
  const int cell = 18, left = 70, top = 40;
  const int width = left + static_cast<int>(values.cols()) * cell + 20;
  const int height = top + static_cast<int>(n) * cell + 20;
  std::string s = header(width, height);
  s += "<text x=\"10\" y=\"18\" font-size=\"13\">" + escape(title) + "</text>\n";
  for (std::size_t r = 0; r < n; ++r) {
    const std::string name = r < labels.size() ? labels[r] : std::to_string(r);
    s += "<text x=\"4\" y=\"" + std::to_string(top + static_cast<int>(r) * cell + 13) + "\">" + escape(name) +
         "</text>\n";
    for (std::size_t c = 0; c < values.cols(); ++c) {
      const double v = std::clamp(values(r, c), -1.0, 1.0);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(v))));
      const std::string color = v >= 0 ? "rgb(255," + std::to_string(shade) + "," + std::to_string(shade) + ")"
                                       : "rgb(" + std::to_string(shade) + "," + std::to_string(shade) + ",255)";
      s += "<rect x=\"" + std::to_string(left + static_cast<int>(c) * cell) + "\" y=\"" +
           std::to_string(top + static_cast<int>(r) * cell) + "\" width=\"" + std::to_string(cell) + "\" height=\"" +
           std::to_string(cell) + "\" fill=\"" + color + "\"><title>" + num(values(r, c)) + "</title></rect>\n";
    }
  }
  s += "</svg>\n";
  return s;
}

}  // namespace aero::viz
