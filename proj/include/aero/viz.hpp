#pragma once

#include "aero/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace aero::viz {

struct Line {
  std::string label;
  std::vector<double> y;
  std::string color;
};

/// Static SVG line chart over a shared x axis, with an optional horizontal
/// threshold marker.
std::string line_chart(const std::string& title, const std::vector<double>& x, const std::vector<Line>& lines,
                       std::optional<double> threshold = std::nullopt, int width = 900, int height = 260);

/// Diverging heatmap for values in [-1, 1] (blue negative, red positive).
std::string heatmap(const std::string& title, const nn::Tensor2& values, const std::vector<std::string>& labels);

}  // namespace aero::viz
