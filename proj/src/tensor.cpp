#include "aero/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace aero::nn {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(data.begin(), data.end()) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Tensor2: data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Tensor2::Tensor2(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Tensor2: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor2 Tensor2::transposed() const {
  Tensor2 t(cols_, rows_);
  t.map() = map().transpose();
  return t;
}

Tensor2 Tensor2::reshaped(std::size_t rows, std::size_t cols) const {
  if (rows * cols != size()) throw ShapeError("reshape: element count mismatch");
  Tensor2 t = *this;
  t.rows_ = rows;
  t.cols_ = cols;
  return t;
}

std::string shape_str(const Tensor2& t) { return std::to_string(t.rows()) + "x" + std::to_string(t.cols()); }

}  // namespace aero::nn
