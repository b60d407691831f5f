#pragma once

#include "aero/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aero {

using Matrix = nn::Tensor2;

/// Dense 0/1 matrix (variates x timestamps).
class BinaryMatrix {
 public:
  BinaryMatrix() = default;
  BinaryMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v = true) { data_[r * cols_ + c] = v ? 1 : 0; }
  std::size_t count() const;
  bool same_shape(const BinaryMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  /// Columns [begin, end).
  BinaryMatrix slice_cols(std::size_t begin, std::size_t end) const;

  bool operator==(const BinaryMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> data_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace data {

/// N-variate magnitude series over CT timestamps.
struct ObservationFrame {
  std::vector<std::string> names;  ///< one per variate
  std::vector<double> times;       ///< CT strictly increasing values
  Matrix values;                   ///< N x CT
  std::optional<BinaryMatrix> labels;
  std::optional<BinaryMatrix> noise_mask;

  std::size_t variates() const { return values.rows(); }
  std::size_t length() const { return values.cols(); }

  /// Throws ValidationError when an invariant is broken.
  void validate() const;
  /// Timestamps [begin, end) with matching labels and masks.
  ObservationFrame slice(std::size_t begin, std::size_t end) const;
};

/// Reads `<dir>/<name>.csv` plus optional `<name>.labels.csv` and
/// `<name>.noise.csv` siblings.
ObservationFrame load_csv(const std::filesystem::path& path);

/// Writes the data file and, when present, the label/noise siblings.
void write_csv(const ObservationFrame& frame, const std::filesystem::path& path);

/// Sibling path for a companion file: foo.csv -> foo.<kind>.csv
std::filesystem::path companion_path(const std::filesystem::path& path, const std::string& kind);

/// Per-variate min/max of the training split.
struct NormStats {
  std::vector<double> min;
  std::vector<double> max;
};

NormStats fit_normalize(const ObservationFrame& frame);
/// (v - min) / (max - min) clipped to [0, 1].
ObservationFrame apply_normalize(const ObservationFrame& frame, const NormStats& stats);
ObservationFrame inverse_normalize(const ObservationFrame& frame, const NormStats& stats);

double median_interval(const std::vector<double>& times);

/// One sliding-window sample ending at `end_index`.
struct WindowInstance {
  Matrix long_segment;   ///< N x W
  Matrix short_segment;  ///< N x omega, trailing columns of long_segment
  std::vector<std::int64_t> positions;  ///< W positions, see PositionMode
  std::vector<double> deltas;           ///< W normalized intervals
  std::size_t end_index = 0;
};

/// global: pos_t is the column index within the frame; window: 0..W-1
/// inside every window, as in a plain sequence Transformer.
enum class PositionMode { global, window };

std::string to_string(PositionMode m);
PositionMode parse_position_mode(const std::string& s);

struct WindowOptions {
  std::size_t window = 200;  ///< W
  std::size_t short_window = 60;  ///< omega
  std::size_t stride = 1;
  /// Interval that maps to delta = 1; the training frame's median.
  double reference_interval = 1.0;
  PositionMode positions = PositionMode::global;
};

/// Lazily materialized sliding windows over a shared frame. Instance i
/// ends at window - 1 + i * stride.
class WindowSet {
 public:
  WindowSet() = default;
  WindowSet(std::shared_ptr<const ObservationFrame> frame, WindowOptions options);

  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  std::size_t end_index(std::size_t i) const { return options_.window - 1 + i * options_.stride; }
  WindowInstance operator[](std::size_t i) const;
  const WindowOptions& options() const { return options_; }
  const ObservationFrame& frame() const { return *frame_; }
  std::shared_ptr<const ObservationFrame> frame_ptr() const { return frame_; }

 private:
  std::shared_ptr<const ObservationFrame> frame_;
  WindowOptions options_;
  std::vector<double> deltas_;  ///< one per timestamp of the frame
  std::size_t count_ = 0;
};

WindowSet make_windows(std::shared_ptr<const ObservationFrame> frame, const WindowOptions& options);

}  // namespace data
}  // namespace aero
