#include "aero/data.hpp"

#include "aero/io.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace aero {

std::size_t BinaryMatrix::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

BinaryMatrix BinaryMatrix::slice_cols(std::size_t begin, std::size_t end) const {
  BinaryMatrix out(rows_, end - begin);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = begin; c < end; ++c) out.set(r, c - begin, (*this)(r, c));
  }
  return out;
}

namespace data {

void ObservationFrame::validate() const {
  if (times.size() != values.cols()) {
    throw ValidationError("frame has " + std::to_string(times.size()) + " times but " +
                          std::to_string(values.cols()) + " value columns");
  }
  if (!names.empty() && names.size() != values.rows()) throw ValidationError("variate name count mismatch");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw ValidationError("time values must be strictly increasing (timestamp " + std::to_string(i) + ")");
    }
  }
  if (!values.all_finite()) throw ValidationError("frame contains non-finite values");
  auto check = [&](const std::optional<BinaryMatrix>& m, const char* what) {
    if (m && (m->rows() != values.rows() || m->cols() != values.cols())) {
      throw ValidationError(std::string(what) + " shape " + std::to_string(m->rows()) + "x" +
                            std::to_string(m->cols()) + " does not match values " + shape_str(values));
    }
  };
  check(labels, "labels");
  check(noise_mask, "noise mask");
}

ObservationFrame ObservationFrame::slice(std::size_t begin, std::size_t end) const {
  ObservationFrame out;
  out.names = names;
  out.times.assign(times.begin() + static_cast<std::ptrdiff_t>(begin), times.begin() + static_cast<std::ptrdiff_t>(end));
  out.values = Matrix(values.rows(), end - begin);
  for (std::size_t r = 0; r < values.rows(); ++r) {
    std::copy_n(values.row(r).begin() + static_cast<std::ptrdiff_t>(begin), end - begin, out.values.row(r).begin());
  }
  if (labels) out.labels = labels->slice_cols(begin, end);
  if (noise_mask) out.noise_mask = noise_mask->slice_cols(begin, end);
  return out;
}

std::filesystem::path companion_path(const std::filesystem::path& path, const std::string& kind) {
  auto out = path;
  out.replace_filename(path.stem().string() + "." + kind + path.extension().string());
  return out;
}

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<double> times;
  std::vector<std::vector<double>> columns;  // one per non-time column
};

Table read_table(const std::filesystem::path& path) {
  const std::string file = path.string();
  std::istringstream in(io::read_file(path));
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto trimmed = io::trim(line);
    if (trimmed.empty()) continue;
    auto cells = io::split(trimmed, ',');
    if (t.header.empty()) {
      for (auto& c : cells) c = std::string(io::trim(c));
      if (cells.size() < 2) throw ParseError(file, lineno, "header needs a time column and at least one variate");
      if (cells[0] != "time") throw ParseError(file, lineno, "first column must be named 'time'");
      t.header = cells;
      t.columns.resize(cells.size() - 1);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ParseError(file, lineno,
                       "expected " + std::to_string(t.header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto cell = io::trim(cells[c]);
      if (cell.empty()) throw ParseError(file, lineno, "missing value in column " + t.header[c]);
      double v = 0.0;
      try {
        v = io::parse_double(cell);
      } catch (const std::invalid_argument&) {
        throw ParseError(file, lineno, "malformed number '" + std::string(cell) + "' in column " + t.header[c]);
      }
      if (!std::isfinite(v)) throw ParseError(file, lineno, "non-finite value in column " + t.header[c]);
      if (c == 0) {
        if (!t.times.empty() && !(v > t.times.back())) {
          throw ValidationError(file + ": row " + std::to_string(t.times.size() + 1) + " (line " +
                                std::to_string(lineno) + ") has non-increasing time " + std::string(cell));
        }
        t.times.push_back(v);
      } else {
        t.columns[c - 1].push_back(v);
      }
    }
  }
  if (t.header.empty()) throw ParseError(file, lineno, "empty file");
  return t;
}

BinaryMatrix load_binary(const std::filesystem::path& path, const ObservationFrame& frame) {
  Table t = read_table(path);
  if (t.columns.size() != frame.variates() || t.times.size() != frame.length()) {
    throw ValidationError(path.string() + ": shape " + std::to_string(t.columns.size()) + "x" +
                          std::to_string(t.times.size()) + " does not match data shape " +
                          std::to_string(frame.variates()) + "x" + std::to_string(frame.length()));
  }
  BinaryMatrix m(frame.variates(), frame.length());
  for (std::size_t r = 0; r < t.columns.size(); ++r) {
    for (std::size_t c = 0; c < t.times.size(); ++c) {
      const double v = t.columns[r][c];
      if (v != 0.0 && v != 1.0) throw ValidationError(path.string() + ": cells must be 0 or 1");
      m.set(r, c, v == 1.0);
    }
  }
  return m;
}

std::string render_table(const std::vector<std::string>& names, const std::vector<double>& times,
                         std::size_t rows, const std::function<std::string(std::size_t, std::size_t)>& cell) {
  std::string out = "time";
  for (const auto& n : names) out += "," + n;
  out += '\n';
  for (std::size_t c = 0; c < times.size(); ++c) {
    out += io::format_double(times[c]);
    for (std::size_t r = 0; r < rows; ++r) {
      out += ',';
      out += cell(r, c);
    }
    out += '\n';
  }
  return out;
}

}  // namespace

ObservationFrame load_csv(const std::filesystem::path& path) {
  Table t = read_table(path);
  ObservationFrame f;
  f.names.assign(t.header.begin() + 1, t.header.end());
  f.times = std::move(t.times);
  f.values = Matrix(f.names.size(), f.times.size());
  for (std::size_t r = 0; r < t.columns.size(); ++r) {
    std::copy(t.columns[r].begin(), t.columns[r].end(), f.values.row(r).begin());
  }
  if (auto p = companion_path(path, "labels"); std::filesystem::exists(p)) f.labels = load_binary(p, f);
  if (auto p = companion_path(path, "noise"); std::filesystem::exists(p)) f.noise_mask = load_binary(p, f);
  f.validate();
  return f;
}

void write_csv(const ObservationFrame& frame, const std::filesystem::path& path) {
  frame.validate();
  std::vector<std::string> names = frame.names;
  if (names.empty()) {
    for (std::size_t i = 0; i < frame.variates(); ++i) names.push_back("v" + std::to_string(i));
  }
  io::write_file_atomic(path, render_table(names, frame.times, frame.variates(), [&](std::size_t r, std::size_t c) {
                          return io::format_double(frame.values(r, c));
                        }));
  auto write_mask = [&](const BinaryMatrix& m, const char* kind) {
    io::write_file_atomic(companion_path(path, kind),
                          render_table(names, frame.times, m.rows(),
                                       [&](std::size_t r, std::size_t c) { return m(r, c) ? "1" : "0"; }));
  };
  if (frame.labels) write_mask(*frame.labels, "labels");
  if (frame.noise_mask) write_mask(*frame.noise_mask, "noise");
}

NormStats fit_normalize(const ObservationFrame& frame) {
  if (frame.length() == 0 || frame.variates() == 0) throw ValidationError("fit_normalize: empty frame");
  NormStats s;
  for (std::size_t r = 0; r < frame.variates(); ++r) {
    const auto row = frame.values.row(r);
    auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    double mn = *lo;
    double mx = *hi;
    if (mx == mn) {
      const std::string name = r < frame.names.size() ? frame.names[r] : std::to_string(r);
      warn("variate " + name + " is constant in the training split; using max = min + 1");
      mx = mn + 1.0;
    }
    s.min.push_back(mn);
    s.max.push_back(mx);
  }
  return s;
}

ObservationFrame apply_normalize(const ObservationFrame& frame, const NormStats& stats) {
  if (stats.min.size() != frame.variates()) throw ValidationError("normalization stats do not match variate count");
  ObservationFrame out = frame;
  for (std::size_t r = 0; r < frame.variates(); ++r) {
    const double span = stats.max[r] - stats.min[r];
    for (double& v : out.values.row(r)) v = std::clamp((v - stats.min[r]) / span, 0.0, 1.0);
  }
  return out;
}

ObservationFrame inverse_normalize(const ObservationFrame& frame, const NormStats& stats) {
  if (stats.min.size() != frame.variates()) throw ValidationError("normalization stats do not match variate count");
  ObservationFrame out = frame;
  for (std::size_t r = 0; r < frame.variates(); ++r) {
    const double span = stats.max[r] - stats.min[r];
    for (double& v : out.values.row(r)) v = stats.min[r] + v * span;
  }
  return out;
}

double median_interval(const std::vector<double>& times) {
  if (times.size() < 2) return 1.0;
  std::vector<double> d(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i) d[i - 1] = times[i] - times[i - 1];
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double m = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

WindowSet::WindowSet(std::shared_ptr<const ObservationFrame> frame, WindowOptions options)
    : frame_(std::move(frame)), options_(options) {
  if (options_.short_window == 0 || options_.short_window >= options_.window) {
    throw std::invalid_argument("window options need 0 < short_window < window");
  }
  if (options_.stride == 0) throw std::invalid_argument("window stride must be >= 1");
  if (!(options_.reference_interval > 0.0)) throw std::invalid_argument("reference interval must be positive");
  const std::size_t ct = frame_->length();
  if (ct < options_.window) {
    warn("series of length " + std::to_string(ct) + " is shorter than the window " +
         std::to_string(options_.window) + "; no instances");
    count_ = 0;
  } else {
    count_ = (ct - options_.window) / options_.stride + 1;
  }
  deltas_.resize(ct);
  const auto& t = frame_->times;
  for (std::size_t i = 0; i < ct; ++i) {
    deltas_[i] = i == 0 ? 1.0 : (t[i] - t[i - 1]) / options_.reference_interval;
  }
}

WindowInstance WindowSet::operator[](std::size_t i) const {
  if (i >= count_) throw std::out_of_range("window index out of range");
  const std::size_t w = options_.window;
  const std::size_t sw = options_.short_window;
  const std::size_t end = end_index(i);
  const std::size_t begin = end + 1 - w;
  const auto& values = frame_->values;
  WindowInstance inst;
  inst.end_index = end;
  inst.long_segment = Matrix(values.rows(), w);
  inst.short_segment = Matrix(values.rows(), sw);
  for (std::size_t r = 0; r < values.rows(); ++r) {
    const auto src = values.row(r);
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(begin), w, inst.long_segment.row(r).begin());
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(end + 1 - sw), sw, inst.short_segment.row(r).begin());
  }
  inst.positions.resize(w);
  const auto first = options_.positions == PositionMode::global ? static_cast<std::int64_t>(begin) : std::int64_t{0};
  std::iota(inst.positions.begin(), inst.positions.end(), first);
  inst.deltas.assign(deltas_.begin() + static_cast<std::ptrdiff_t>(begin),
                     deltas_.begin() + static_cast<std::ptrdiff_t>(end + 1));
  return inst;
}

std::string to_string(PositionMode m) { return m == PositionMode::global ? "global" : "window"; }

PositionMode parse_position_mode(const std::string& s) {
  if (s == "global") return PositionMode::global;
  if (s == "window") return PositionMode::window;
  throw std::invalid_argument("unknown position mode '" + s + "' (expected global or window)");
}

WindowSet make_windows(std::shared_ptr<const ObservationFrame> frame, const WindowOptions& options) {
  return WindowSet(std::move(frame), options);
}

}  // namespace data
}  // namespace aero
