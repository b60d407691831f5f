#include "aero/detector.hpp"

#include "aero/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace aero::detect {

namespace {

struct WindowScore {
  std::vector<double> last_error;
  std::vector<double> last_residual;
  Matrix similarity;
};

WindowScore score_window(const Matrix& y, const Matrix& y1, const noise::NoiseModule& noise, const ScoreOptions& opts,
                         bool keep_graph) {
  const std::size_t n = y.rows();
  const std::size_t last = y.cols() - 1;
  WindowScore ws;
  ws.last_error.resize(n);
  ws.last_residual.resize(n);
  if (!opts.use_stage2) {
    for (std::size_t r = 0; r < n; ++r) ws.last_residual[r] = ws.last_error[r] = y(r, last) - y1(r, last);
    return ws;
  }
  auto out = noise::stage2_from_y1(y, y1, noise, opts.graph);
  for (std::size_t r = 0; r < n; ++r) {
    ws.last_error[r] = out.error(r, last);
    ws.last_residual[r] = out.residual(r, last);
  }
  if (keep_graph) ws.similarity = std::move(out.graph.similarity);
  return ws;
}

class SeriesBuilder {
 public:
  SeriesBuilder(std::size_t n, std::size_t t, const ScoreOptions& opts) : opts_(opts) {
    s_.scores = Matrix(n, t);
    s_.stage1_error = Matrix(n, t);
    s_.residual = Matrix(n, t);
    s_.end_index.reserve(t);
    s_.times.reserve(t);
  }

  bool wants_graph(std::size_t i) const {
    return std::find(opts_.dump_graphs.begin(), opts_.dump_graphs.end(), i) != opts_.dump_graphs.end();
  }

  void add(std::size_t i, std::size_t end_index, double time, WindowScore&& ws) {
    for (std::size_t r = 0; r < s_.scores.rows(); ++r) {
      s_.stage1_error(r, i) = ws.last_error[r];
      s_.residual(r, i) = ws.last_residual[r];
      s_.scores(r, i) = std::abs(ws.last_residual[r]);
    }
    s_.end_index.push_back(end_index);
    s_.times.push_back(time);
    if (ws.similarity.size() > 0) s_.graphs.emplace(i, std::move(ws.similarity));
  }

  ScoreSeries take() { return std::move(s_); }

 private:
  ScoreSeries s_;
  const ScoreOptions& opts_;
};

}  // namespace

ScoreSeries score_stream(const data::WindowSet& windows, const temporal::TemporalModule& temporal,
                         const noise::NoiseModule& noise, const ScoreOptions& opts) {
  const auto& frame = windows.frame();
  SeriesBuilder b(frame.variates(), windows.size(), opts);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto w = windows[i];
    const auto r = temporal::reconstruct(w, temporal);
    b.add(i, w.end_index, frame.times[w.end_index], score_window(w.short_segment, r.y1, noise, opts, b.wants_graph(i)));
  }
  return b.take();
}

ScoreSeries score_cached(const train::Stage1Cache& cache, const std::vector<double>& frame_times,
                         const noise::NoiseModule& noise, const ScoreOptions& opts) {
  const std::size_t n = cache.size() ? cache.y[0].rows() : 0;
  SeriesBuilder b(n, cache.size(), opts);
  for (std::size_t i = 0; i < cache.size(); ++i) {
    b.add(i, cache.end_index[i], frame_times.at(cache.end_index[i]),
          score_window(cache.y[i], cache.y1[i], noise, opts, b.wants_graph(i)));
  }
  return b.take();
}

double gpd_log_likelihood(std::span<const double> excess, double gamma, double sigma) {
  constexpr double minus_inf = -std::numeric_limits<double>::infinity();
  if (!(sigma > 0.0) || !std::isfinite(gamma)) return minus_inf;
  const double n = static_cast<double>(excess.size());
  if (std::abs(gamma) < 1e-9) {
    const double total = std::accumulate(excess.begin(), excess.end(), 0.0);
    return -n * std::log(sigma) - total / sigma;
  }
  double logs = 0.0;
  for (double y : excess) {
    const double z = 1.0 + gamma * y / sigma;
    if (!(z > 0.0)) return minus_inf;
    logs += std::log(z);
  }
  return -n * std::log(sigma) - (1.0 + 1.0 / gamma) * logs;
}

double pot_quantile(double t0, double gamma, double sigma, double q, std::size_t n, std::size_t n_excess) {
  const double r = q * static_cast<double>(n) / static_cast<double>(n_excess);
  if (std::abs(gamma) < 1e-6) return t0 - sigma * std::log(r);
  return t0 + (sigma / gamma) * (std::pow(r, -gamma) - 1.0);
}

namespace {

/// Smallest sample value v with empirical CDF(v) >= p.
double empirical_quantile(const std::vector<double>& sorted, double p) {
  const double pos = std::ceil(p * static_cast<double>(sorted.size()) - 1e-9);
  const auto idx = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(sorted.size()))) - 1;
  return sorted[idx];
}

struct GrimshawTerms {
  double u = 0.0;  ///< mean 1 / (1 + x y)
  double v = 0.0;  ///< 1 + mean log(1 + x y)
};

GrimshawTerms grimshaw_terms(std::span<const double> y, double x) {
  GrimshawTerms t;
  for (double e : y) {
    const double s = 1.0 + x * e;
    t.u += 1.0 / s;
    t.v += std::log(s);
  }
  const double n = static_cast<double>(y.size());
  t.u /= n;
  t.v = 1.0 + t.v / n;
  return t;
}

double grimshaw_w(std::span<const double> y, double x) {
  const auto t = grimshaw_terms(y, x);
  return t.u * t.v - 1.0;
}

/// Sign changes of w over a grid, refined by bisection.
std::vector<double> grimshaw_roots(std::span<const double> y, double ymax, double ymean) {
  std::vector<double> grid;
  constexpr int kPoints = 120;
  const double lo = -1.0 / ymax;
  for (int i = 0; i < kPoints; ++i) {
    // distance from either end of (lo, 0) spaced geometrically
    const double f = std::pow(10.0, -8.0 + 7.7 * i / (kPoints - 1));
    grid.push_back(lo * f);
    grid.push_back(lo * (1.0 - f));
  }
  for (int i = 0; i < 2 * kPoints; ++i) grid.push_back(std::pow(10.0, -6.0 + 12.0 * i / (2 * kPoints - 1)) / ymean);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<double> roots;
  double prev_x = grid[0];
  double prev_w = grimshaw_w(y, prev_x);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double x = grid[i];
    const double w = grimshaw_w(y, x);
    if (std::isfinite(prev_w) && std::isfinite(w) && (prev_w < 0.0) != (w < 0.0) && (prev_x < 0.0) == (x < 0.0)) {
      double a = prev_x, b = x, wa = prev_w;
      for (int it = 0; it < 200 && b - a > 1e-14 * std::max(std::abs(a), std::abs(b)); ++it) {
        const double m = 0.5 * (a + b);
        const double wm = grimshaw_w(y, m);
        if ((wm < 0.0) == (wa < 0.0)) {
          a = m;
          wa = wm;
        } else {
          b = m;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    prev_x = x;
    prev_w = w;
  }
  return roots;
}

}  // namespace

PotThreshold pot_fit(std::span<const double> scores, double level, double q) {
  if (scores.size() < 100) {
    throw std::invalid_argument("pot_fit needs at least 100 scores, got " + std::to_string(scores.size()));
  }
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("pot_fit: level must be in (0, 1)");
  if (!(q > 0.0 && q < 1.0 - level)) throw std::invalid_argument("pot_fit: q must be in (0, 1 - level)");
  std::vector<double> sorted(scores.begin(), scores.end());
  for (double s : sorted) {
    if (!std::isfinite(s)) throw std::invalid_argument("pot_fit: non-finite score");
  }
  std::sort(sorted.begin(), sorted.end());

  PotThreshold t;
  t.level = level;
  t.q = q;
  t.n = sorted.size();
  t.t0 = empirical_quantile(sorted, level);
  std::vector<double> excess;
  for (auto it = std::upper_bound(sorted.begin(), sorted.end(), t.t0); it != sorted.end(); ++it) {
    excess.push_back(*it - t.t0);
  }
  t.n_excess = excess.size();

  if (excess.size() < 10) {
    warn("pot_fit: only " + std::to_string(excess.size()) +
         " excesses over the initial threshold; using the empirical quantile");
    t.method = "empirical";
    t.z_q = std::max(t.t0, empirical_quantile(sorted, 1.0 - q));
    if (!excess.empty()) t.sigma = std::accumulate(excess.begin(), excess.end(), 0.0) / static_cast<double>(excess.size());
    return t;
  }

  const double ymean = std::accumulate(excess.begin(), excess.end(), 0.0) / static_cast<double>(excess.size());
  const double ymax = excess.back();

  // the exponential model is always a candidate
  double best_gamma = 0.0, best_sigma = ymean;
  double best_ll = gpd_log_likelihood(excess, 0.0, ymean);
  t.method = "exponential";
  const auto roots = grimshaw_roots(excess, ymax, ymean);
  for (double x : roots) {
    const double gamma = grimshaw_terms(excess, x).v - 1.0;
    const double sigma = gamma / x;
    const double ll = gpd_log_likelihood(excess, gamma, sigma);
    if (std::isfinite(ll) && ll > best_ll) {
      best_ll = ll;
      best_gamma = gamma;
      best_sigma = sigma;
      t.method = "grimshaw";
    }
  }
  if (roots.empty()) {
    double var = 0.0;
    for (double e : excess) var += (e - ymean) * (e - ymean);
    var /= static_cast<double>(excess.size() - 1);
    if (var > 0.0) {
      const double ratio = ymean * ymean / var;
      const double gamma = 0.5 * (1.0 - ratio);
      const double sigma = 0.5 * ymean * (1.0 + ratio);
      if (sigma > 0.0 && std::isfinite(gamma)) {
        best_gamma = gamma;
        best_sigma = sigma;
        t.method = "moments";
      }
    }
  }
  t.gamma = best_gamma;
  t.sigma = best_sigma;
  t.z_q = std::max(t.t0, pot_quantile(t.t0, t.gamma, t.sigma, q, t.n, t.n_excess));
  return t;
}

std::vector<PotThreshold> pot_fit_per_variate(const Matrix& scores, double level, double q) {
  std::vector<PotThreshold> out;
  for (std::size_t r = 0; r < scores.rows(); ++r) out.push_back(pot_fit(scores.row(r), level, q));
  return out;
}

BinaryMatrix label(const Matrix& scores, double threshold) {
  BinaryMatrix out(scores.rows(), scores.cols());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    for (std::size_t c = 0; c < scores.cols(); ++c) out.set(r, c, scores(r, c) >= threshold);
  }
  return out;
}

BinaryMatrix label(const Matrix& scores, const std::vector<PotThreshold>& per_variate) {
  if (per_variate.size() != scores.rows()) throw std::invalid_argument("label: one threshold per variate required");
  BinaryMatrix out(scores.rows(), scores.cols());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    for (std::size_t c = 0; c < scores.cols(); ++c) out.set(r, c, scores(r, c) >= per_variate[r].z_q);
  }
  return out;
}

std::string threshold_report(const PotThreshold& t) {
  std::ostringstream os;
  os << "method = " << t.method << '\n'
     << "level = " << io::format_double(t.level) << '\n'
     << "q = " << io::format_double(t.q) << '\n'
     << "t0 = " << io::format_double(t.t0) << '\n'
     << "gamma = " << io::format_double(t.gamma) << '\n'
     << "sigma = " << io::format_double(t.sigma) << '\n'
     << "z_q = " << io::format_double(t.z_q) << '\n'
     << "n = " << t.n << '\n'
     << "n_excess = " << t.n_excess << '\n';
  return os.str();
}

PotThreshold parse_threshold_report(const std::string& text) {
  PotThreshold t;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key(io::trim(std::string_view(line).substr(0, eq)));
    const std::string value(io::trim(std::string_view(line).substr(eq + 1)));
    if (key == "method") t.method = value;
    else if (key == "level") t.level = io::parse_double(value);
    else if (key == "q") t.q = io::parse_double(value);
    else if (key == "t0") t.t0 = io::parse_double(value);
    else if (key == "gamma") t.gamma = io::parse_double(value);
    else if (key == "sigma") t.sigma = io::parse_double(value);
    else if (key == "z_q") t.z_q = io::parse_double(value);
    else if (key == "n") t.n = std::stoull(value);
    else if (key == "n_excess") t.n_excess = std::stoull(value);
  }
  return t;
}

namespace {

std::string render(const std::vector<std::string>& names, const std::vector<double>& times, std::size_t rows,
                   const std::function<std::string(std::size_t, std::size_t)>& cell) {
  if (names.size() != rows) throw std::invalid_argument("series csv: names do not match row count");
  std::string out = "time";
  for (const auto& n : names) out += "," + n;
  out += '\n';
  for (std::size_t c = 0; c < times.size(); ++c) {
    out += io::format_double(times[c]);
    for (std::size_t r = 0; r < rows; ++r) out += "," + cell(r, c);
    out += '\n';
  }
  return out;
}

}  // namespace

void write_series_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                      const std::vector<double>& times, const Matrix& values) {
  io::write_file_atomic(path, render(names, times, values.rows(),
                                     [&](std::size_t r, std::size_t c) { return io::format_double(values(r, c)); }));
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                      const std::vector<double>& times, const BinaryMatrix& labels) {
  io::write_file_atomic(path, render(names, times, labels.rows(),
                                     [&](std::size_t r, std::size_t c) { return std::string(labels(r, c) ? "1" : "0"); }));
}

}  // namespace aero::detect
