#pragma once

#include "aero/noise.hpp"
#include "aero/temporal.hpp"
#include "aero/trainer.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace aero::detect {

/// Per-variate scores for every window end t >= W - 1, in time order.
struct ScoreSeries {
  std::vector<std::size_t> end_index;  ///< global column of each window's last timestep
  std::vector<double> times;
  Matrix scores;        ///< N x T', |Y - Y1 - Y2| at the last timestep
  Matrix stage1_error;  ///< N x T', signed Y - Y1 at the last timestep
  Matrix residual;      ///< N x T', signed Y - Y1 - Y2 at the last timestep
  std::map<std::size_t, Matrix> graphs;  ///< window index -> similarity, when requested

  std::size_t variates() const { return scores.rows(); }
  std::size_t length() const { return scores.cols(); }
};

struct ScoreOptions {
  bool use_stage2 = true;
  noise::GraphOptions graph;
  std::vector<std::size_t> dump_graphs;  ///< window indices whose graph is kept
};

/// Online scoring: each window is reconstructed on its own, in arrival order.
ScoreSeries score_stream(const data::WindowSet& windows, const temporal::TemporalModule& temporal,
                         const noise::NoiseModule& noise, const ScoreOptions& opts = {});

/// Same scores from precomputed stage-1 reconstructions.
ScoreSeries score_cached(const train::Stage1Cache& cache, const std::vector<double>& frame_times,
                         const noise::NoiseModule& noise, const ScoreOptions& opts = {});

struct PotThreshold {
  double level = 0.99;
  double q = 1e-3;
  double t0 = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;
  double z_q = 0.0;
  std::size_t n = 0;
  std::size_t n_excess = 0;
  std::string method;  ///< grimshaw, exponential, moments or empirical
};

/// Log-likelihood of excesses under GPD(gamma, sigma); -inf outside the support.
double gpd_log_likelihood(std::span<const double> excess, double gamma, double sigma);

/// z_q = t0 + (sigma/gamma) ((q n / N_t)^-gamma - 1), exponential limit near gamma = 0.
double pot_quantile(double t0, double gamma, double sigma, double q, std::size_t n, std::size_t n_excess);

PotThreshold pot_fit(std::span<const double> scores, double level = 0.99, double q = 1e-3);

/// Threshold per variate, each fitted on that variate's own scores.
std::vector<PotThreshold> pot_fit_per_variate(const Matrix& scores, double level = 0.99, double q = 1e-3);

/// 1 where score >= threshold.
BinaryMatrix label(const Matrix& scores, double threshold);
BinaryMatrix label(const Matrix& scores, const std::vector<PotThreshold>& per_variate);

std::string threshold_report(const PotThreshold& t);
PotThreshold parse_threshold_report(const std::string& text);

/// Scores (or labels) as CSV: time column plus one column per variate.
void write_series_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                      const std::vector<double>& times, const Matrix& values);
void write_labels_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                      const std::vector<double>& times, const BinaryMatrix& labels);

}  // namespace aero::detect
