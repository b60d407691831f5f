#pragma once

#include "aero/data.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace aero::synth {

enum class NoiseKind { drift, darken_recover, brighten };
enum class AnomalyKind { flare, dip, burst };

std::string to_string(NoiseKind k);
std::string to_string(AnomalyKind k);

/// Concurrent disturbance applied identically to several variates.
struct NoiseEvent {
  NoiseKind kind = NoiseKind::drift;
  std::vector<std::size_t> variates;
  std::size_t start = 0;
  std::size_t duration = 1;
  double amplitude = 0.0;
};

/// True anomaly confined to a single variate.
struct AnomalyEvent {
  AnomalyKind kind = AnomalyKind::flare;
  std::size_t variate = 0;
  std::size_t start = 0;
  std::size_t duration = 1;
  double amplitude = 0.0;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenSpec {
  std::size_t n_variates = 24;
  std::size_t length = 4000;
  double variable_fraction = 1.0 / 3.0;
  std::vector<NoiseEvent> noise_events;
  std::vector<AnomalyEvent> anomaly_events;
  std::uint64_t seed = 0;
  double noise_sigma = 0.2;
  double min_period = 100.0;
  double max_period = 300.0;
  /// Position (and time) of the first generated sample.
  std::int64_t first_position = 0;
};

/// Which variates are sinusoidal and their periods; 0 marks a
/// non-variable star. Drawn from the GenSpec seed before any noise.
std::vector<double> draw_periods(const GenSpec& spec);

/// Clean component of a variable star: 2 sin(2 pi pos / period).
double sinusoid(std::int64_t position, double period);

/// Additive template value at offset k of an event with the given duration.
double noise_shape(NoiseKind kind, std::size_t k, std::size_t duration, double amplitude);
double anomaly_shape(AnomalyKind kind, std::size_t k, std::size_t duration, double amplitude);

inline constexpr double kBrightenCurvature = 3.0;

data::ObservationFrame gen_basic(const GenSpec& spec);

/// Adds every event and marks noise_mask. Throws GenerationError when an
/// event leaves the frame, lists fewer than two variates, or overlaps a
/// labelled anomaly on the same variate.
data::ObservationFrame inject_noise(const data::ObservationFrame& frame, const std::vector<NoiseEvent>& events);

/// Adds every event and marks labels. Burst signs come from `seed`.
data::ObservationFrame inject_anomalies(const data::ObservationFrame& frame, const std::vector<AnomalyEvent>& events,
                                        std::uint64_t seed = 0);

/// Knobs of a benchmark preset; all may be overridden from a config file.
struct PresetParams {
  std::string name = "middle";
  std::size_t n_variates = 24;
  std::size_t train_length = 4000;
  std::size_t test_length = 4000;
  double variable_fraction = 1.0 / 3.0;
  double noise_sigma = 0.2;
  std::size_t anomaly_segments = 5;
  double anomaly_rate = 0.0018;  ///< fraction of test cells
  double noise_rate = 0.01719;   ///< fraction of cells in each split
  std::size_t noise_variates = 17;
  std::size_t noise_events = 6;  ///< per split
  double noise_amp_min = 0.8;
  double noise_amp_max = 1.5;
  double anomaly_amp_min = 1.5;
  double anomaly_amp_max = 2.5;
  std::size_t min_gap = 200;  ///< spacing between anomaly segments; also the earliest anomaly start
};

/// middle / high / low; throws std::invalid_argument otherwise.
PresetParams preset_params(const std::string& name);

struct Dataset {
  data::ObservationFrame train;
  data::ObservationFrame test;
  std::vector<NoiseEvent> train_noise;
  std::vector<NoiseEvent> test_noise;
  std::vector<AnomalyEvent> test_anomalies;
};

Dataset gen_dataset(const PresetParams& params, std::uint64_t seed);
Dataset gen_dataset(const std::string& preset, std::uint64_t seed);

struct DatasetStats {
  double anomaly_percent = 0.0;
  double noise_percent = 0.0;
  double anomaly_to_noise = 0.0;
  std::size_t anomaly_segments = 0;
  std::size_t noise_variates = 0;
};

DatasetStats compute_stats(const data::ObservationFrame& frame);

}  // namespace aero::synth
