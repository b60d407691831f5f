#pragma once

#include "aero/noise.hpp"
#include "aero/temporal.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aero::train {

struct TrainConfig {
  std::size_t window = 200;
  std::size_t short_window = 60;
  std::size_t d_model = 32;
  std::size_t heads = 4;
  std::size_t layers = 1;
  double lr = 1e-3;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  std::size_t batch_size = 16;
  std::size_t stride = 1;  ///< stage-1 training windows; stage 2 always uses every window
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  double clip_norm = 5.0;
  data::PositionMode positions = data::PositionMode::window;
  noise::GraphOptions graph;

  void validate() const;
  temporal::TemporalConfig temporal_config() const;
  data::WindowOptions window_options(double reference_interval, std::size_t stride_override = 0) const;
};

/// Stops after `patience` consecutive epochs without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);
  /// Returns true when `loss` is a new best.
  bool update(std::size_t epoch, double loss);
  bool should_stop() const { return bad_epochs_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t bad_epochs_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_;
};

/// Chronological tail split of n items: {first n - k, last k} with
/// k = ceil(n * fraction), at least 1.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> hold_out_split(std::size_t n, double fraction);

struct EpochRecord {
  int stage = 1;
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct StageReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::size_t epochs_run() const { return epochs.size(); }
  double final_train_loss() const { return epochs.empty() ? 0.0 : epochs.back().train_loss; }
};

struct TrainReport {
  StageReport stage1;
  StageReport stage2;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Thrown when a loss or gradient goes non-finite. The module has already
/// been rolled back to its best weights when this propagates.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, StageReport partial)
      : std::runtime_error(what), report(std::move(partial)) {}
  StageReport report;
};

StageReport train_stage1(temporal::TemporalModule& module, const data::WindowSet& windows, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {});

/// Stage-1 reconstructions of every window of a set, kept so that stage 2,
/// scoring and the ablations do not rerun the transformer.
struct Stage1Cache {
  std::vector<Matrix> y;
  std::vector<Matrix> y1;
  std::vector<std::size_t> end_index;
  std::size_t size() const { return y.size(); }
};

Stage1Cache cache_stage1(const temporal::TemporalModule& module, const data::WindowSet& windows);

StageReport train_stage2(noise::NoiseModule& module, const Stage1Cache& cache, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {});

/// Mean squared stage-1 error over a subset of windows.
double stage1_loss(const temporal::TemporalModule& module, const data::WindowSet& windows,
                   const std::vector<std::size_t>& indices);
double stage2_loss(const noise::NoiseModule& module, const Stage1Cache& cache, const std::vector<std::size_t>& indices,
                   const noise::GraphOptions& graph);

}  // namespace aero::train
