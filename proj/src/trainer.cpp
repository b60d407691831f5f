#include "aero/trainer.hpp"

#include "aero/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace aero::train {

using nn::Parameter;
using nn::Tape;
using nn::Var;

void TrainConfig::validate() const {
  if (short_window == 0 || short_window >= window) throw std::invalid_argument("short_window must be in [1, window)");
  if (layers != 1) throw std::invalid_argument("only a single encoder/decoder layer is supported");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
  temporal_config().validate();
}

temporal::TemporalConfig TrainConfig::temporal_config() const {
  temporal::TemporalConfig t;
  t.d_model = d_model;
  t.heads = heads;
  t.seed = seed;
  return t;
}

data::WindowOptions TrainConfig::window_options(double reference_interval, std::size_t stride_override) const {
  data::WindowOptions o;
  o.window = window;
  o.short_window = short_window;
  o.stride = stride_override ? stride_override : stride;
  o.reference_interval = reference_interval;
  o.positions = positions;
  return o;
}

EarlyStopping::EarlyStopping(std::size_t patience)
    : patience_(patience), best_loss_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
}

bool EarlyStopping::update(std::size_t epoch, double loss) {
  if (loss < best_loss_) {
    best_loss_ = loss;
    best_epoch_ = epoch;
    bad_epochs_ = 0;
    return true;
  }
  ++bad_epochs_;
  return false;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> hold_out_split(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 0.5)) throw std::invalid_argument("validation fraction must be in (0, 0.5]");
  if (n < 2) throw std::invalid_argument("need at least 2 windows to hold out a validation set, got " + std::to_string(n));
  auto k = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * fraction - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n - 1);
  std::vector<std::size_t> train(n - k), val(k);
  std::iota(train.begin(), train.end(), 0);
  std::iota(val.begin(), val.end(), n - k);
  return {train, val};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<nn::Tensor2> snapshot(const std::vector<Parameter*>& params) {
  std::vector<nn::Tensor2> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

void restore(const std::vector<Parameter*>& params, const std::vector<nn::Tensor2>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

/// Shared epoch loop. `batch_loss` runs forward and backward over one
/// batch of training indices and returns the summed per-window losses.
template <typename BatchFn, typename ValFn>
StageReport run_stage(int stage, const std::vector<Parameter*>& params, std::vector<std::size_t> train_idx,
                      const ValFn& val_loss, const BatchFn& batch_loss, const TrainConfig& cfg,
                      const EpochCallback& on_epoch) {
  nn::AdamOptions adam_opts;
  adam_opts.learning_rate = cfg.lr;
  nn::Adam adam(params, adam_opts);
  EarlyStopping stopper(cfg.patience);
  std::mt19937_64 rng(cfg.seed * 7919 + static_cast<std::uint64_t>(stage));
  StageReport report;
  auto best = snapshot(params);

  auto abort = [&](const std::string& why) {
    restore(params, best);
    throw TrainingAborted("stage " + std::to_string(stage) + " epoch " + std::to_string(report.epochs.size() + 1) +
                              ": " + why + "; weights rolled back to epoch " + std::to_string(report.best_epoch),
                          report);
  };

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = Clock::now();
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double total = 0.0;
    for (std::size_t b = 0; b < train_idx.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(train_idx.size(), b + cfg.batch_size);
      std::span<const std::size_t> batch(train_idx.data() + b, e - b);
      adam.zero_grad();
      const double loss = batch_loss(batch);
      if (!std::isfinite(loss)) abort("non-finite training loss");
      total += loss;
      nn::clip_grad_norm(params, cfg.clip_norm);
      try {
        adam.step();
      } catch (const nn::NonFiniteGradient& ex) {
        abort(ex.what());
      }
    }
    EpochRecord rec;
    rec.stage = stage;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(train_idx.size());
    rec.val_loss = val_loss();
    if (!std::isfinite(rec.val_loss)) abort("non-finite validation loss");
    if (stopper.update(epoch, rec.val_loss)) {
      best = snapshot(params);
      report.best_epoch = epoch;
      report.best_val_loss = rec.val_loss;
    }
    rec.seconds = seconds_since(t0);
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stopper.should_stop()) break;
  }
  restore(params, best);
  adam.zero_grad();
  return report;
}

}  // namespace

double stage1_loss(const temporal::TemporalModule& module, const data::WindowSet& windows,
                   const std::vector<std::size_t>& indices) {
  if (indices.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i : indices) {
    const auto w = windows[i];
    const auto r = temporal::reconstruct(w, module);
    total += r.error.map().squaredNorm() / static_cast<double>(r.error.size());
  }
  return total / static_cast<double>(indices.size());
}

StageReport train_stage1(temporal::TemporalModule& module, const data::WindowSet& windows, const TrainConfig& cfg,
                         const EpochCallback& on_epoch) {
  cfg.validate();
  auto [train_idx, val_idx] = hold_out_split(windows.size(), cfg.validation_fraction);
  const auto params = module.parameters();
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);

  auto batch_loss = [&](std::span<const std::size_t> batch) {
    double sum = 0.0;
    // the final partial batch keeps the same per-window weight
    for (std::size_t i : batch) {
      const auto w = windows[i];
      Tape tape;
      Var y1 = temporal::forward(tape, module, temporal::Binding::trainable, w);
      Var loss = nn::mse(y1, tape.constant(w.short_segment));
      sum += loss.value()(0, 0);
      tape.backward(nn::scale(loss, inv_batch));
    }
    return sum;
  };
  auto val_loss = [&] { return stage1_loss(module, windows, val_idx); };
  return run_stage(1, params, train_idx, val_loss, batch_loss, cfg, on_epoch);
}

Stage1Cache cache_stage1(const temporal::TemporalModule& module, const data::WindowSet& windows) {
  Stage1Cache cache;
  cache.y.reserve(windows.size());
  cache.y1.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    auto w = windows[i];
    auto r = temporal::reconstruct(w, module);
    cache.y.push_back(std::move(w.short_segment));
    cache.y1.push_back(std::move(r.y1));
    cache.end_index.push_back(w.end_index);
  }
  return cache;
}

namespace {

struct Stage2Samples {
  std::vector<Matrix> mixed;  ///< D~^-1 A~ Y per window
  std::vector<Matrix> error;  ///< Y - Y1 per window
};

Stage2Samples prepare_stage2(const Stage1Cache& cache, const noise::GraphOptions& graph) {
  Stage2Samples s;
  s.mixed.reserve(cache.size());
  s.error.reserve(cache.size());
  for (std::size_t i = 0; i < cache.size(); ++i) {
    Matrix e(cache.y[i].rows(), cache.y[i].cols());
    e.map() = cache.y[i].map() - cache.y1[i].map();
    const auto g = noise::build_graph(graph.mode, e, graph.norm);
    s.mixed.push_back(noise::propagate(g, cache.y[i]));
    s.error.push_back(std::move(e));
  }
  return s;
}

/// Stacks the rows of several N x omega matrices into one (k*N) x omega.
Matrix stack(const std::vector<Matrix>& parts, std::span<const std::size_t> idx) {
  const std::size_t n = parts[idx[0]].rows(), cols = parts[idx[0]].cols();
  Matrix out(n * idx.size(), cols);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& p = parts[idx[k]];
    std::copy(p.values().begin(), p.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(k * n * cols));
  }
  return out;
}

double stage2_loss(const noise::NoiseModule& module, const Stage2Samples& s, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  Tape tape;
  auto& m = const_cast<noise::NoiseModule&>(module);
  Var pre = nn::add_broadcast(nn::matmul(tape.constant(stack(s.mixed, idx)), tape.constant(m.weight.value)),
                              tape.constant(m.bias.value));
  Var y2 = m.activation == noise::Activation::tanh ? nn::tanh(pre) : pre;
  return nn::mse(y2, tape.constant(stack(s.error, idx))).value()(0, 0);
}

}  // namespace

double stage2_loss(const noise::NoiseModule& module, const Stage1Cache& cache, const std::vector<std::size_t>& indices,
                   const noise::GraphOptions& graph) {
  return stage2_loss(module, prepare_stage2(cache, graph), indices);
}

StageReport train_stage2(noise::NoiseModule& module, const Stage1Cache& cache, const TrainConfig& cfg,
                         const EpochCallback& on_epoch) {
  cfg.validate();
  if (cache.size() == 0) throw std::invalid_argument("train_stage2: empty stage-1 cache");
  if (module.short_window() != cache.y[0].cols()) {
    throw nn::ShapeError("train_stage2: noise module width " + std::to_string(module.short_window()) +
                         " vs short window " + std::to_string(cache.y[0].cols()));
  }
  const auto samples = prepare_stage2(cache, cfg.graph);
  auto [train_idx, val_idx] = hold_out_split(cache.size(), cfg.validation_fraction);
  const auto params = module.parameters();
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);

  auto batch_loss = [&](std::span<const std::size_t> batch) {
    Tape tape;
    Var pre = nn::add_broadcast(nn::matmul(tape.constant(stack(samples.mixed, batch)), tape.parameter(module.weight)),
                                tape.parameter(module.bias));
    Var y2 = module.activation == noise::Activation::tanh ? nn::tanh(pre) : pre;
    Var loss = nn::mse(y2, tape.constant(stack(samples.error, batch)));
    const double k = static_cast<double>(batch.size());
    tape.backward(nn::scale(loss, k * inv_batch));
    return loss.value()(0, 0) * k;
  };
  auto val_loss = [&] { return stage2_loss(module, samples, val_idx); };
  return run_stage(2, params, train_idx, val_loss, batch_loss, cfg, on_epoch);
}

}  // namespace aero::train
