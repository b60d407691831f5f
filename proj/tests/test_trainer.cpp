#include "doctest.h"

#include "aero/synth.hpp"
#include "aero/trainer.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

using namespace aero;
using train::TrainConfig;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.window = 16;
  c.short_window = 8;
  c.d_model = 8;
  c.heads = 2;
  c.batch_size = 8;
  c.seed = 3;
  return c;
}

std::shared_ptr<data::ObservationFrame> frame_from(const Matrix& values) {
  auto f = std::make_shared<data::ObservationFrame>();
  f->values = values;
  for (std::size_t c = 0; c < values.cols(); ++c) f->times.push_back(static_cast<double>(c));
  for (std::size_t r = 0; r < values.rows(); ++r) f->names.push_back("v" + std::to_string(r));
  return f;
}

}  // namespace

TEST_CASE("early stopping arithmetic") {
  SUBCASE("strictly decreasing losses run every epoch") {
    train::EarlyStopping s(5);
    std::size_t ran = 0;
    for (std::size_t e = 1; e <= 100 && !s.should_stop(); ++e, ++ran) s.update(e, 1.0 / static_cast<double>(e));
    CHECK(ran == 100);
    CHECK(s.best_epoch() == 100);
  }
  SUBCASE("flat after epoch 3 stops at 8") {
    train::EarlyStopping s(5);
    std::size_t last = 0;
    for (std::size_t e = 1; e <= 100 && !s.should_stop(); ++e) {
      s.update(e, e <= 3 ? 1.0 / static_cast<double>(e) : 1.0 / 3.0);
      last = e;
    }
    CHECK(last == 8);
    CHECK(s.best_epoch() == 3);
  }
  SUBCASE("the best epoch is kept, not the last") {
    train::EarlyStopping s(2);
    s.update(1, 0.5);
    s.update(2, 0.2);
    s.update(3, 0.3);
    s.update(4, 0.25);
    CHECK(s.should_stop());
    CHECK(s.best_epoch() == 2);
    CHECK(s.best_loss() == 0.2);
  }
  CHECK_THROWS_AS(train::EarlyStopping(0), std::invalid_argument);
}

TEST_CASE("hold-out split is a chronological tail") {
  auto [tr, va] = train::hold_out_split(100, 0.1);
  CHECK(tr.size() == 90);
  CHECK(va.size() == 10);
  CHECK(va.front() == 90);
  CHECK(va.back() == 99);
  CHECK(tr.back() == 89);
  auto [tr2, va2] = train::hold_out_split(100, 0.5);
  CHECK(tr2.size() == 50);
  CHECK(va2.size() == 50);
  auto [tr3, va3] = train::hold_out_split(5, 0.1);
  CHECK(va3.size() == 1);
  CHECK(tr3.size() == 4);
  CHECK_THROWS_AS(train::hold_out_split(1, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(train::hold_out_split(10, 0.6), std::invalid_argument);
  CHECK_THROWS_AS(train::hold_out_split(10, 0.0), std::invalid_argument);
}

TEST_CASE("config validation") {
  auto c = tiny_config();
  c.layers = 2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.short_window = 16;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.patience = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("stage 1 learns a constant series") {
  const auto frame = frame_from(Matrix(2, 60, 0.5));
  const auto cfg = tiny_config();
  const auto windows = data::make_windows(frame, cfg.window_options(1.0));
  temporal::TemporalModule m(cfg.temporal_config());
  auto c = cfg;
  c.max_epochs = 20;
  c.batch_size = 1;
  const auto report = train::train_stage1(m, windows, c);
  CHECK(report.epochs_run() <= 20);
  std::vector<std::size_t> all(windows.size());
  std::iota(all.begin(), all.end(), 0);
  CHECK(train::stage1_loss(m, windows, all) <= 1e-4);
}

TEST_CASE("stage 1 reconstructs a clean sinusoid") {
  Matrix v(1, 400);
  for (std::size_t c = 0; c < 400; ++c) v(0, c) = 0.5 + 0.45 * std::sin(2.0 * std::numbers::pi * c / 24.0);
  const auto frame = frame_from(v);
  auto cfg = tiny_config();
  cfg.window = 32;
  cfg.batch_size = 1;
  cfg.max_epochs = 30;
  cfg.patience = 10;
  const auto windows = data::make_windows(frame, cfg.window_options(1.0));
  temporal::TemporalModule m(cfg.temporal_config());
  train::train_stage1(m, windows, cfg);

  Matrix test(1, 120);
  for (std::size_t c = 0; c < 120; ++c) test(0, c) = 0.5 + 0.45 * std::sin(2.0 * std::numbers::pi * (c + 400) / 24.0);
  auto tf = frame_from(test);
  for (double& t : tf->times) t += 400.0;
  const auto tw = data::make_windows(tf, cfg.window_options(1.0));
  double worst = 0.0;
  for (std::size_t i = 0; i < tw.size(); ++i) {
    const auto r = temporal::reconstruct(tw[i], m);
    for (double e : r.error.values()) worst = std::max(worst, std::abs(e));
  }
  CHECK(worst <= 0.05);
}

TEST_CASE("two-stage training on concurrent noise") {
  synth::GenSpec spec;
  spec.n_variates = 4;
  spec.length = 240;
  spec.variable_fraction = 0.5;
  spec.noise_sigma = 0.05;
  spec.min_period = 20;
  spec.max_period = 40;
  spec.seed = 4;
  auto raw = synth::inject_noise(synth::gen_basic(spec), {{synth::NoiseKind::darken_recover, {0, 1, 2}, 40, 30, 1.5},
                                                           {synth::NoiseKind::drift, {1, 2, 3}, 120, 25, -1.2},
                                                           {synth::NoiseKind::brighten, {0, 2, 3}, 190, 30, 1.5}});
  const auto frame = std::make_shared<data::ObservationFrame>(data::apply_normalize(raw, data::fit_normalize(raw)));
  auto cfg = tiny_config();
  cfg.max_epochs = 4;
  cfg.validation_fraction = 0.3;
  const auto windows = data::make_windows(frame, cfg.window_options(1.0));

  temporal::TemporalModule m(cfg.temporal_config());
  const auto r1 = train::train_stage1(m, windows, cfg);
  std::vector<nn::Tensor2> before;
  for (const auto* p : m.parameters()) before.push_back(p->value);

  const auto cache = train::cache_stage1(m, windows);
  CHECK(cache.size() == windows.size());
  noise::NoiseModule nm(cfg.short_window);
  auto c2 = cfg;
  c2.max_epochs = 30;
  const auto r2 = train::train_stage2(nm, cache, c2);

  SUBCASE("stage 1 stays frozen") {
    const auto after = m.parameters();
    for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i]->value == before[i]);
    for (const auto* p : after) CHECK(p->grad.map().squaredNorm() == 0.0);
  }
  SUBCASE("stage 2 never ends above the stage-1 error") {
    std::vector<std::size_t> all(cache.size());
    std::iota(all.begin(), all.end(), 0);
    double s1 = 0.0;
    for (std::size_t i = 0; i < cache.size(); ++i) {
      Matrix e(cache.y[i].rows(), cache.y[i].cols());
      e.map() = cache.y[i].map() - cache.y1[i].map();
      s1 += e.map().squaredNorm() / static_cast<double>(e.size());
    }
    s1 /= static_cast<double>(cache.size());
    const double s2 = train::stage2_loss(nm, cache, all, cfg.graph);
    CHECK(s2 <= s1);
    CHECK(r2.best_val_loss <= r2.epochs.front().val_loss);
  }
  SUBCASE("reports are consistent") {
    CHECK(r1.epochs_run() >= 1);
    CHECK(r1.best_epoch >= 1);
    for (const auto& e : r1.epochs) {
      CHECK(e.stage == 1);
      CHECK(std::isfinite(e.train_loss));
    }
    for (const auto& e : r2.epochs) CHECK(e.stage == 2);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  Matrix v(2, 50);
  for (std::size_t c = 0; c < 50; ++c) {
    v(0, c) = 0.5 + 0.3 * std::sin(c * 0.4);
    v(1, c) = 0.5 + 0.3 * std::cos(c * 0.3);
  }
  const auto frame = frame_from(v);
  auto cfg = tiny_config();
  cfg.max_epochs = 3;
  const auto windows = data::make_windows(frame, cfg.window_options(1.0));
  temporal::TemporalModule a(cfg.temporal_config()), b(cfg.temporal_config());
  const auto ra = train::train_stage1(a, windows, cfg);
  const auto rb = train::train_stage1(b, windows, cfg);
  REQUIRE(ra.epochs_run() == rb.epochs_run());
  for (std::size_t i = 0; i < ra.epochs_run(); ++i) {
    CHECK(ra.epochs[i].train_loss == rb.epochs[i].train_loss);
    CHECK(ra.epochs[i].val_loss == rb.epochs[i].val_loss);
  }
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}

TEST_CASE("a diverging run aborts and rolls back") {
  const auto frame = frame_from(Matrix(1, 40, 0.5));
  auto cfg = tiny_config();
  cfg.max_epochs = 5;
  const auto windows = data::make_windows(frame, cfg.window_options(1.0));
  temporal::TemporalModule m(cfg.temporal_config());
  const auto initial = m.encoder_input.value;
  m.decoder_input.value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    train::train_stage1(m, windows, cfg);
    FAIL("expected TrainingAborted");
  } catch (const train::TrainingAborted& e) {
    CHECK(std::string(e.what()).find("stage 1") != std::string::npos);
    CHECK(e.report.epochs.empty());
  }
  CHECK(m.encoder_input.value == initial);
}
