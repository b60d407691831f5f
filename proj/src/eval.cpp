#include "aero/eval.hpp"

#include "aero/io.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace aero::eval {

std::vector<Segment> extract_segments(const BinaryMatrix& truth) {
  std::vector<Segment> out;
  for (std::size_t r = 0; r < truth.rows(); ++r) {
    std::size_t c = 0;
    while (c < truth.cols()) {
      if (!truth(r, c)) {
        ++c;
        continue;
      }
      const std::size_t start = c;
      while (c < truth.cols() && truth(r, c)) ++c;
      out.push_back({r, start, c - 1});
    }
  }
  return out;
}

BinaryMatrix point_adjust(const BinaryMatrix& pred, const BinaryMatrix& truth) {
  if (!pred.same_shape(truth)) {
    throw std::invalid_argument("point_adjust: prediction " + std::to_string(pred.rows()) + "x" +
                                std::to_string(pred.cols()) + " vs truth " + std::to_string(truth.rows()) + "x" +
                                std::to_string(truth.cols()));
  }
  BinaryMatrix out = pred;
  for (const auto& s : extract_segments(truth)) {
    bool hit = false;
    for (std::size_t c = s.start; c <= s.end && !hit; ++c) hit = pred(s.variate, c);
    if (hit) {
      for (std::size_t c = s.start; c <= s.end; ++c) out.set(s.variate, c);
    }
  }
  return out;
}

Metrics prf(const BinaryMatrix& pred, const BinaryMatrix& truth) {
  if (!pred.same_shape(truth)) throw std::invalid_argument("prf: shape mismatch");
  Metrics m;
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      const bool p = pred(r, c), t = truth(r, c);
      m.tp += p && t;
      m.fp += p && !t;
      m.fn += !p && t;
    }
  }
  if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

Metrics evaluate(const BinaryMatrix& pred, const BinaryMatrix& truth, bool adjust) {
  return prf(adjust ? point_adjust(pred, truth) : pred, truth);
}

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

std::string metrics_report(const Metrics& m) {
  std::ostringstream os;
  os << "precision = " << percent(m.precision) << '\n'
     << "recall = " << percent(m.recall) << '\n'
     << "f1 = " << percent(m.f1) << '\n'
     << "tp = " << m.tp << '\n'
     << "fp = " << m.fp << '\n'
     << "fn = " << m.fn << '\n';
  return os.str();
}

void append_results(const std::filesystem::path& ledger, const std::string& run_id, const std::string& variant,
                    const Metrics& m) {
  if (!std::filesystem::exists(ledger)) io::append_line(ledger, "run_id,variant,tp,fp,fn,precision,recall,f1");
  io::append_line(ledger, run_id + "," + variant + "," + std::to_string(m.tp) + "," + std::to_string(m.fp) + "," +
                              std::to_string(m.fn) + "," + io::format_double(m.precision) + "," +
                              io::format_double(m.recall) + "," + io::format_double(m.f1));
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_stage2: return "no_stage2";
    case Variant::static_graph: return "static_graph";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "no_stage2") return Variant::no_stage2;
  if (s == "static_graph") return Variant::static_graph;
  throw std::invalid_argument("unknown variant '" + s + "' (expected full, no_stage2 or static_graph)");
}

namespace {

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<double> flatten(const Matrix& m) { return {m.values().begin(), m.values().end()}; }

}  // namespace

AblationRun run_ablations(const synth::Dataset& dataset, const PipelineConfig& cfg, const std::vector<Variant>& variants) {
  const auto& tc = cfg.train;
  tc.validate();
  if (!dataset.test.labels) throw ValidationError("ablation: test split carries no labels");
  const auto stats = data::fit_normalize(dataset.train);
  const double ref = data::median_interval(dataset.train.times);
  auto train_frame = std::make_shared<const data::ObservationFrame>(data::apply_normalize(dataset.train, stats));
  auto test_frame = std::make_shared<const data::ObservationFrame>(data::apply_normalize(dataset.test, stats));

  AblationRun run;
  temporal::TemporalModule temporal(tc.temporal_config());
  auto t0 = Clock::now();
  run.stage1 = train::train_stage1(temporal, data::make_windows(train_frame, tc.window_options(ref)), tc);
  run.stage1_seconds = seconds_since(t0);

  t0 = Clock::now();
  const auto train_cache = train::cache_stage1(temporal, data::make_windows(train_frame, tc.window_options(ref, 1)));
  const auto test_cache = train::cache_stage1(temporal, data::make_windows(test_frame, tc.window_options(ref, 1)));
  run.cache_seconds = seconds_since(t0);

  const auto truth = test_frame->labels->slice_cols(tc.window - 1, test_frame->length());
  for (Variant v : variants) {
    t0 = Clock::now();
    VariantResult res;
    res.variant = v;
    detect::ScoreOptions so;
    so.use_stage2 = v != Variant::no_stage2;
    so.graph = tc.graph;
    if (v == Variant::static_graph) so.graph.mode = noise::GraphMode::complete;
    noise::NoiseModule noise(tc.short_window);
    if (so.use_stage2) {
      auto stage_cfg = tc;
      stage_cfg.graph = so.graph;
      res.stage2 = train::train_stage2(noise, train_cache, stage_cfg);
    }
    const auto train_scores = detect::score_cached(train_cache, train_frame->times, noise, so);
    res.test_scores = detect::score_cached(test_cache, test_frame->times, noise, so);
    if (cfg.per_variate_threshold) {
      res.labels = detect::label(res.test_scores.scores,
                                 detect::pot_fit_per_variate(train_scores.scores, cfg.pot_level, cfg.pot_q));
    } else {
      res.threshold = detect::pot_fit(flatten(train_scores.scores), cfg.pot_level, cfg.pot_q);
      res.labels = detect::label(res.test_scores.scores, res.threshold.z_q);
    }
    res.metrics = evaluate(res.labels, truth, true);
    res.seconds = seconds_since(t0);
    run.variants.push_back(std::move(res));
  }
  return run;
}

Metrics run_ablation(Variant variant, const synth::Dataset& dataset, const PipelineConfig& cfg) {
  return run_ablations(dataset, cfg, {variant}).variants.front().metrics;
}

}  // namespace aero::eval
