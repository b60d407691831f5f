#pragma once

#include "aero/detector.hpp"
#include "aero/synth.hpp"
#include "aero/trainer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aero::eval {

struct Segment {
  std::size_t variate = 0;
  std::size_t start = 0;
  std::size_t end = 0;  ///< inclusive

  bool operator==(const Segment&) const = default;
};

struct Metrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Maximal runs of ones, per variate, in variate then time order.
std::vector<Segment> extract_segments(const BinaryMatrix& truth);

/// Fills every truth segment that contains at least one predicted positive.
BinaryMatrix point_adjust(const BinaryMatrix& pred, const BinaryMatrix& truth);

/// Pointwise counts over all cells; P, R and F1 are 0 when undefined.
Metrics prf(const BinaryMatrix& pred, const BinaryMatrix& truth);

Metrics evaluate(const BinaryMatrix& pred, const BinaryMatrix& truth, bool adjust = true);

/// Key-value text with precision, recall and F1 as percentages.
std::string metrics_report(const Metrics& m);

/// Appends `run_id,variant,tp,fp,fn,precision,recall,f1` (header on first write).
void append_results(const std::filesystem::path& ledger, const std::string& run_id, const std::string& variant,
                    const Metrics& m);

enum class Variant { full, no_stage2, static_graph };
std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct PipelineConfig {
  train::TrainConfig train;
  double pot_level = 0.99;
  double pot_q = 1e-3;
  bool per_variate_threshold = false;
};

struct VariantResult {
  Variant variant = Variant::full;
  train::StageReport stage2;
  detect::PotThreshold threshold;  ///< pooled threshold (unused when per-variate)
  detect::ScoreSeries test_scores;
  BinaryMatrix labels;
  Metrics metrics;
  double seconds = 0.0;
};

struct AblationRun {
  train::StageReport stage1;
  double stage1_seconds = 0.0;
  double cache_seconds = 0.0;
  std::vector<VariantResult> variants;
};

/// Trains stage 1 once, then every requested variant on top of it, and
/// evaluates each against the test labels with point adjustment.
AblationRun run_ablations(const synth::Dataset& dataset, const PipelineConfig& cfg, const std::vector<Variant>& variants);

Metrics run_ablation(Variant variant, const synth::Dataset& dataset, const PipelineConfig& cfg);

}  // namespace aero::eval
