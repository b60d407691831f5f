#pragma once

#include "aero/noise.hpp"
#include "aero/temporal.hpp"
#include "aero/trainer.hpp"

#include <filesystem>

namespace aero::model {

/// Everything detection needs besides the data: both stages plus the
/// normalization and windowing fixed at training time.
struct AeroModel {
  train::TrainConfig config;
  data::NormStats norm;
  double reference_interval = 1.0;
  temporal::TemporalModule temporal{temporal::TemporalConfig{}};
  noise::NoiseModule noise;
};

void save_stage1(const std::filesystem::path& path, const AeroModel& m);
void save_stage2(const std::filesystem::path& path, const AeroModel& m);

/// Reads both checkpoints; stage 2 is optional and stays zero when absent.
AeroModel load_model(const std::filesystem::path& stage1, const std::filesystem::path* stage2 = nullptr);

}  // namespace aero::model
