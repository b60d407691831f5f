#pragma once

#include "aero/autodiff.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>

namespace aero::nn {

/// Text checkpoint: a versioned key -> shape -> values map.
///
///   aero-checkpoint 1
///   meta <key> <value...>
///   tensor <name> <rows> <cols>
///   <rows*cols values, row-major, %.17g, whitespace separated>
///   end
///
/// Values are printed with round-trip precision, so save/load is exact and
/// independent of host endianness.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, Tensor2> tensors;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(std::span<const Parameter* const> params);
/// Copies stored values into matching parameters; every parameter must be
/// present with the same shape.
void restore_parameters(const Checkpoint& ckpt, std::span<Parameter* const> params);

}  // namespace aero::nn
