#pragma once

#include "aero/autodiff.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace aero::nn {

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment accumulators for a fixed list of parameters.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options = {});

  /// One bias-corrected update from the gradients currently stored in the
  /// parameters. Throws NonFiniteGradient naming the offending parameter;
  /// nothing is modified in that case.
  void step();
  void zero_grad();

  std::int64_t steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor2> m_;
  std::vector<Tensor2> v_;
  AdamOptions options_;
  std::int64_t steps_ = 0;
};

/// Scales all gradients down so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

double grad_norm(std::span<Parameter* const> params);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor2 glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

/// Scalar loss built on a fresh tape from the current parameter values.
using LossFn = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares reverse-mode gradients with central differences for every
/// entry of every parameter. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const LossFn& f, std::span<Parameter* const> params, double h = 1e-4,
                           double abs_floor = 1e-6);

}  // namespace aero::nn
