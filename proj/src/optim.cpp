#include "aero/optim.hpp"

#include <algorithm>
#include <cmath>

namespace aero::nn {

Adam::Adam(std::vector<Parameter*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
    if (!p->grad.same_shape(p->value)) p->zero_grad();
  }
}

void Adam::step() {
  for (const Parameter* p : params_) {
    if (!p->grad.all_finite()) throw NonFiniteGradient("non-finite gradient in parameter '" + p->name + "'");
  }
  ++steps_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i]->value.values();
    const auto g = params_[i]->grad.values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= options_.learning_rate * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

double grad_norm(std::span<Parameter* const> params) {
  double total = 0.0;
  for (const Parameter* p : params) total += p->grad.map().squaredNorm();
  return std::sqrt(total);
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Parameter* p : params) p->grad.map() *= s;
  }
  return norm;
}

Tensor2 glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor2 t(rows, cols);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

GradCheckResult grad_check(const LossFn& f, std::span<Parameter* const> params, double h, double abs_floor) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
  }
  GradCheckResult result;
  auto eval = [&] {
    Tape tape;
    return f(tape).value()(0, 0);
  };
  for (Parameter* p : params) {
    const Tensor2 analytic = p->grad;
    auto w = p->value.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + h;
      const double up = eval();
      w[i] = orig - h;
      const double down = eval();
      w[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.values()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), abs_floor});
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = p->name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace aero::nn
