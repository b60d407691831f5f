#pragma once

#include "aero/tensor.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace aero::nn {

/// A named learnable matrix together with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 grad;

  Parameter() = default;
  Parameter(std::string n, Tensor2 v) : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}
  void zero_grad() { grad = Tensor2(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while
/// the owning tape is alive.
struct Var {
  Tape* tape = nullptr;
  std::size_t index = 0;

  const Tensor2& value() const;
  const Tensor2& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Dynamically recorded operation tape for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so a single reverse sweep
/// visits every node after all of its consumers. A tape has one owner for
/// the duration of a forward/backward pass. Parameter leaves accumulate
/// their gradient straight into Parameter::grad when backward() runs.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor2 value);
  Var variable(Tensor2 value);
  Var parameter(Parameter& p);

  /// Records an op result. `inputs` decides whether the node needs a
  /// gradient at all; `backward` is dropped when none of them do.
  Var record(Tensor2 value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor2& value(std::size_t i) const { return nodes_[i].value; }
  const Tensor2& grad(std::size_t i) const { return nodes_[i].grad; }
  bool requires_grad(std::size_t i) const { return nodes_[i].requires_grad; }

  /// Gradient buffer of node i, allocated on first use.
  Tensor2& grad_buffer(std::size_t i);

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and sweeps backwards.
  void backward(Var out);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ---- differentiable primitives -------------------------------------------

/// y = Wm * x (+ b), with b either Wm.rows() x 1 (broadcast across columns)
/// or the full output shape.
Var linear(Var x, Var weight);
Var linear(Var x, Var weight, Var bias);

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);

/// x (r x c) plus b, where b is r x 1 (column broadcast) or 1 x c (row broadcast).
Var add_broadcast(Var x, Var b);

/// x is r x (k*c); the r x c tile is added to each of the k column blocks.
Var add_tiled(Var x, Var tile);

Var reshape(Var x, std::size_t rows, std::size_t cols);

Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
/// tanh approximation of GELU.
Var gelu(Var x);

Var softmax_rows(Var x);

/// Normalizes every column over the feature (row) axis, then applies the
/// per-feature affine gain/bias (both rows x 1).
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

Var sum(Var x);
Var mean(Var x);
/// mean((a - b)^2) as a 1x1 value.
Var mse(Var a, Var b);

/// Layout of a batched multi-head attention call. Queries are
/// d x (batch * query_len), keys/values d x (batch * key_len); each batch
/// element attends only within its own column block.
struct AttentionShape {
  std::size_t batch = 1;
  std::size_t query_len = 0;
  std::size_t key_len = 0;
  std::size_t heads = 1;
  double scale = 1.0;
};

/// Attention probabilities recorded during a forward pass, one
/// query_len x key_len matrix per (batch element, head).
struct AttentionTrace {
  std::vector<Tensor2> weights;
};

/// softmax(Q_i^T K_i * scale) applied to V_i for every head i, heads
/// stacked back along the feature axis.
Var multi_head_attention(Var q, Var k, Var v, const AttentionShape& shape, AttentionTrace* trace = nullptr);

}  // namespace aero::nn
