#include "aero/autodiff.hpp"

#include <cmath>
#include <memory>

namespace aero::nn {

const Tensor2& Var::value() const { return tape->value(index); }
const Tensor2& Var::grad() const { return tape->grad(index); }

Var Tape::constant(Tensor2 value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::variable(Tensor2 value) {
  nodes_.push_back(Node{std::move(value), {}, true, nullptr, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, true, &p, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor2 value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& in : inputs) needs = needs || nodes_[in.index].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(backward) : BackwardFn{}});
  return {this, nodes_.size() - 1};
}

Tensor2& Tape::grad_buffer(std::size_t i) {
  Node& n = nodes_[i];
  if (n.grad.size() != n.value.size()) n.grad = Tensor2(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var out) {
  if (out.tape != this) throw std::logic_error("backward: variable belongs to another tape");
  if (nodes_[out.index].value.size() != 1) throw ShapeError("backward: output must be 1x1");
  grad_buffer(out.index).fill(1.0);
  for (std::size_t i = out.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      if (!n.param->grad.same_shape(n.value)) n.param->zero_grad();
      n.param->grad.map() += n.grad.map();
    }
  }
}

namespace {

void require(bool cond, const char* op, const std::string& detail) {
  if (!cond) throw ShapeError(std::string(op) + ": " + detail);
}

// Accumulates into the gradient of `v` only when it participates in
// differentiation.
template <typename Fn>
void accumulate(Tape& t, Var v, Fn&& fn) {
  if (t.requires_grad(v.index)) fn(t.grad_buffer(v.index).map());
}

template <typename F, typename DF>
Var unary(Var x, F f, DF df_from_xy) {
  const Tensor2& xv = x.value();
  Tensor2 y(xv.rows(), xv.cols());
  auto xs = xv.values();
  auto ys = y.values();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = f(xs[i]);
  return x.tape->record(std::move(y), {x}, [x, df_from_xy](Tape& t, std::size_t self) {
    const auto xs = t.value(x.index).values();
    const auto ys = t.value(self).values();
    const auto gs = t.grad(self).values();
    auto gx = t.grad_buffer(x.index).values();
    for (std::size_t i = 0; i < xs.size(); ++i) gx[i] += gs[i] * df_from_xy(xs[i], ys[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor2& av = a.value();
  const Tensor2& bv = b.value();
  require(av.cols() == bv.rows(), "matmul", shape_str(av) + " * " + shape_str(bv));
  Tensor2 c(av.rows(), bv.cols());
  c.map().noalias() = av.map() * bv.map();
  return a.tape->record(std::move(c), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto gc = t.grad(self).map();
    accumulate(t, a, [&](auto ga) { ga.noalias() += gc * t.value(b.index).map().transpose(); });
    accumulate(t, b, [&](auto gb) { gb.noalias() += t.value(a.index).map().transpose() * gc; });
  });
}

Var linear(Var x, Var weight) { return matmul(weight, x); }

Var linear(Var x, Var weight, Var bias) { return add_broadcast(matmul(weight, x), bias); }

Var add(Var a, Var b) {
  require(a.value().same_shape(b.value()), "add", shape_str(a.value()) + " + " + shape_str(b.value()));
  Tensor2 c(a.rows(), a.cols());
  c.map() = a.value().map() + b.value().map();
  return a.tape->record(std::move(c), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto g = t.grad(self).map();
    accumulate(t, a, [&](auto ga) { ga += g; });
    accumulate(t, b, [&](auto gb) { gb += g; });
  });
}

Var sub(Var a, Var b) {
  require(a.value().same_shape(b.value()), "sub", shape_str(a.value()) + " - " + shape_str(b.value()));
  Tensor2 c(a.rows(), a.cols());
  c.map() = a.value().map() - b.value().map();
  return a.tape->record(std::move(c), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto g = t.grad(self).map();
    accumulate(t, a, [&](auto ga) { ga += g; });
    accumulate(t, b, [&](auto gb) { gb -= g; });
  });
}

Var mul(Var a, Var b) {
  require(a.value().same_shape(b.value()), "mul", shape_str(a.value()) + " .* " + shape_str(b.value()));
  Tensor2 c(a.rows(), a.cols());
  c.map() = a.value().map().cwiseProduct(b.value().map());
  return a.tape->record(std::move(c), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto g = t.grad(self).map();
    accumulate(t, a, [&](auto ga) { ga += g.cwiseProduct(t.value(b.index).map()); });
    accumulate(t, b, [&](auto gb) { gb += g.cwiseProduct(t.value(a.index).map()); });
  });
}

Var scale(Var a, double s) {
  Tensor2 c(a.rows(), a.cols());
  c.map() = a.value().map() * s;
  return a.tape->record(std::move(c), {a}, [a, s](Tape& t, std::size_t self) {
    accumulate(t, a, [&](auto ga) { ga += t.grad(self).map() * s; });
  });
}

Var add_broadcast(Var x, Var b) {
  const Tensor2& xv = x.value();
  const Tensor2& bv = b.value();
  if (bv.same_shape(xv)) return add(x, b);
  const bool column = bv.rows() == xv.rows() && bv.cols() == 1;
  const bool row = bv.rows() == 1 && bv.cols() == xv.cols();
  require(column || row, "add_broadcast", shape_str(xv) + " + " + shape_str(bv));
  Tensor2 y = xv;
  if (column) {
    y.map().colwise() += bv.map().col(0);
  } else {
    y.map().rowwise() += bv.map().row(0);
  }
  return x.tape->record(std::move(y), {x, b}, [x, b, column](Tape& t, std::size_t self) {
    const auto g = t.grad(self).map();
    accumulate(t, x, [&](auto gx) { gx += g; });
    accumulate(t, b, [&](auto gb) {
      if (column) {
        gb.col(0) += g.rowwise().sum();
      } else {
        gb.row(0) += g.colwise().sum();
      }
    });
  });
}

Var add_tiled(Var x, Var tile) {
  const Tensor2& xv = x.value();
  const Tensor2& tv = tile.value();
  require(xv.rows() == tv.rows() && tv.cols() > 0 && xv.cols() % tv.cols() == 0, "add_tiled",
          shape_str(xv) + " + tiles of " + shape_str(tv));
  const auto w = static_cast<Eigen::Index>(tv.cols());
  const Eigen::Index blocks = static_cast<Eigen::Index>(xv.cols()) / w;
  Tensor2 y = xv;
  {
    auto ym = y.map();
    const auto tm = tv.map();
    for (Eigen::Index k = 0; k < blocks; ++k) ym.middleCols(k * w, w) += tm;
  }
  return x.tape->record(std::move(y), {x, tile}, [x, tile, w, blocks](Tape& t, std::size_t self) {
    const auto g = t.grad(self).map();
    accumulate(t, x, [&](auto gx) { gx += g; });
    accumulate(t, tile, [&](auto gt) {
      for (Eigen::Index k = 0; k < blocks; ++k) gt += g.middleCols(k * w, w);
    });
  });
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
  Tensor2 y = x.value().reshaped(rows, cols);
  return x.tape->record(std::move(y), {x}, [x](Tape& t, std::size_t self) {
    auto gx = t.grad_buffer(x.index).values();
    const auto g = t.grad(self).values();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var sigmoid(Var x) {
  return unary(
      x, [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var x) {
  return unary(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Var gelu(Var x) {
  static constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  static constexpr double c = 0.044715;
  const Tensor2& xv = x.value();
  const auto xa = xv.map().array();
  // tanh through the vectorized exp; libm tanh dominated the FFN cost
  using RowArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  auto th = std::make_shared<RowArray>(xv.rows(), xv.cols());
  *th = 1.0 - 2.0 / (1.0 + (2.0 * k * (xa + c * xa.cube())).exp());
  Tensor2 y(xv.rows(), xv.cols());
  y.map().array() = 0.5 * xa * (1.0 + *th);
  return x.tape->record(std::move(y), {x}, [x, th](Tape& t, std::size_t self) {
    const auto xa = t.value(x.index).map().array();
    const auto g = t.grad(self).map().array();
    const auto& tr = *th;
    t.grad_buffer(x.index).map().array() +=
        g * (0.5 * (1.0 + tr) + 0.5 * xa * (1.0 - tr.square()) * k * (1.0 + 3.0 * c * xa.square()));
  });
}

namespace {

void softmax_inplace(Eigen::Ref<RowMatrix> m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

}  // namespace

Var softmax_rows(Var x) {
  Tensor2 y = x.value();
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double total = 0;
    for (double& v : row) total += (v = std::exp(v - mx));
    for (double& v : row) v /= total;
  }
  return x.tape->record(std::move(y), {x}, [x](Tape& t, std::size_t self) {
    const auto y = t.value(self).map();
    const auto g = t.grad(self).map();
    auto gx = t.grad_buffer(x.index).map();
    const Eigen::VectorXd dots = y.cwiseProduct(g).rowwise().sum();
    gx += y.cwiseProduct(g - dots.replicate(1, g.cols()));
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor2& xv = x.value();
  const std::size_t d = xv.rows();
  const std::size_t n = xv.cols();
  require(gain.rows() == d && gain.cols() == 1 && bias.rows() == d && bias.cols() == 1, "layer_norm",
          "gain/bias must be " + std::to_string(d) + "x1");

  std::vector<double> mean(n, 0.0);
  std::vector<double> inv_std(n, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    const auto row = xv.row(r);
    for (std::size_t c = 0; c < n; ++c) mean[c] += row[c];
  }
  for (double& m : mean) m /= static_cast<double>(d);
  for (std::size_t r = 0; r < d; ++r) {
    const auto row = xv.row(r);
    for (std::size_t c = 0; c < n; ++c) inv_std[c] += (row[c] - mean[c]) * (row[c] - mean[c]);
  }
  for (double& v : inv_std) v = 1.0 / std::sqrt(v / static_cast<double>(d) + eps);

  Tensor2 xhat(d, n);
  Tensor2 y(d, n);
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  for (std::size_t r = 0; r < d; ++r) {
    const auto row = xv.row(r);
    auto hr = xhat.row(r);
    auto yr = y.row(r);
    for (std::size_t c = 0; c < n; ++c) {
      hr[c] = (row[c] - mean[c]) * inv_std[c];
      yr[c] = gv(r, 0) * hr[c] + bv(r, 0);
    }
  }

  return x.tape->record(
      std::move(y), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
        const Tensor2& g = t.grad(self);
        const std::size_t d = g.rows();
        const std::size_t n = g.cols();
        if (t.requires_grad(gain.index) || t.requires_grad(bias.index)) {
          Tensor2& gg = t.grad_buffer(gain.index);
          Tensor2& gb = t.grad_buffer(bias.index);
          for (std::size_t r = 0; r < d; ++r) {
            double sg = 0, sb = 0;
            const auto gr = g.row(r);
            const auto hr = xhat.row(r);
            for (std::size_t c = 0; c < n; ++c) {
              sg += gr[c] * hr[c];
              sb += gr[c];
            }
            gg(r, 0) += sg;
            gb(r, 0) += sb;
          }
        }
        if (!t.requires_grad(x.index)) return;
        const Tensor2& gv = t.value(gain.index);
        std::vector<double> mean_dh(n, 0.0), mean_dh_h(n, 0.0);
        for (std::size_t r = 0; r < d; ++r) {
          const auto gr = g.row(r);
          const auto hr = xhat.row(r);
          for (std::size_t c = 0; c < n; ++c) {
            const double dh = gr[c] * gv(r, 0);
            mean_dh[c] += dh;
            mean_dh_h[c] += dh * hr[c];
          }
        }
        const double inv_d = 1.0 / static_cast<double>(d);
        Tensor2& gx = t.grad_buffer(x.index);
        for (std::size_t r = 0; r < d; ++r) {
          const auto gr = g.row(r);
          const auto hr = xhat.row(r);
          auto xr = gx.row(r);
          for (std::size_t c = 0; c < n; ++c) {
            const double dh = gr[c] * gv(r, 0);
            xr[c] += inv_std[c] * (dh - mean_dh[c] * inv_d - hr[c] * mean_dh_h[c] * inv_d);
          }
        }
      });
}

Var sum(Var x) {
  Tensor2 y(1, 1, x.value().map().sum());
  return x.tape->record(std::move(y), {x}, [x](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    t.grad_buffer(x.index).map().array() += g;
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var mse(Var a, Var b) {
  Var d = sub(a, b);
  return mean(mul(d, d));
}

Var multi_head_attention(Var q, Var k, Var v, const AttentionShape& s, AttentionTrace* trace) {
  const Tensor2& qv = q.value();
  const Tensor2& kv = k.value();
  const Tensor2& vv = v.value();
  const std::size_t d = qv.rows();
  require(s.heads > 0 && d % s.heads == 0, "multi_head_attention", "feature width not divisible by heads");
  require(kv.rows() == d && vv.rows() == d, "multi_head_attention", "q/k/v feature widths differ");
  require(qv.cols() == s.batch * s.query_len, "multi_head_attention", "query columns != batch * query_len");
  require(kv.cols() == s.batch * s.key_len && vv.cols() == kv.cols(), "multi_head_attention",
          "key/value columns != batch * key_len");

  const auto dh = static_cast<Eigen::Index>(d / s.heads);
  const auto tq = static_cast<Eigen::Index>(s.query_len);
  const auto tk = static_cast<Eigen::Index>(s.key_len);
  const std::size_t blocks = s.batch * s.heads;

  // probabilities for every (batch, head), stored contiguously for backward
  // left uninitialized: every entry is written by the score product below
  auto probs = std::make_shared<RowMatrix>(static_cast<Eigen::Index>(blocks) * tq, tk);
  Tensor2 out(d, qv.cols());
  {
    const auto qm = qv.map();
    const auto km = kv.map();
    const auto vm = vv.map();
    auto om = out.map();
    for (std::size_t b = 0; b < s.batch; ++b) {
      for (std::size_t h = 0; h < s.heads; ++h) {
        MatrixMap p(probs->data() + (b * s.heads + h) * s.query_len * s.key_len, tq, tk);
        const auto r0 = static_cast<Eigen::Index>(h) * dh;
        const auto qc = static_cast<Eigen::Index>(b) * tq;
        const auto kc = static_cast<Eigen::Index>(b) * tk;
        p.noalias() = s.scale * (qm.block(r0, qc, dh, tq).transpose() * km.block(r0, kc, dh, tk));
        softmax_inplace(p);
        om.block(r0, qc, dh, tq).noalias() = vm.block(r0, kc, dh, tk) * p.transpose();
        if (trace != nullptr) {
          Tensor2 w(s.query_len, s.key_len);
          w.map() = p;
          trace->weights.push_back(std::move(w));
        }
      }
    }
  }

  return q.tape->record(std::move(out), {q, k, v}, [q, k, v, s, probs](Tape& t, std::size_t self) {
    const auto g = t.grad(self).map();
    const auto qm = t.value(q.index).map();
    const auto km = t.value(k.index).map();
    const auto vm = t.value(v.index).map();
    const bool need_q = t.requires_grad(q.index);
    const bool need_k = t.requires_grad(k.index);
    const bool need_v = t.requires_grad(v.index);
    const std::size_t d = qm.rows();
    const auto dh = static_cast<Eigen::Index>(d / s.heads);
    const auto tq = static_cast<Eigen::Index>(s.query_len);
    const auto tk = static_cast<Eigen::Index>(s.key_len);
    RowMatrix dp(tq, tk);
    for (std::size_t b = 0; b < s.batch; ++b) {
      for (std::size_t h = 0; h < s.heads; ++h) {
        ConstMatrixMap p(probs->data() + (b * s.heads + h) * s.query_len * s.key_len, tq, tk);
        const auto r0 = static_cast<Eigen::Index>(h) * dh;
        const auto qc = static_cast<Eigen::Index>(b) * tq;
        const auto kc = static_cast<Eigen::Index>(b) * tk;
        const auto go = g.block(r0, qc, dh, tq);
        if (need_v) t.grad_buffer(v.index).map().block(r0, kc, dh, tk).noalias() += go * p;
        if (!need_q && !need_k) continue;
        dp.noalias() = go.transpose() * vm.block(r0, kc, dh, tk);
        const Eigen::VectorXd dots = p.cwiseProduct(dp).rowwise().sum();
        dp = p.cwiseProduct(dp - dots.replicate(1, tk)) * s.scale;
        if (need_q) {
          t.grad_buffer(q.index).map().block(r0, qc, dh, tq).noalias() +=
              km.block(r0, kc, dh, tk) * dp.transpose();
        }
        if (need_k) {
          t.grad_buffer(k.index).map().block(r0, kc, dh, tk).noalias() += qm.block(r0, qc, dh, tq) * dp;
        }
      }
    }
  });
}

}  // namespace aero::nn
