#include "aero/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aero::noise {

std::string to_string(DegreeNorm n) { return n == DegreeNorm::signed_sum ? "signed_sum" : "absolute_sum"; }
std::string to_string(GraphMode m) { return m == GraphMode::window ? "window" : "complete"; }

DegreeNorm parse_degree_norm(const std::string& s) {
  if (s == "signed_sum") return DegreeNorm::signed_sum;
  if (s == "absolute_sum") return DegreeNorm::absolute_sum;
  throw std::invalid_argument("unknown degree norm '" + s + "' (expected signed_sum or absolute_sum)");
}

GraphMode parse_graph_mode(const std::string& s) {
  if (s == "window") return GraphMode::window;
  if (s == "complete" || s == "static") return GraphMode::complete;
  throw std::invalid_argument("unknown graph mode '" + s + "' (expected window or complete)");
}

namespace {

void finish(WindowGraph& g) {
  const std::size_t n = g.similarity.rows();
  g.adjacency = g.similarity;
  for (std::size_t m = 0; m < n; ++m) g.adjacency(m, m) = 0.0;
  g.degrees.assign(n, 0.0);
  g.normalizer.assign(n, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    double s = 0.0, a = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      s += g.adjacency(m, k);
      a += std::abs(g.adjacency(m, k));
    }
    g.degrees[m] = s;
    g.normalizer[m] = g.norm == DegreeNorm::signed_sum ? std::abs(s) : a;
  }
}

}  // namespace

Matrix WindowGraph::transition() const {
  const std::size_t n = size();
  Matrix p(n, n);
  for (std::size_t m = 0; m < n; ++m) {
    if (isolated(m)) continue;
    for (std::size_t k = 0; k < n; ++k) p(m, k) = adjacency(m, k) / normalizer[m];
  }
  return p;
}

WindowGraph window_graph(const Matrix& error, DegreeNorm norm) {
  const std::size_t n = error.rows();
  auto e = error.map();
  Eigen::VectorXd norms = e.rowwise().norm();
  Eigen::MatrixXd gram = e * e.transpose();
  WindowGraph g;
  g.norm = norm;
  g.similarity = Matrix(n, n);
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t k = m; k < n; ++k) {
      double v = 0.0;
      if (norms[m] > 0.0 && norms[k] > 0.0) v = std::clamp(gram(m, k) / (norms[m] * norms[k]), -1.0, 1.0);
      g.similarity(m, k) = v;
      g.similarity(k, m) = v;
    }
  }
  finish(g);
  return g;
}

WindowGraph complete_graph(std::size_t n, DegreeNorm norm) {
  WindowGraph g;
  g.norm = norm;
  g.similarity = Matrix(n, n, 1.0);
  finish(g);
  return g;
}

WindowGraph build_graph(GraphMode mode, const Matrix& error, DegreeNorm norm) {
  return mode == GraphMode::window ? window_graph(error, norm) : complete_graph(error.rows(), norm);
}

Matrix propagate(const WindowGraph& g, const Matrix& y) {
  if (g.size() != y.rows()) throw nn::ShapeError("propagate: graph " + std::to_string(g.size()) + " vs Y " + nn::shape_str(y));
  Matrix p = g.transition();
  Matrix out(y.rows(), y.cols());
  out.map().noalias() = p.map() * y.map();
  return out;
}

NoiseModule::NoiseModule(std::size_t short_window, Activation act)
    : weight("noise.weight", Matrix(short_window, short_window)),
      bias("noise.bias", Matrix(1, short_window)),
      activation(act) {}

nn::Var gcn_reconstruct(nn::Tape& tape, const WindowGraph& g, const Matrix& y, NoiseModule& m,
                        temporal::Binding binding) {
  if (y.cols() != m.short_window()) {
    throw nn::ShapeError("gcn_reconstruct: Y " + nn::shape_str(y) + " vs weight " + nn::shape_str(m.weight.value));
  }
  auto bind = [&](nn::Parameter& p) {
    return binding == temporal::Binding::trainable ? tape.parameter(p) : tape.constant(p.value);
  };
  nn::Var mixed = tape.constant(propagate(g, y));
  nn::Var pre = nn::add_broadcast(nn::matmul(mixed, bind(m.weight)), bind(m.bias));
  return m.activation == Activation::tanh ? nn::tanh(pre) : pre;
}

Matrix gcn_reconstruct(const WindowGraph& g, const Matrix& y, const NoiseModule& m) {
  nn::Tape tape;
  return gcn_reconstruct(tape, g, y, const_cast<NoiseModule&>(m), temporal::Binding::frozen).value();
}

Stage2Output stage2_from_y1(const Matrix& y, const Matrix& y1, const NoiseModule& noise, const GraphOptions& opts) {
  if (!y.same_shape(y1)) throw nn::ShapeError("stage2: Y " + nn::shape_str(y) + " vs Y1 " + nn::shape_str(y1));
  Stage2Output out;
  out.y1 = y1;
  out.error = Matrix(y.rows(), y.cols());
  out.error.map() = y.map() - y1.map();
  out.graph = build_graph(opts.mode, out.error, opts.norm);
  out.y2 = gcn_reconstruct(out.graph, y, noise);
  out.residual = Matrix(y.rows(), y.cols());
  out.residual.map() = out.error.map() - out.y2.map();
  return out;
}

Stage2Output stage2_forward(const data::WindowInstance& w, const temporal::TemporalModule& temporal,
                            const NoiseModule& noise, const GraphOptions& opts) {
  auto r = temporal::reconstruct(w, temporal);
  return stage2_from_y1(w.short_segment, r.y1, noise, opts);
}

}  // namespace aero::noise
