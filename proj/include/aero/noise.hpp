#pragma once

#include "aero/temporal.hpp"

#include <string>
#include <vector>

namespace aero::noise {

/// How row m of the adjacency is scaled before mixing neighbours.
/// signed_sum divides by |sum_n A~mn|; absolute_sum divides by sum_n |A~mn|.
enum class DegreeNorm { signed_sum, absolute_sum };

/// window: fresh cosine graph per window; complete: all-ones minus self-loops.
enum class GraphMode { window, complete };

enum class Activation { tanh, identity };

std::string to_string(DegreeNorm n);
std::string to_string(GraphMode m);
DegreeNorm parse_degree_norm(const std::string& s);
GraphMode parse_graph_mode(const std::string& s);

/// Rows whose normalizer is at or below this are treated as isolated.
inline constexpr double kIsolatedEpsilon = 1e-8;

struct WindowGraph {
  Matrix similarity;            ///< A, N x N, symmetric, entries in [-1, 1]
  Matrix adjacency;             ///< A with its diagonal zeroed
  std::vector<double> degrees;  ///< sum_n adjacency(m, n)
  std::vector<double> normalizer;
  DegreeNorm norm = DegreeNorm::absolute_sum;

  std::size_t size() const { return adjacency.rows(); }
  bool isolated(std::size_t m) const { return normalizer[m] <= kIsolatedEpsilon; }
  /// D~^-1 A~ with isolated rows zeroed.
  Matrix transition() const;
};

/// Cosine similarity of the rows of E. Zero-norm rows have similarity 0
/// to everything, themselves included.
WindowGraph window_graph(const Matrix& error, DegreeNorm norm = DegreeNorm::absolute_sum);
WindowGraph complete_graph(std::size_t n, DegreeNorm norm = DegreeNorm::absolute_sum);
WindowGraph build_graph(GraphMode mode, const Matrix& error, DegreeNorm norm);

/// D~^-1 A~ Y: every row is a mixture of the other rows of Y.
Matrix propagate(const WindowGraph& g, const Matrix& y);

class NoiseModule {
 public:
  NoiseModule() = default;
  /// Weight and bias start at zero, so an untrained module outputs zero.
  explicit NoiseModule(std::size_t short_window, Activation activation = Activation::tanh);

  std::size_t short_window() const { return weight.value.rows(); }
  std::vector<nn::Parameter*> parameters() { return {&weight, &bias}; }
  std::vector<const nn::Parameter*> parameters() const { return {&weight, &bias}; }

  nn::Parameter weight;  ///< omega x omega, acts on the time axis
  nn::Parameter bias;    ///< 1 x omega, shared by all variates
  Activation activation = Activation::tanh;
};

/// Y2 = act((D~^-1 A~ Y) W + b).
nn::Var gcn_reconstruct(nn::Tape& tape, const WindowGraph& g, const Matrix& y, NoiseModule& m,
                        temporal::Binding binding);
Matrix gcn_reconstruct(const WindowGraph& g, const Matrix& y, const NoiseModule& m);

struct GraphOptions {
  GraphMode mode = GraphMode::window;
  DegreeNorm norm = DegreeNorm::absolute_sum;
};

struct Stage2Output {
  Matrix y1;
  Matrix error;     ///< Y - Y1
  Matrix y2;
  Matrix residual;  ///< Y - Y1 - Y2
  WindowGraph graph;
};

/// Second stage given an already computed stage-1 reconstruction.
Stage2Output stage2_from_y1(const Matrix& y, const Matrix& y1, const NoiseModule& noise, const GraphOptions& opts = {});

Stage2Output stage2_forward(const data::WindowInstance& w, const temporal::TemporalModule& temporal,
                            const NoiseModule& noise, const GraphOptions& opts = {});

}  // namespace aero::noise
