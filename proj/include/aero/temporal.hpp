#pragma once

#include "aero/autodiff.hpp"
#include "aero/data.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace aero::temporal {

struct TemporalConfig {
  std::size_t d_model = 32;
  std::size_t heads = 4;
  std::size_t ff_multiplier = 4;  ///< d_ff = ff_multiplier * d_model
  std::uint64_t seed = 0;

  std::size_t d_ff() const { return ff_multiplier * d_model; }
  void validate() const;
};

struct AttentionBlock {
  nn::Parameter query, key, value, output;  ///< each d_model x d_model
};

struct LayerNormParams {
  nn::Parameter gain, bias;  ///< d_model x 1
};

struct FeedForward {
  nn::Parameter w1, b1, w2, b2;
};

/// Attention probabilities of one forward pass, grouped per block.
struct ForwardTrace {
  nn::AttentionTrace encoder_self;
  nn::AttentionTrace decoder_self;
  nn::AttentionTrace decoder_cross;
};

/// Shared per-variate encoder/decoder that rebuilds the short window from
/// the long-window context. One network serves every variate; variates
/// never interact inside it.
class TemporalModule {
 public:
  explicit TemporalModule(const TemporalConfig& config);

  const TemporalConfig& config() const { return config_; }
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;

  nn::Parameter time_phase;  ///< alpha, d_model x 1
  nn::Parameter encoder_input;  ///< W_E, d_model x 1
  nn::Parameter decoder_input;  ///< W_D, d_model x 1
  AttentionBlock encoder_attention;
  LayerNormParams encoder_norm1;
  FeedForward encoder_ff;  ///< d_model -> d_ff -> d_model
  LayerNormParams encoder_norm2;
  AttentionBlock decoder_self_attention;
  LayerNormParams decoder_norm1;
  AttentionBlock decoder_cross_attention;
  LayerNormParams decoder_norm2;
  FeedForward output_head;  ///< d_model -> d_ff -> 1, followed by a sigmoid

 private:
  TemporalConfig config_;
};

/// Angular frequency of embedding dimension j: (1/10000)^(j/d_model).
double embedding_frequency(std::size_t j, std::size_t d_model);

/// TE[j][i] = sin(f_j pos_i + alpha_j delta_i) + cos(f_j pos_i + alpha_j delta_i).
Matrix time_embedding(std::span<const std::int64_t> positions, std::span<const double> deltas, const Matrix& alpha);
nn::Var time_embedding(nn::Tape& tape, nn::Var alpha, std::span<const std::int64_t> positions,
                       std::span<const double> deltas);

/// Parameter binding for one forward pass: trainable parameters become
/// tape leaves, frozen ones become constants.
enum class Binding { trainable, frozen };

/// Encoder output for a batch of univariate rows.
/// `rows` is B x W; te_long is d_model x W. Returns d_model x (B*W).
nn::Var encode(nn::Tape& tape, TemporalModule& m, Binding binding, const Matrix& rows, nn::Var te_long,
               ForwardTrace* trace = nullptr);

/// Decoder output in (0,1) for a batch of rows: `rows` is B x omega,
/// encoded is d_model x (B*W). Returns B x omega.
nn::Var decode(nn::Tape& tape, TemporalModule& m, Binding binding, const Matrix& rows, nn::Var te_short,
               nn::Var encoded, std::size_t long_len, ForwardTrace* trace = nullptr);

/// Full stage-1 pass over every variate of one window; returns Y1 (N x omega).
nn::Var forward(nn::Tape& tape, TemporalModule& m, Binding binding, const data::WindowInstance& w,
                ForwardTrace* trace = nullptr);

struct Reconstruction {
  Matrix y1;     ///< N x omega
  Matrix error;  ///< Y - Y1
};

Reconstruction reconstruct(const data::WindowInstance& w, const TemporalModule& m, ForwardTrace* trace = nullptr);

}  // namespace aero::temporal
