#include "aero/temporal.hpp"

#include "aero/optim.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace aero::temporal {

using nn::Parameter;
using nn::Tape;
using nn::Tensor2;
using nn::Var;

void TemporalConfig::validate() const {
  if (d_model == 0 || heads == 0 || d_model % heads != 0) {
    throw std::invalid_argument("d_model must be a positive multiple of heads");
  }
  if (ff_multiplier == 0) throw std::invalid_argument("ff_multiplier must be positive");
}

namespace {

AttentionBlock make_attention(const std::string& prefix, std::size_t d, std::mt19937_64& rng) {
  return {Parameter(prefix + ".query", nn::glorot_uniform(d, d, rng)),
          Parameter(prefix + ".key", nn::glorot_uniform(d, d, rng)),
          Parameter(prefix + ".value", nn::glorot_uniform(d, d, rng)),
          Parameter(prefix + ".output", nn::glorot_uniform(d, d, rng))};
}

LayerNormParams make_norm(const std::string& prefix, std::size_t d) {
  return {Parameter(prefix + ".gain", Tensor2(d, 1, 1.0)), Parameter(prefix + ".bias", Tensor2(d, 1))};
}

FeedForward make_ff(const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out,
                    std::mt19937_64& rng) {
  return {Parameter(prefix + ".w1", nn::glorot_uniform(hidden, in, rng)), Parameter(prefix + ".b1", Tensor2(hidden, 1)),
          Parameter(prefix + ".w2", nn::glorot_uniform(out, hidden, rng)), Parameter(prefix + ".b2", Tensor2(out, 1))};
}

}  // namespace

TemporalModule::TemporalModule(const TemporalConfig& config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.d_model;
  std::mt19937_64 rng(config_.seed);
  time_phase = Parameter("time.alpha", Tensor2(d, 1));
  encoder_input = Parameter("encoder.input", nn::glorot_uniform(d, 1, rng));
  decoder_input = Parameter("decoder.input", nn::glorot_uniform(d, 1, rng));
  encoder_attention = make_attention("encoder.attention", d, rng);
  encoder_norm1 = make_norm("encoder.norm1", d);
  encoder_ff = make_ff("encoder.ff", d, config_.d_ff(), d, rng);
  encoder_norm2 = make_norm("encoder.norm2", d);
  decoder_self_attention = make_attention("decoder.self_attention", d, rng);
  decoder_norm1 = make_norm("decoder.norm1", d);
  decoder_cross_attention = make_attention("decoder.cross_attention", d, rng);
  decoder_norm2 = make_norm("decoder.norm2", d);
  output_head = make_ff("decoder.head", d, config_.d_ff(), 1, rng);
}

std::vector<Parameter*> TemporalModule::parameters() {
  std::vector<Parameter*> out{&time_phase, &encoder_input, &decoder_input};
  for (AttentionBlock* a : {&encoder_attention, &decoder_self_attention, &decoder_cross_attention}) {
    out.insert(out.end(), {&a->query, &a->key, &a->value, &a->output});
  }
  for (LayerNormParams* n : {&encoder_norm1, &encoder_norm2, &decoder_norm1, &decoder_norm2}) {
    out.insert(out.end(), {&n->gain, &n->bias});
  }
  for (FeedForward* f : {&encoder_ff, &output_head}) out.insert(out.end(), {&f->w1, &f->b1, &f->w2, &f->b2});
  return out;
}

std::vector<const Parameter*> TemporalModule::parameters() const {
  auto mutable_params = const_cast<TemporalModule*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

double embedding_frequency(std::size_t j, std::size_t d_model) {
  return std::pow(1.0 / 10000.0, static_cast<double>(j) / static_cast<double>(d_model));
}

Matrix time_embedding(std::span<const std::int64_t> positions, std::span<const double> deltas, const Matrix& alpha) {
  if (positions.size() != deltas.size()) throw std::invalid_argument("time_embedding: positions/deltas differ in length");
  const std::size_t d = alpha.rows();
  Matrix te(d, positions.size());
  for (std::size_t j = 0; j < d; ++j) {
    const double f = embedding_frequency(j, d);
    for (std::size_t i = 0; i < positions.size(); ++i) {
      const double theta = f * static_cast<double>(positions[i]) + alpha(j, 0) * deltas[i];
      te(j, i) = std::sin(theta) + std::cos(theta);
    }
  }
  return te;
}

Var time_embedding(Tape& tape, Var alpha, std::span<const std::int64_t> positions, std::span<const double> deltas) {
  Matrix te = time_embedding(positions, deltas, alpha.value());
  std::vector<std::int64_t> pos(positions.begin(), positions.end());
  std::vector<double> del(deltas.begin(), deltas.end());
  return tape.record(std::move(te), {alpha}, [alpha, pos = std::move(pos), del = std::move(del)](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& a = t.value(alpha.index);
    Tensor2& ga = t.grad_buffer(alpha.index);
    const std::size_t d = a.rows();
    for (std::size_t j = 0; j < d; ++j) {
      const double f = embedding_frequency(j, d);
      double acc = 0.0;
      for (std::size_t i = 0; i < pos.size(); ++i) {
        const double theta = f * static_cast<double>(pos[i]) + a(j, 0) * del[i];
        acc += g(j, i) * (std::cos(theta) - std::sin(theta)) * del[i];
      }
      ga(j, 0) += acc;
    }
  });
}

namespace {

struct Binder {
  Tape& tape;
  Binding binding;
  Var operator()(Parameter& p) const { return binding == Binding::trainable ? tape.parameter(p) : tape.constant(p.value); }
};

Var attention_block(const Binder& bind, AttentionBlock& block, Var queries, Var context, std::size_t batch,
                    std::size_t query_len, std::size_t key_len, std::size_t heads, nn::AttentionTrace* trace) {
  const std::size_t d = queries.rows();
  Var q = nn::linear(queries, bind(block.query));
  Var k = nn::linear(context, bind(block.key));
  Var v = nn::linear(context, bind(block.value));
  nn::AttentionShape shape{batch, query_len, key_len, heads, 1.0 / std::sqrt(static_cast<double>(d))};
  return nn::linear(nn::multi_head_attention(q, k, v, shape, trace), bind(block.output));
}

Var feed_forward(const Binder& bind, FeedForward& ff, Var x) {
  Var hidden = nn::gelu(nn::linear(x, bind(ff.w1), bind(ff.b1)));
  return nn::linear(hidden, bind(ff.w2), bind(ff.b2));
}

Var norm(const Binder& bind, LayerNormParams& ln, Var x) { return nn::layer_norm(x, bind(ln.gain), bind(ln.bias)); }

}  // namespace

Var encode(Tape& tape, TemporalModule& m, Binding binding, const Matrix& rows, Var te_long, ForwardTrace* trace) {
  const Binder bind{tape, binding};
  const std::size_t batch = rows.rows();
  const std::size_t len = rows.cols();
  Var x = tape.constant(rows.reshaped(1, batch * len));
  Var embedded = nn::add_tiled(nn::linear(x, bind(m.encoder_input)), te_long);
  Var attended = attention_block(bind, m.encoder_attention, embedded, embedded, batch, len, len, m.config().heads,
                                 trace ? &trace->encoder_self : nullptr);
  Var mid = norm(bind, m.encoder_norm1, nn::add(embedded, attended));
  return norm(bind, m.encoder_norm2, nn::add(mid, feed_forward(bind, m.encoder_ff, mid)));
}

Var decode(Tape& tape, TemporalModule& m, Binding binding, const Matrix& rows, Var te_short, Var encoded,
           std::size_t long_len, ForwardTrace* trace) {
  const Binder bind{tape, binding};
  const std::size_t batch = rows.rows();
  const std::size_t len = rows.cols();
  const std::size_t heads = m.config().heads;
  Var s = tape.constant(rows.reshaped(1, batch * len));
  Var embedded = nn::add_tiled(nn::linear(s, bind(m.decoder_input)), te_short);
  Var self_att = attention_block(bind, m.decoder_self_attention, embedded, embedded, batch, len, len, heads,
                                 trace ? &trace->decoder_self : nullptr);
  Var mid = norm(bind, m.decoder_norm1, nn::add(embedded, self_att));
  Var cross = attention_block(bind, m.decoder_cross_attention, mid, encoded, batch, len, long_len, heads,
                              trace ? &trace->decoder_cross : nullptr);
  Var out = norm(bind, m.decoder_norm2, nn::add(mid, cross));
  Var y = nn::sigmoid(feed_forward(bind, m.output_head, out));
  return nn::reshape(y, batch, len);
}

Var forward(Tape& tape, TemporalModule& m, Binding binding, const data::WindowInstance& w, ForwardTrace* trace) {
  const std::size_t long_len = w.long_segment.cols();
  const std::size_t short_len = w.short_segment.cols();
  if (w.positions.size() != long_len || w.deltas.size() != long_len) {
    throw std::invalid_argument("window positions/deltas must cover the long segment");
  }
  const Binder bind{tape, binding};
  Var alpha = bind(m.time_phase);
  const std::span<const std::int64_t> pos(w.positions);
  const std::span<const double> del(w.deltas);
  Var te_long = time_embedding(tape, alpha, pos, del);
  Var te_short = time_embedding(tape, alpha, pos.last(short_len), del.last(short_len));
  Var encoded = encode(tape, m, binding, w.long_segment, te_long, trace);
  return decode(tape, m, binding, w.short_segment, te_short, encoded, long_len, trace);
}

Reconstruction reconstruct(const data::WindowInstance& w, const TemporalModule& m, ForwardTrace* trace) {
  Tape tape;
  // a frozen binding only reads parameter values
  Var y1 = forward(tape, const_cast<TemporalModule&>(m), Binding::frozen, w, trace);
  Reconstruction r{y1.value(), Matrix(w.short_segment.rows(), w.short_segment.cols())};
  r.error.map() = w.short_segment.map() - r.y1.map();
  return r;
}

}  // namespace aero::temporal
