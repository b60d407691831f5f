#include "aero/model.hpp"

#include "aero/checkpoint.hpp"
#include "aero/io.hpp"

#include <stdexcept>

namespace aero::model {

namespace {

const std::string& meta(const nn::Checkpoint& c, const std::string& key) {
  auto it = c.meta.find(key);
  if (it == c.meta.end()) throw std::runtime_error("checkpoint is missing meta key '" + key + "'");
  return it->second;
}

std::size_t meta_size(const nn::Checkpoint& c, const std::string& key) { return std::stoull(meta(c, key)); }

}  // namespace

void save_stage1(const std::filesystem::path& path, const AeroModel& m) {
  const auto params = m.temporal.parameters();
  auto ckpt = nn::make_checkpoint(params);
  const auto& cfg = m.config;
  ckpt.meta["stage"] = "1";
  ckpt.meta["window"] = std::to_string(cfg.window);
  ckpt.meta["short_window"] = std::to_string(cfg.short_window);
  ckpt.meta["d_model"] = std::to_string(cfg.d_model);
  ckpt.meta["heads"] = std::to_string(cfg.heads);
  ckpt.meta["layers"] = std::to_string(cfg.layers);
  ckpt.meta["seed"] = std::to_string(cfg.seed);
  ckpt.meta["reference_interval"] = io::format_double(m.reference_interval);
  ckpt.meta["positions"] = data::to_string(cfg.positions);
  const std::size_t n = m.norm.min.size();
  ckpt.tensors["norm.min"] = Matrix(n, 1, m.norm.min);
  ckpt.tensors["norm.max"] = Matrix(n, 1, m.norm.max);
  nn::save_checkpoint(path, ckpt);
}

void save_stage2(const std::filesystem::path& path, const AeroModel& m) {
  const auto params = m.noise.parameters();
  auto ckpt = nn::make_checkpoint(params);
  ckpt.meta["stage"] = "2";
  ckpt.meta["short_window"] = std::to_string(m.noise.short_window());
  ckpt.meta["graph_mode"] = noise::to_string(m.config.graph.mode);
  ckpt.meta["degree_norm"] = noise::to_string(m.config.graph.norm);
  ckpt.meta["activation"] = m.noise.activation == noise::Activation::tanh ? "tanh" : "identity";
  nn::save_checkpoint(path, ckpt);
}

AeroModel load_model(const std::filesystem::path& stage1, const std::filesystem::path* stage2) {
  const auto c1 = nn::load_checkpoint(stage1);
  if (meta(c1, "stage") != "1") throw std::runtime_error(stage1.string() + " is not a stage-1 checkpoint");
  AeroModel m;
  m.config.window = meta_size(c1, "window");
  m.config.short_window = meta_size(c1, "short_window");
  m.config.d_model = meta_size(c1, "d_model");
  m.config.heads = meta_size(c1, "heads");
  m.config.layers = meta_size(c1, "layers");
  m.config.seed = meta_size(c1, "seed");
  m.reference_interval = io::parse_double(meta(c1, "reference_interval"));
  m.config.positions = data::parse_position_mode(meta(c1, "positions"));
  m.temporal = temporal::TemporalModule(m.config.temporal_config());
  auto params = m.temporal.parameters();
  nn::restore_parameters(c1, params);
  const auto& mn = c1.tensors.at("norm.min");
  const auto& mx = c1.tensors.at("norm.max");
  m.norm.min.assign(mn.values().begin(), mn.values().end());
  m.norm.max.assign(mx.values().begin(), mx.values().end());

  m.noise = noise::NoiseModule(m.config.short_window);
  if (stage2 != nullptr) {
    const auto c2 = nn::load_checkpoint(*stage2);
    if (meta(c2, "stage") != "2") throw std::runtime_error(stage2->string() + " is not a stage-2 checkpoint");
    if (meta_size(c2, "short_window") != m.config.short_window) {
      throw std::runtime_error("stage-2 checkpoint short window does not match stage 1");
    }
    m.config.graph.mode = noise::parse_graph_mode(meta(c2, "graph_mode"));
    m.config.graph.norm = noise::parse_degree_norm(meta(c2, "degree_norm"));
    m.noise.activation = meta(c2, "activation") == "tanh" ? noise::Activation::tanh : noise::Activation::identity;
    auto np = m.noise.parameters();
    nn::restore_parameters(c2, np);
  }
  return m;
}

}  // namespace aero::model
