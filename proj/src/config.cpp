#include "aero/config.hpp"

#include "aero/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace aero::config {

const std::vector<KeyInfo>& schema() {
  static const std::vector<KeyInfo> keys = {
      {"seed", "0", "random seed for generation and training"},
      {"out", ".", "output directory"},
      {"run_id", "run", "name used in result ledgers and plot file names"},
      // generation
      {"preset", "middle", "middle, high or low"},
      {"n_variates", "", "override the preset's variate count"},
      {"train_length", "", "override the preset's training length"},
      {"test_length", "", "override the preset's test length"},
      {"variable_fraction", "", "fraction of sinusoidal variates"},
      {"noise_sigma", "", "standard deviation of the base signal"},
      {"anomaly_segments", "", "number of anomaly segments in the test split"},
      {"anomaly_rate", "", "fraction of test cells that are anomalous"},
      {"noise_rate", "", "fraction of cells covered by concurrent noise"},
      {"noise_variates", "", "size of the pool of variates that receive noise"},
      {"noise_events", "", "concurrent-noise events per split"},
      {"noise_amp_min", "", "smallest noise amplitude"},
      {"noise_amp_max", "", "largest noise amplitude"},
      {"anomaly_amp_min", "", "smallest anomaly amplitude"},
      {"anomaly_amp_max", "", "largest anomaly amplitude"},
      {"min_gap", "", "spacing between anomaly segments"},
      // training
      {"window", "200", "long window W"},
      {"short_window", "60", "short window omega"},
      {"d_model", "32", "transformer width"},
      {"heads", "4", "attention heads"},
      {"layers", "1", "encoder/decoder layers"},
      {"lr", "0.001", "Adam learning rate"},
      {"max_epochs", "100", "epoch cap per stage"},
      {"patience", "5", "early-stopping patience"},
      {"batch_size", "16", "windows per minibatch"},
      {"stride", "1", "stride between stage-1 training windows"},
      {"positions", "window", "time-embedding positions: window (0..W-1) or global (frame column)"},
      {"validation_fraction", "0.1", "chronological tail held out for early stopping"},
      {"clip_norm", "5", "global gradient-norm clip"},
      {"variant", "full", "full, no_stage2 or static_graph"},
      {"degree_norm", "absolute_sum", "absolute_sum or signed_sum"},
      // detection
      {"pot_level", "0.99", "initial POT quantile"},
      {"pot_q", "0.001", "POT tail probability"},
      {"per_variate_threshold", "false", "fit one threshold per variate"},
      {"dump_graphs", "", "comma-separated test window indices whose graphs are written"},
      // paths
      {"data_dir", ".", "directory with train.csv / test.csv"},
      {"checkpoint_dir", "", "directory with stage1.ckpt / stage2.ckpt (defaults to out)"},
      {"results_ledger", "", "CSV file that eval appends a row to"},
      {"point_adjust", "true", "apply point adjustment in eval"},
  };
  return keys;
}

namespace {

const KeyInfo* find_key(const std::string& key) {
  for (const auto& k : schema()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : schema()) {
    values_[k.key] = k.default_value;
    sources_[k.key] = "default";
  }
}

void RunConfig::set(const std::string& key, const std::string& value, const std::string& source) {
  if (find_key(key) == nullptr) throw ConfigError(source + ": unknown configuration key '" + key + "'");
  values_[key] = value;
  sources_[key] = source;
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = io::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    set(std::string(io::trim(body.substr(0, eq))), std::string(io::trim(body.substr(eq + 1))),
        origin + ":" + std::to_string(lineno));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  load_text(io::read_file(path), path.string());
}

void RunConfig::load_env(char** envp) {
  if (envp == nullptr) return;
  for (char** e = envp; *e != nullptr; ++e) {
    const std::string entry(*e);
    if (entry.rfind("AERO_", 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string key = entry.substr(5, eq - 5);
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    set(key, entry.substr(eq + 1), "environment " + entry.substr(0, eq));
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return it->second;
}

std::string RunConfig::source(const std::string& key) const {
  auto it = sources_.find(key);
  return it == sources_.end() ? "" : it->second;
}

long long RunConfig::get_int(const std::string& key) const {
  const auto& v = get(key);
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + " (" + source(key) + "): expected an integer, got '" + v + "'");
  return out;
}

std::size_t RunConfig::get_size(const std::string& key) const {
  const long long v = get_int(key);
  if (v < 0) throw ConfigError(key + " (" + source(key) + "): must be non-negative");
  return static_cast<std::size_t>(v);
}

double RunConfig::get_double(const std::string& key) const {
  const auto& v = get(key);
  try {
    const double d = io::parse_double(v);
    if (std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + " (" + source(key) + "): expected a number, got '" + v + "'");
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + " (" + source(key) + "): expected true or false, got '" + v + "'");
}

std::vector<std::size_t> RunConfig::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  const auto& v = get(key);
  if (io::trim(v).empty()) return out;
  for (const auto& part : io::split(v, ',')) {
    const auto t = std::string(io::trim(part));
    std::size_t used = 0;
    unsigned long long x = 0;
    try {
      x = std::stoull(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != t.size()) throw ConfigError(key + ": bad list entry '" + t + "'");
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

train::TrainConfig RunConfig::train_config() const {
  train::TrainConfig c;
  c.window = get_size("window");
  c.short_window = get_size("short_window");
  c.d_model = get_size("d_model");
  c.heads = get_size("heads");
  c.layers = get_size("layers");
  c.lr = get_double("lr");
  c.max_epochs = get_size("max_epochs");
  c.patience = get_size("patience");
  c.batch_size = get_size("batch_size");
  c.stride = get_size("stride");
  c.positions = data::parse_position_mode(get("positions"));
  c.seed = static_cast<std::uint64_t>(get_size("seed"));
  c.validation_fraction = get_double("validation_fraction");
  c.clip_norm = get_double("clip_norm");
  const auto variant = eval::parse_variant(get("variant"));
  c.graph.mode = variant == eval::Variant::static_graph ? noise::GraphMode::complete : noise::GraphMode::window;
  c.graph.norm = noise::parse_degree_norm(get("degree_norm"));
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid training configuration: ") + e.what());
  }
  return c;
}

synth::PresetParams RunConfig::preset_params() const {
  synth::PresetParams p;
  try {
    p = synth::preset_params(get("preset"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  auto size_override = [&](const char* key, std::size_t& field) {
    if (!get(key).empty()) field = get_size(key);
  };
  auto double_override = [&](const char* key, double& field) {
    if (!get(key).empty()) field = get_double(key);
  };
  size_override("n_variates", p.n_variates);
  size_override("train_length", p.train_length);
  size_override("test_length", p.test_length);
  double_override("variable_fraction", p.variable_fraction);
  double_override("noise_sigma", p.noise_sigma);
  size_override("anomaly_segments", p.anomaly_segments);
  double_override("anomaly_rate", p.anomaly_rate);
  double_override("noise_rate", p.noise_rate);
  size_override("noise_variates", p.noise_variates);
  size_override("noise_events", p.noise_events);
  double_override("noise_amp_min", p.noise_amp_min);
  double_override("noise_amp_max", p.noise_amp_max);
  double_override("anomaly_amp_min", p.anomaly_amp_min);
  double_override("anomaly_amp_max", p.anomaly_amp_max);
  size_override("min_gap", p.min_gap);
  return p;
}

eval::PipelineConfig RunConfig::pipeline_config() const {
  eval::PipelineConfig p;
  p.train = train_config();
  p.pot_level = get_double("pot_level");
  p.pot_q = get_double("pot_q");
  p.per_variate_threshold = get_bool("per_variate_threshold");
  return p;
}

std::string RunConfig::render() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace aero::config
