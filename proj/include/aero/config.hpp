#pragma once

#include "aero/eval.hpp"
#include "aero/synth.hpp"
#include "aero/trainer.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace aero::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KeyInfo {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every key a run accepts, with its default.
const std::vector<KeyInfo>& schema();

/// Flat key-value run configuration. Later sources override earlier ones:
/// defaults, then a config file, then AERO_* environment variables, then
/// command-line values. Keys outside the schema are rejected everywhere.
class RunConfig {
 public:
  RunConfig();

  void set(const std::string& key, const std::string& value, const std::string& source = "command line");
  /// `key = value` lines; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin);
  /// AERO_MAX_EPOCHS=3 sets max_epochs.
  void load_env(char** envp);

  const std::string& get(const std::string& key) const;
  std::string source(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;

  train::TrainConfig train_config() const;
  synth::PresetParams preset_params() const;
  eval::PipelineConfig pipeline_config() const;

  /// Sorted `key = value` lines of the resolved configuration.
  std::string render() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> sources_;
};

}  // namespace aero::config
