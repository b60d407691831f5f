#include "cli.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include "aero/config.hpp"
#include "aero/detector.hpp"
#include "aero/eval.hpp"
#include "aero/io.hpp"
#include "aero/model.hpp"
#include "aero/synth.hpp"
#include "aero/trainer.hpp"
#include "aero/viz.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <unistd.h>

namespace fs = std::filesystem;

namespace aero::cli {

namespace {

constexpr int kFailure = 1;
constexpr int kUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Files of one command are written under a hidden directory next to the
/// destination and moved into place only once everything succeeded.
class OutputStage {
 public:
  explicit OutputStage(fs::path dest) : dest_(std::move(dest)) {
    fs::create_directories(dest_);
    tmp_ = dest_ / (".aero-stage-" + std::to_string(::getpid()));
    fs::remove_all(tmp_);
    fs::create_directories(tmp_);
  }
  ~OutputStage() {
    std::error_code ec;
    fs::remove_all(tmp_, ec);
  }
  OutputStage(const OutputStage&) = delete;
  OutputStage& operator=(const OutputStage&) = delete;

  fs::path path(const std::string& name) const { return tmp_ / name; }

  void commit() {
    for (const auto& entry : fs::recursive_directory_iterator(tmp_)) {
      if (!entry.is_regular_file()) continue;
      const auto rel = fs::relative(entry.path(), tmp_);
      const auto target = dest_ / rel;
      fs::create_directories(target.parent_path());
      fs::rename(entry.path(), target);
    }
  }

 private:
  fs::path dest_;
  fs::path tmp_;
};

struct Globals {
  std::string config_file;
  std::vector<std::string> overrides;  ///< key=value
  std::map<std::string, std::string> flags;  ///< flag-backed keys set on the command line
};

config::RunConfig resolve(const Globals& g, char** envp) {
  config::RunConfig cfg;
  if (!g.config_file.empty()) cfg.load_file(g.config_file);
  cfg.load_env(envp);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw config::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(std::string(io::trim(kv.substr(0, eq))), std::string(io::trim(kv.substr(eq + 1))), "--set");
  }
  for (const auto& [k, v] : g.flags) cfg.set(k, v, "command line");
  return cfg;
}

data::ObservationFrame load_required(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("missing input: " + path.string());
  return data::load_csv(path);
}

fs::path checkpoint_dir(const config::RunConfig& cfg) {
  const auto& c = cfg.get("checkpoint_dir");
  return c.empty() ? fs::path(cfg.get("out")) : fs::path(c);
}

std::vector<std::string> names_of(const data::ObservationFrame& f) {
  if (!f.names.empty()) return f.names;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < f.variates(); ++i) out.push_back("v" + std::to_string(i));
  return out;
}

// ---- generate --------------------------------------------------------------

int cmd_generate(const config::RunConfig& cfg) {
  const auto params = cfg.preset_params();
  const auto seed = static_cast<std::uint64_t>(cfg.get_size("seed"));
  auto ds = synth::gen_dataset(params, seed);
  OutputStage stage(cfg.get("out"));
  auto train = ds.train;
  train.labels.reset();
  train.noise_mask.reset();
  data::write_csv(train, stage.path("train.csv"));
  data::write_csv(ds.test, stage.path("test.csv"));
  io::write_file_atomic(stage.path("config.txt"), cfg.render());
  stage.commit();
  const auto st = synth::compute_stats(ds.test);
  std::cout << "generated " << params.name << " (seed " << seed << "): " << ds.test.variates() << " variates, "
            << ds.train.length() << " train / " << ds.test.length() << " test points, anomaly "
            << st.anomaly_percent << "%, noise " << st.noise_percent << "%, A/N " << st.anomaly_to_noise << "\n";
  return 0;
}

// ---- train -----------------------------------------------------------------

int cmd_train(const config::RunConfig& cfg) {
  const auto tc = cfg.train_config();
  const auto variant = eval::parse_variant(cfg.get("variant"));
  const fs::path data_dir = cfg.get("data_dir");
  const auto raw = load_required(data_dir / "train.csv");

  model::AeroModel m;
  m.config = tc;
  m.norm = data::fit_normalize(raw);
  m.reference_interval = data::median_interval(raw.times);
  m.temporal = temporal::TemporalModule(tc.temporal_config());
  m.noise = noise::NoiseModule(tc.short_window);
  auto frame = std::make_shared<const data::ObservationFrame>(data::apply_normalize(raw, m.norm));

  OutputStage stage(cfg.get("out"));
  std::string log;
  auto on_epoch = [&](const train::EpochRecord& r) {
    nlohmann::json j = {{"stage", r.stage},
                        {"epoch", r.epoch},
                        {"train_loss", r.train_loss},
                        {"val_loss", r.val_loss},
                        {"seconds", r.seconds}};
    log += j.dump() + "\n";
    std::cerr << "stage " << r.stage << " epoch " << r.epoch << " train " << r.train_loss << " val " << r.val_loss
              << " (" << r.seconds << " s)\n";
  };
  auto flush_outputs = [&] {
    io::write_file_atomic(stage.path("train_log.jsonl"), log);
    io::write_file_atomic(stage.path("config.txt"), cfg.render());
  };

  try {
    train::train_stage1(m.temporal, data::make_windows(frame, tc.window_options(m.reference_interval)), tc, on_epoch);
    model::save_stage1(stage.path("stage1.ckpt"), m);
    if (variant != eval::Variant::no_stage2) {
      const auto cache = train::cache_stage1(m.temporal, data::make_windows(frame, tc.window_options(m.reference_interval, 1)));
      train::train_stage2(m.noise, cache, tc, on_epoch);
      model::save_stage2(stage.path("stage2.ckpt"), m);
    }
  } catch (const train::TrainingAborted& e) {
    // keep the rolled-back weights so the run can be inspected or resumed
    if (!fs::exists(stage.path("stage1.ckpt"))) model::save_stage1(stage.path("stage1.ckpt"), m);
    else model::save_stage2(stage.path("stage2.ckpt"), m);
    flush_outputs();
    stage.commit();
    throw;
  }
  flush_outputs();
  stage.commit();
  return 0;
}

// ---- detect ----------------------------------------------------------------

std::string per_variate_report(const std::vector<std::string>& names, const std::vector<detect::PotThreshold>& th) {
  std::string out;
  for (std::size_t i = 0; i < th.size(); ++i) out += "[" + names[i] + "]\n" + detect::threshold_report(th[i]);
  return out;
}

int cmd_detect(const config::RunConfig& cfg) {
  const fs::path data_dir = cfg.get("data_dir");
  const auto ckpt_dir = checkpoint_dir(cfg);
  const auto variant = eval::parse_variant(cfg.get("variant"));
  const auto stage1_path = ckpt_dir / "stage1.ckpt";
  const auto stage2_path = ckpt_dir / "stage2.ckpt";
  if (!fs::exists(stage1_path)) throw std::runtime_error("missing input: " + stage1_path.string());
  const bool use_stage2 = variant != eval::Variant::no_stage2;
  if (use_stage2 && !fs::exists(stage2_path)) throw std::runtime_error("missing input: " + stage2_path.string());
  const auto m = model::load_model(stage1_path, use_stage2 ? &stage2_path : nullptr);

  const auto raw_train = load_required(data_dir / "train.csv");
  const auto raw_test = load_required(data_dir / "test.csv");
  if (raw_test.variates() != m.norm.min.size()) {
    throw ValidationError("test.csv has " + std::to_string(raw_test.variates()) + " variates, model expects " +
                          std::to_string(m.norm.min.size()));
  }
  auto train_frame = std::make_shared<const data::ObservationFrame>(data::apply_normalize(raw_train, m.norm));
  auto test_frame = std::make_shared<const data::ObservationFrame>(data::apply_normalize(raw_test, m.norm));
  const auto wopts = m.config.window_options(m.reference_interval, 1);

  detect::ScoreOptions so;
  so.use_stage2 = use_stage2;
  so.graph = m.config.graph;
  if (variant == eval::Variant::static_graph) so.graph.mode = noise::GraphMode::complete;

  const auto train_scores = detect::score_stream(data::make_windows(train_frame, wopts), m.temporal, m.noise, so);
  so.dump_graphs = cfg.get_size_list("dump_graphs");
  const auto test_scores = detect::score_stream(data::make_windows(test_frame, wopts), m.temporal, m.noise, so);
  const auto names = names_of(raw_test);

  OutputStage stage(cfg.get("out"));
  const double level = cfg.get_double("pot_level"), q = cfg.get_double("pot_q");
  BinaryMatrix labels;
  if (cfg.get_bool("per_variate_threshold")) {
    const auto th = detect::pot_fit_per_variate(train_scores.scores, level, q);
    labels = detect::label(test_scores.scores, th);
    io::write_file_atomic(stage.path("threshold.txt"), per_variate_report(names, th));
  } else {
    const auto& s = train_scores.scores.values();
    const auto th = detect::pot_fit(std::vector<double>(s.begin(), s.end()), level, q);
    labels = detect::label(test_scores.scores, th.z_q);
    io::write_file_atomic(stage.path("threshold.txt"), detect::threshold_report(th));
  }
  detect::write_series_csv(stage.path("scores.csv"), names, test_scores.times, test_scores.scores);
  detect::write_labels_csv(stage.path("labels.csv"), names, test_scores.times, labels);
  detect::write_series_csv(stage.path("stage1_error.csv"), names, test_scores.times, test_scores.stage1_error);
  detect::write_series_csv(stage.path("residual.csv"), names, test_scores.times, test_scores.residual);
  for (const auto& [idx, g] : test_scores.graphs) {
    std::vector<double> cols(g.cols());
    for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = static_cast<double>(i);
    // rows of the dump are variates; the time column holds the variate index
    detect::write_series_csv(stage.path("graphs/window_" + std::to_string(idx) + ".csv"), names, cols, g);
  }
  io::write_file_atomic(stage.path("config.txt"), cfg.render());
  stage.commit();
  std::cerr << "scored " << test_scores.length() << " timestamps, " << labels.count() << " positive cells\n";
  return 0;
}

// ---- eval ------------------------------------------------------------------

BinaryMatrix to_binary(const data::ObservationFrame& f, const std::string& what) {
  if (f.labels) return *f.labels;
  BinaryMatrix b(f.variates(), f.length());
  for (std::size_t r = 0; r < f.variates(); ++r) {
    for (std::size_t c = 0; c < f.length(); ++c) {
      const double v = f.values(r, c);
      if (v != 0.0 && v != 1.0) throw ValidationError(what + ": cells must be 0 or 1");
      b.set(r, c, v == 1.0);
    }
  }
  return b;
}

/// Truth columns at the prediction's timestamps.
BinaryMatrix align_truth(const data::ObservationFrame& pred, const data::ObservationFrame& truth_frame,
                         const BinaryMatrix& truth) {
  if (pred.variates() != truth.rows()) {
    throw ValidationError("labels have " + std::to_string(pred.variates()) + " variates, truth has " +
                          std::to_string(truth.rows()));
  }
  BinaryMatrix out(truth.rows(), pred.length());
  std::size_t j = 0;
  for (std::size_t c = 0; c < pred.length(); ++c) {
    while (j < truth_frame.length() && truth_frame.times[j] < pred.times[c]) ++j;
    if (j == truth_frame.length() || truth_frame.times[j] != pred.times[c]) {
      throw ValidationError("timestamp " + io::format_double(pred.times[c]) + " of the labels is absent from the truth");
    }
    for (std::size_t r = 0; r < truth.rows(); ++r) out.set(r, c, truth(r, j));
  }
  return out;
}

int cmd_eval(const config::RunConfig& cfg, const std::string& labels_path, const std::string& truth_path) {
  const auto pred_frame = load_required(labels_path);
  const auto truth_frame = load_required(truth_path);
  const auto pred = to_binary(pred_frame, labels_path);
  const auto truth = align_truth(pred_frame, truth_frame, to_binary(truth_frame, truth_path));
  const auto metrics = eval::evaluate(pred, truth, cfg.get_bool("point_adjust"));
  const auto report = eval::metrics_report(metrics);
  std::cout << report;
  OutputStage stage(cfg.get("out"));
  io::write_file_atomic(stage.path("metrics.txt"), report);
  io::write_file_atomic(stage.path("eval_config.txt"), cfg.render());
  stage.commit();
  if (!cfg.get("results_ledger").empty()) {
    eval::append_results(cfg.get("results_ledger"), cfg.get("run_id"), cfg.get("variant"), metrics);
  }
  return 0;
}

// ---- viz -------------------------------------------------------------------

/// Threshold per variate name; the pooled report maps every name to z_q.
std::map<std::string, double> read_thresholds(const fs::path& path, const std::vector<std::string>& names) {
  std::map<std::string, double> out;
  const auto text = io::read_file(path);
  if (text.find('[') == std::string::npos) {
    const auto th = detect::parse_threshold_report(text);
    for (const auto& n : names) out[n] = th.z_q;
    return out;
  }
  std::string current, block;
  auto flush = [&] {
    if (!current.empty()) out[current] = detect::parse_threshold_report(block).z_q;
    block.clear();
  };
  for (const auto& line : io::split(text, '\n')) {
    if (!line.empty() && line.front() == '[' && line.back() == ']') {
      flush();
      current = line.substr(1, line.size() - 2);
    } else {
      block += line + "\n";
    }
  }
  flush();
  return out;
}

int cmd_viz(const config::RunConfig& cfg, const std::string& run_dir_arg) {
  const fs::path run_dir = run_dir_arg.empty() ? fs::path(cfg.get("out")) : fs::path(run_dir_arg);
  const auto run_id = cfg.get("run_id");
  const auto scores_path = run_dir / "scores.csv";
  OutputStage stage(run_dir / "viz");
  std::size_t written = 0;

  if (!fs::exists(scores_path)) {
    warn("viz: " + scores_path.string() + " not found; skipping score plots");
  } else {
    const auto scores = data::load_csv(scores_path);
    const auto names = names_of(scores);
    std::map<std::string, double> thresholds;
    if (fs::exists(run_dir / "threshold.txt")) thresholds = read_thresholds(run_dir / "threshold.txt", names);
    else warn("viz: no threshold.txt; plotting scores without a threshold line");
    std::optional<data::ObservationFrame> stage1;
    if (fs::exists(run_dir / "stage1_error.csv")) stage1 = data::load_csv(run_dir / "stage1_error.csv");
    for (std::size_t r = 0; r < scores.variates(); ++r) {
      const auto row = scores.values.row(r);
      std::vector<viz::Line> lines;
      if (stage1 && stage1->variates() == scores.variates()) {
        std::vector<double> e;
        for (double v : stage1->values.row(r)) e.push_back(std::abs(v));
        lines.push_back({"|stage-1 error|", e, "#9e9e9e"});
      }
      lines.push_back({"score", {row.begin(), row.end()}, "#1f77b4"});
      std::optional<double> th;
      if (auto it = thresholds.find(names[r]); it != thresholds.end()) th = it->second;
      io::write_file_atomic(stage.path(run_id + "_scores_" + names[r] + ".svg"),
                            viz::line_chart(run_id + " " + names[r], scores.times, lines, th));
      ++written;
    }
  }

  const auto graph_dir = run_dir / "graphs";
  if (fs::is_directory(graph_dir)) {
    std::vector<fs::path> dumps;
    for (const auto& e : fs::directory_iterator(graph_dir)) {
      if (e.path().extension() == ".csv") dumps.push_back(e.path());
    }
    std::sort(dumps.begin(), dumps.end());
    for (const auto& p : dumps) {
      const auto g = data::load_csv(p);
      const std::string stem = p.stem().string();  // window_<idx>
      const std::string idx = stem.substr(stem.find('_') + 1);
      io::write_file_atomic(stage.path(run_id + "_graph_w" + idx + ".svg"),
                            viz::heatmap(run_id + " window " + idx, g.values, names_of(g)));
      ++written;
    }
  }
  stage.commit();
  std::cerr << "wrote " << written << " plot(s) to " << (run_dir / "viz").string() << "\n";
  return 0;
}

}  // namespace

int run(int argc, char** argv, char** envp) {
  CLI::App app{"aero: two-stage anomaly detection for multivariate magnitude series"};
  app.require_subcommand(1);
  Globals g;
  std::string seed, out;
  app.add_option("--config", g.config_file, "key = value configuration file");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--set", g.overrides, "override any configuration key (key=value), repeatable");

  auto* generate = app.add_subcommand("generate", "write a synthetic benchmark dataset");
  std::string preset;
  generate->add_option("--preset", preset, "middle, high or low");

  auto* train = app.add_subcommand("train", "train both stages on <data>/train.csv");
  std::string data_dir, max_epochs, stride, variant;
  train->add_option("--data", data_dir, "directory containing train.csv");
  train->add_option("--max-epochs", max_epochs, "epoch cap per stage");
  train->add_option("--stride", stride, "stride between stage-1 training windows");
  train->add_option("--variant", variant, "full, no_stage2 or static_graph");

  auto* detect = app.add_subcommand("detect", "score <data>/test.csv and label it with a POT threshold");
  std::string checkpoints, dump_graphs, detect_variant;
  detect->add_option("--data", data_dir, "directory containing train.csv and test.csv");
  detect->add_option("--checkpoints", checkpoints, "directory containing stage1.ckpt and stage2.ckpt");
  detect->add_option("--dump-graphs", dump_graphs, "comma-separated test window indices");
  detect->add_option("--variant", detect_variant, "full, no_stage2 or static_graph");

  auto* evalc = app.add_subcommand("eval", "precision / recall / F1 of predicted labels");
  std::string labels_path, truth_path, ledger;
  bool no_adjust = false;
  evalc->add_option("labels", labels_path, "predicted labels CSV")->required();
  evalc->add_option("truth", truth_path, "ground-truth labels CSV")->required();
  evalc->add_flag("--no-point-adjust", no_adjust, "count raw pointwise predictions");
  evalc->add_option("--ledger", ledger, "append a result row to this CSV");

  auto* vizc = app.add_subcommand("viz", "render score traces and graph heatmaps as SVG");
  std::string run_dir;
  vizc->add_option("run_dir", run_dir, "directory written by detect (defaults to --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  auto flag = [&](const char* key, const std::string& v) {
    if (!v.empty()) g.flags[key] = v;
  };
  flag("seed", seed);
  flag("out", out);
  flag("preset", preset);
  flag("data_dir", data_dir);
  flag("max_epochs", max_epochs);
  flag("stride", stride);
  flag("variant", variant.empty() ? detect_variant : variant);
  flag("checkpoint_dir", checkpoints);
  flag("dump_graphs", dump_graphs);
  flag("results_ledger", ledger);
  if (no_adjust) g.flags["point_adjust"] = "false";

  try {
    const auto cfg = resolve(g, envp);
    if (*generate) return cmd_generate(cfg);
    if (*train) return cmd_train(cfg);
    if (*detect) return cmd_detect(cfg);
    if (*evalc) return cmd_eval(cfg, labels_path, truth_path);
    if (*vizc) return cmd_viz(cfg, run_dir);
  } catch (const config::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace aero::cli
