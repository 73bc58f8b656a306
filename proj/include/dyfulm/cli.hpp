#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dyfulm/checkpoint.hpp"
#include "dyfulm/config.hpp"
#include "dyfulm/data.hpp"
#include "dyfulm/gradcheck_suite.hpp"
#include "dyfulm/metrics.hpp"
#include "dyfulm/model.hpp"
#include "dyfulm/train.hpp"

namespace dyfulm {

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("short write to " + path);
}

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace detail

// identifies a run by what it does, not when it ran
inline std::string make_run_id(const std::string& command, const Config& cfg, std::uint64_t seed,
                               const std::string& variant, const std::vector<std::string>& inputs) {
  nlohmann::json key = {{"command", command}, {"config", cfg}, {"seed", seed}, {"variant", variant},
                        {"inputs", inputs}};
  return command + "-" + detail::hex64(detail::fnv1a(key.dump()));
}

class RunWriter {
 public:
  RunWriter(std::string command, std::string out_dir, const Config& cfg, std::uint64_t seed,
            std::string variant, std::vector<std::string> inputs)
      : command_(std::move(command)),
        out_dir_(std::move(out_dir)),
        variant_(std::move(variant)),
        inputs_(std::move(inputs)),
        cfg_(cfg),
        seed_(seed),
        start_(std::chrono::steady_clock::now()) {
    std::filesystem::create_directories(out_dir_);
    run_id_ = make_run_id(command_, cfg_, seed_, variant_, inputs_);
  }

  const std::string& run_id() const { return run_id_; }

  std::string path(const std::string& name) {
    const std::string p = (std::filesystem::path(out_dir_) / name).string();
    outputs_.push_back(p);
    return p;
  }

  void finish(const AblationToggles& toggles) {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::json manifest = {
        {"run_id", run_id_},
        {"command", command_},
        {"seed", seed_},
        {"variant", variant_},
        {"toggles", toggles},
        {"config", cfg_},
        {"inputs", inputs_},
        {"outputs", outputs_},
        {"created_unix",
         std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
             .count()},
        {"duration_seconds", seconds}};
    detail::write_text_file((std::filesystem::path(out_dir_) / "manifest.json").string(),
                            manifest.dump(1) + "\n");
  }

 private:
  std::string command_, out_dir_, variant_, run_id_;
  std::vector<std::string> inputs_, outputs_;
  Config cfg_;
  std::uint64_t seed_;
  std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------
// subcommand bodies

inline int cmd_synth(const Config& cfg, std::uint64_t seed, const std::string& out_dir) {
  RunWriter run("synth", out_dir, cfg, seed, "", {});
  const auto rows = generate_synthetic(cfg.data.synth_rows, cfg.data.synth_vocab, seed);
  std::string csv = "text,score,year\n";
  for (const RawRow& r : rows) {
    csv += csv_escape(r.text);
    csv += ',';
    csv += detail::fmt("%.17g", *r.score);
    csv += ',';
    csv += std::to_string(*r.year);
    csv += '\n';
  }
  detail::write_text_file(run.path("synthetic.csv"), csv);
  run.finish({});
  std::cout << run.run_id() << ": wrote " << rows.size() << " synthetic rows\n";
  return 0;
}

inline int cmd_preprocess(const std::string& input, const std::string& schema, const Config& cfg,
                          std::uint64_t seed, const std::string& out_dir, bool allow_dirty) {
  RunWriter run("preprocess", out_dir, cfg, seed, "", {input});
  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot open " + input);
  std::vector<RawRow> rows;
  if (schema == "generic")
    rows = load_generic_csv(in);
  else if (schema == "booking")
    rows = load_booking_csv(in);
  else
    throw std::invalid_argument("unknown schema '" + schema + "' (expected generic or booking)");

  const PipelineResult pipe = run_pipeline(rows, cfg.data, cfg.model.t_max);
  save_records(run.path("records.json"), pipe.records, pipe.vocab, cfg.model.t_max);

  IntegrityReport integrity;
  if (!pipe.records.empty()) {
    integrity = integrity_check(pipe.records, pipe.vocab, cfg.model.t_max);
    const DatasetStats stats = dataset_stats(pipe.records);
    std::string stats_csv = "group,max,q25,mean,median\n";
    for (const GroupStats& g : stats.groups) {
      stats_csv += g.group + "," + detail::fmt("%.6f", g.max) + "," + detail::fmt("%.6f", g.q25) +
                   "," + detail::fmt("%.6f", g.mean) + "," + detail::fmt("%.6f", g.median) + "\n";
    }
    detail::write_text_file(run.path("stats.csv"), stats_csv);
    std::string hist_csv = "task,class,count\n";
    for (size_t c = 0; c < stats.coarse_counts.size(); ++c)
      hist_csv += "coarse," + std::to_string(c) + "," + std::to_string(stats.coarse_counts[c]) + "\n";
    for (size_t c = 0; c < stats.fine_counts.size(); ++c)
      hist_csv += "fine," + std::to_string(c) + "," + std::to_string(stats.fine_counts[c]) + "\n";
    detail::write_text_file(run.path("label_histogram.csv"), hist_csv);
  }
  run.finish({});

  const long dropped = pipe.dropped_empty + pipe.dropped_no_score + pipe.dropped_bad_score;
  const long violations = dropped + integrity.violations();
  std::cout << run.run_id() << ": " << rows.size() << " rows in, " << pipe.records.size()
            << " records kept\n"
            << "dropped: " << pipe.dropped_empty << " empty text, " << pipe.dropped_no_score
            << " missing score, " << pipe.dropped_bad_score << " score out of range\n"
            << "integrity: " << integrity.violations() << " violations on kept records\n";
  if (violations > 0 && !allow_dirty) {
    std::cout << "failing on " << violations << " violations (use --allow-dirty to keep going)\n";
    return 1;
  }
  return 0;
}

inline int cmd_train(const std::string& records_path, Config cfg, std::uint64_t seed,
                     const std::string& variant, const std::string& out_dir) {
  const RecordsFile file = load_records(records_path);
  // the data file owns tokenization, so its sizes win over config defaults
  cfg.model.vocab_size = file.vocab.size();
  cfg.model.t_max = file.t_max;
  cfg.train.seed = seed;
  const AblationToggles toggles = toggles_for_variant(variant);

  RunWriter run("train", out_dir, cfg, seed, variant, {records_path});
  Model model(cfg.model, seed);
  const TrainResult result = train(model, file.records, cfg.train, toggles);
  save_checkpoint(model, run.path("checkpoint.json"));
  run.path("checkpoint.json.bin");  // companion blob written by save_checkpoint

  std::string curve = "epoch,loss\n";
  for (size_t e = 0; e < result.epoch_loss.size(); ++e)
    curve += std::to_string(e + 1) + "," + detail::fmt("%.17g", result.epoch_loss[e]) + "\n";
  detail::write_text_file(run.path("loss_curve.csv"), curve);
  run.finish(toggles);

  std::cout << run.run_id() << ": trained " << variant << " on " << file.records.size()
            << " records\n";
  for (size_t e = 0; e < result.epoch_loss.size(); ++e)
    std::cout << "epoch " << (e + 1) << " mean loss " << detail::fmt("%.6f", result.epoch_loss[e])
              << "\n";
  return 0;
}

inline int cmd_eval(const std::string& records_path, const std::string& checkpoint_path, Config cfg,
                    std::uint64_t seed, const std::string& variant, const std::string& out_dir) {
  const RecordsFile file = load_records(records_path);
  const Model model = load_checkpoint(checkpoint_path);
  const AblationToggles toggles = toggles_for_variant(variant);
  RunWriter run("eval", out_dir, cfg, seed, variant, {records_path, checkpoint_path});
  const MetricsReport report = evaluate(model, file.records, toggles);
  detail::write_text_file(run.path("metrics.csv"), std::string(metrics_csv_header()) + "\n" +
                                                       metrics_csv_row(run.run_id(), variant, report) +
                                                       "\n");
  run.finish(toggles);
  std::cout << metrics_table(variant, report);
  return 0;
}

inline int cmd_ablate(const std::string& records_path, Config cfg, std::uint64_t seed,
                      const std::string& out_dir) {
  const RecordsFile file = load_records(records_path);
  cfg.model.vocab_size = file.vocab.size();
  cfg.model.t_max = file.t_max;
  cfg.train.seed = seed;

  RunWriter run("ablate", out_dir, cfg, seed, "all", {records_path});
  const auto [train_set, holdout] = split_holdout(file.records, 0.2, seed);
  const std::vector<std::string> variants = {"full", "wo-dl", "wo-hg-dl", "wo-gf-hg-dl"};
  std::string csv = std::string(metrics_csv_header()) + "\n";
  for (const std::string& variant : variants) {
    const AblationToggles toggles = toggles_for_variant(variant);
    Model model(cfg.model, seed);
    train(model, train_set, cfg.train, toggles);
    const MetricsReport report = evaluate(model, holdout, toggles);
    csv += metrics_csv_row(run.run_id(), variant, report) + "\n";
    std::cout << metrics_table(variant, report) << "\n";
  }
  detail::write_text_file(run.path("ablation.csv"), csv);
  run.finish({});
  std::cout << run.run_id() << ": ablation table written\n";
  return 0;
}

inline int cmd_gradcheck(const Config& cfg, bool model_from_config, double threshold) {
  ModelConfig tiny = model_from_config ? cfg.model : tiny_gradcheck_config();
  tiny.dropout = 0.0;  // finite differences need a deterministic forward
  double block_thr = 1e-6, end_thr = 1e-4;
  if (threshold >= 0.0) block_thr = end_thr = threshold;
  const std::vector<BlockCheck> checks = run_gradcheck_suite(tiny, block_thr, end_thr);
  bool all_ok = true;
  for (const BlockCheck& c : checks) {
    std::printf("%-16s max_rel_error %.3e threshold %.1e %s\n", c.name.c_str(), c.max_rel_error,
                c.threshold, c.passed() ? "PASS" : "FAIL");
    all_ok = all_ok && c.passed();
  }
  return all_ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// argument surface

inline int run_cli(std::vector<std::string> args) {
  CLI::App app{"dual-encoder multi-task sentiment toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "runs", schema = "generic", variant = "full";
  std::string input_path, records_path, checkpoint_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool allow_dirty = false;
  double threshold = -1.0;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic review CSV");
  CLI::App* preprocess = app.add_subcommand("preprocess", "clean, label and tokenize a CSV");
  CLI::App* train_cmd = app.add_subcommand("train", "train one variant on a records file");
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a records file");
  CLI::App* ablate = app.add_subcommand("ablate", "train and compare all four variants");
  CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference check of every block");

  for (CLI::App* cmd : {synth, preprocess, train_cmd, eval_cmd, ablate, gradcheck_cmd}) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed, "base seed (overrides config)")->each([&](const std::string&) {
      seed_given = true;
    });
  }
  for (CLI::App* cmd : {synth, preprocess, train_cmd, eval_cmd, ablate})
    cmd->add_option("--out", out_dir, "output directory");

  preprocess->add_option("input", input_path, "input CSV")->required();
  preprocess->add_option("--schema", schema, "input schema")
      ->check(CLI::IsMember({"generic", "booking"}));
  preprocess->add_flag("--allow-dirty", allow_dirty, "exit 0 even with integrity violations");

  train_cmd->add_option("records", records_path, "records file from preprocess")->required();
  train_cmd->add_option("--variant", variant, "ablation variant")
      ->check(CLI::IsMember({"full", "wo-dl", "wo-hg-dl", "wo-gf-hg-dl"}));

  eval_cmd->add_option("records", records_path, "records file from preprocess")->required();
  eval_cmd->add_option("checkpoint", checkpoint_path, "checkpoint manifest path")->required();
  eval_cmd->add_option("--variant", variant, "ablation variant")
      ->check(CLI::IsMember({"full", "wo-dl", "wo-hg-dl", "wo-gf-hg-dl"}));

  ablate->add_option("records", records_path, "records file from preprocess")->required();

  gradcheck_cmd->add_option("--threshold", threshold, "override every component threshold");

  std::reverse(args.begin(), args.end());  // CLI11's vector overload wants them reversed
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    Config cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    const std::uint64_t run_seed = seed_given ? seed : cfg.train.seed;

    if (synth->parsed()) return cmd_synth(cfg, run_seed, out_dir);
    if (preprocess->parsed())
      return cmd_preprocess(input_path, schema, cfg, run_seed, out_dir, allow_dirty);
    if (train_cmd->parsed()) return cmd_train(records_path, cfg, run_seed, variant, out_dir);
    if (eval_cmd->parsed())
      return cmd_eval(records_path, checkpoint_path, cfg, run_seed, variant, out_dir);
    if (ablate->parsed()) return cmd_ablate(records_path, cfg, run_seed, out_dir);
    if (gradcheck_cmd->parsed())
      return cmd_gradcheck(cfg, !config_path.empty(), threshold);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace dyfulm
