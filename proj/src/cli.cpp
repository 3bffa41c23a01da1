#include "apdm/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "apdm/checkpoint.hpp"
#include "apdm/scenarios.hpp"
#include "apdm/svg.hpp"

namespace apdm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// One process per run directory: stages refuse to start while a lock file is
// present and remove their own lock on exit. A stale lock after a crash has
// to be removed by hand.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / "run.lock") {
    fs::create_directories(dir);
    if (fs::exists(path_))
      throw std::runtime_error("run directory is locked by '" +
                               path_.string() + "'");
    std::ofstream out(path_);
    out << "locked\n";
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

void update_manifest(const fs::path& dir, const ExperimentConfig& cfg,
                     const std::string& stage,
                     const std::vector<std::string>& artifacts) {
  const fs::path path = dir / "manifest.json";
  json j;
  if (fs::exists(path)) {
    std::ifstream in(path);
    try {
      in >> j;
    } catch (const json::exception&) {
      j = json::object();
    }
  }
  j["config_hash"] = config_hash_hex(cfg);
  j["stages"][stage] = artifacts;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

// Reassembles the shared pipeline state from the artifacts stage_pretrain
// wrote, without re-running pretraining.
Pipeline load_pipeline(const ExperimentConfig& cfg, const fs::path& dir) {
  Pipeline p;
  p.cfg = cfg;
  p.sched = build_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
  p.c_per = identifier_embedding(cfg.emb_per);
  p.c_pr = prior_embedding(cfg.emb_pr);

  const fs::path ds_path = dir / "dataset.json";
  std::ifstream in(ds_path);
  if (!in)
    throw FormatError("missing '" + ds_path.string() + "' (run pretrain first)");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("invalid dataset file: " + std::string(e.what()));
  }
  p.dataset = dataset_from_json(j.at("dataset"));
  p.reference = j.at("reference").get<std::vector<Sample>>();
  p.subject = p.dataset.negatives;

  LoadedCheckpoint ck = load_checkpoint(dir / "pretrained.ckpt");
  p.pretrained = std::move(ck.model);
  return p;
}

ConditionalDenoiser load_model_checked(const ExperimentConfig& cfg,
                                       const fs::path& path) {
  LoadedCheckpoint ck = load_checkpoint(path);
  if (!(ck.model.arch == cfg.arch))
    throw FormatError("checkpoint arch does not match config: " + path.string());
  return std::move(ck.model);
}

void append_metrics_csv(const fs::path& path, const std::string& tag,
                        const MetricReport& r) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (fresh)
    out << "tag,subject_similarity,prior_mmd,n_samples,seed,"
           "similarity_bandwidth,mmd_bandwidth\n";
  out << tag << "," << format_double(r.subject_similarity) << ","
      << format_double(r.prior_mmd) << "," << r.n_samples << "," << r.seed
      << "," << format_double(r.similarity_bandwidth) << ","
      << format_double(r.mmd_bandwidth) << "\n";
}

void append_matrix_rows(const fs::path& path, const std::string& scenario,
                        const std::string& cell,
                        const std::vector<std::pair<std::string, double>>& kv) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (fresh) out << "scenario,cell,metric,value\n";
  for (const auto& [metric, value] : kv)
    out << scenario << "," << cell << "," << metric << ","
        << format_double(value) << "\n";
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

std::vector<std::string> stage_pretrain(const ExperimentConfig& cfg,
                                        const fs::path& dir) {
  Pipeline p = build_pipeline(cfg);
  save_checkpoint(dir / "pretrained.ckpt", p.pretrained, p.sched, cfg.seed,
                  "pretrain");
  p.pretrain_trace.write_csv(dir / "pretrain.csv");
  json ds = {{"world", world_to_json(cfg.world)},
             {"seed", cfg.seed},
             {"subject", cfg.subject},
             {"dataset", dataset_to_json(p.dataset)},
             {"reference", p.reference}};
  write_json(dir / "dataset.json", ds);
  return {"pretrained.ckpt", "pretrained.ckpt.json", "pretrain.csv",
          "dataset.json"};
}

std::vector<std::string> stage_personalize(const ExperimentConfig& cfg,
                                           const fs::path& dir,
                                           const std::string& model_path,
                                           const char* out_name,
                                           const char* csv_name) {
  Pipeline p = load_pipeline(cfg, dir);
  const fs::path target =
      model_path.empty() ? dir / "pretrained.ckpt" : fs::path(model_path);
  ConditionalDenoiser model = load_model_checked(cfg, target);
  Rng rng(derive_seed(cfg.seed, "attack"));
  TrainResult result = personalize(model, p.sched, p.dataset,
                                   cfg.personalize.steps, cfg.personalize.lr, rng);
  save_checkpoint(dir / out_name, result.model, p.sched, cfg.seed, "personalize");
  result.trace.write_csv(dir / csv_name);
  return {out_name, std::string(out_name) + ".json", csv_name};
}

std::vector<std::string> stage_protect(const ExperimentConfig& cfg,
                                       const fs::path& dir,
                                       const std::string& mode_flag) {
  // CLI mode names: naive | dpo | l2p.
  const std::string mode = mode_flag == "dpo" ? "dpo_only" : mode_flag;
  Pipeline p = load_pipeline(cfg, dir);
  std::vector<std::string> artifacts;
  const std::string ckpt_name = "protected_" + mode_flag + ".ckpt";
  CheckpointHook hook;
  if (mode == "l2p" && cfg.l2p.checkpoint_every > 0) {
    hook = [&](std::size_t j, const ConditionalDenoiser& m) {
      const std::string name =
          "protected_l2p_j" + std::to_string(j) + ".ckpt";
      save_checkpoint(dir / name, m, p.sched, cfg.seed, "protect_l2p");
      artifacts.push_back(name);
    };
  }
  ProtectionResult result = protect_model(p, mode, hook);
  save_checkpoint(dir / ckpt_name, result.model, p.sched, cfg.seed,
                  "protect_" + mode_flag);
  artifacts.push_back(ckpt_name);
  artifacts.push_back(ckpt_name + ".json");
  if (!result.trace.columns.empty()) {
    const std::string csv = "protect_" + mode_flag + ".csv";
    result.trace.write_csv(dir / csv);
    artifacts.push_back(csv);
  }
  if (!result.diag_trace.columns.empty()) {
    const std::string csv = "diagnostics_" + mode_flag + ".csv";
    result.diag_trace.write_csv(dir / csv);
    artifacts.push_back(csv);
  }
  return artifacts;
}

std::vector<std::string> stage_eval(const ExperimentConfig& cfg,
                                    const fs::path& dir,
                                    const std::string& model_path,
                                    const std::string& tag) {
  Pipeline p = load_pipeline(cfg, dir);
  const fs::path target =
      model_path.empty() ? dir / "pretrained.ckpt" : fs::path(model_path);
  ConditionalDenoiser model = load_model_checked(cfg, target);
  MetricReport r = score_stage(p, model, p.dataset, tag);
  const std::string json_name = "metrics_" + tag + ".json";
  write_json(dir / json_name, metric_report_to_json(r));
  append_metrics_csv(dir / "metrics.csv", tag, r);
  return {json_name, "metrics.csv"};
}

std::vector<std::string> stage_diagnose(const ExperimentConfig& cfg,
                                        const fs::path& dir,
                                        const std::string& model_path) {
  Pipeline p = load_pipeline(cfg, dir);
  const fs::path target =
      model_path.empty() ? dir / "pretrained.ckpt" : fs::path(model_path);
  ConditionalDenoiser model = load_model_checked(cfg, target);
  Rng rng(derive_seed(cfg.seed, "diagnose"));
  DiagnoseReport rep = diagnose(model, p.sched, p.dataset, cfg.diag_eta, rng);
  write_json(dir / "diagnostics.json",
             {{"norm_per", rep.diag.norm_per},
              {"norm_ppl", rep.diag.norm_ppl},
              {"inner", rep.diag.inner},
              {"cosine", rep.diag.cosine},
              {"taylor_per", rep.diag.taylor_per},
              {"taylor_ppl", rep.diag.taylor_ppl},
              {"eta", rep.diag.eta},
              {"degenerate", rep.diag.degenerate}});
  ExperimentTrace t;
  t.set_columns({"step", "norm_per", "norm_ppl", "cosine", "inner",
                 "taylor_per", "taylor_ppl"});
  t.add_row({0.0, rep.diag.norm_per, rep.diag.norm_ppl, rep.diag.cosine,
             rep.diag.inner, rep.diag.taylor_per, rep.diag.taylor_ppl});
  t.write_csv(dir / "diagnostics.csv");
  return {"diagnostics.json", "diagnostics.csv"};
}

std::vector<std::string> stage_scenario(const ExperimentConfig& cfg,
                                        const fs::path& dir,
                                        const std::string& name) {
  std::vector<std::string> artifacts;
  const std::string report_name = "scenario_" + name + ".json";

  auto save_model = [&](const std::string& file, const ConditionalDenoiser& m,
                        const NoiseSchedule& sched, const char* stage) {
    save_checkpoint(dir / file, m, sched, cfg.seed, stage);
    artifacts.push_back(file);
    return file;
  };

  if (name.rfind("protect_attack_", 0) == 0) {
    const std::string mode_flag = name.substr(15);
    const std::string mode = mode_flag == "dpo" ? "dpo_only" : mode_flag;
    Pipeline p = build_pipeline(cfg);
    ProtectAttackReport rep = run_protect_attack(p, mode);
    rep.checkpoints.push_back(save_model("scenario_" + name + "_protected.ckpt",
                                         rep.protected_model, p.sched,
                                         "scenario_protected"));
    rep.checkpoints.push_back(save_model("scenario_" + name + "_attacked.ckpt",
                                         rep.attacked_model, p.sched,
                                         "scenario_attacked"));
    write_json(dir / report_name, rep.to_json());
    if (!rep.protect_trace.columns.empty()) {
      const std::string csv = "scenario_" + name + "_protect.csv";
      rep.protect_trace.write_csv(dir / csv);
      artifacts.push_back(csv);
    }
    if (!rep.attack_trace.columns.empty()) {
      const std::string csv = "scenario_" + name + "_attack.csv";
      rep.attack_trace.write_csv(dir / csv);
      artifacts.push_back(csv);
    }
    append_matrix_rows(
        dir / "scenario_matrix.csv", "protect_attack", mode_flag,
        {{"pretrained_sim", rep.pretrained_scores.subject_similarity},
         {"pretrained_mmd", rep.pretrained_scores.prior_mmd},
         {"baseline_attacked_sim",
          rep.baseline_attacked_scores.subject_similarity},
         {"protected_mmd", rep.protected_scores.prior_mmd},
         {"attacked_sim", rep.attacked_scores.subject_similarity},
         {"verdict_protected", rep.verdict_protected ? 1.0 : 0.0},
         {"verdict_preserved", rep.verdict_preserved ? 1.0 : 0.0}});
  } else if (name == "naive_collapse") {
    Pipeline p = build_pipeline(cfg);
    CollapseReport rep = run_naive_collapse(p, {0.1, 1.0, 10.0}, cfg.naive.steps);
    write_json(dir / report_name, rep.to_json());
    for (const auto& cell : rep.cells) {
      const std::string tag = format_double(cell.lambda);
      const std::string mmd_csv = "scenario_collapse_mmd_lambda" + tag + ".csv";
      cell.mmd_trace.write_csv(dir / mmd_csv);
      artifacts.push_back(mmd_csv);
      const std::string diag_csv =
          "scenario_collapse_diag_lambda" + tag + ".csv";
      cell.diag_trace.write_csv(dir / diag_csv);
      artifacts.push_back(diag_csv);
      append_matrix_rows(dir / "scenario_matrix.csv", "naive_collapse",
                         "lambda_" + tag,
                         {{"initial_mmd", cell.initial_mmd},
                          {"final_mmd", cell.final_mmd},
                          {"blowup", cell.final_mmd / cell.initial_mmd},
                          {"verdict_collapsed",
                           cell.final_mmd >= kCollapseRatio * cell.initial_mmd
                               ? 1.0
                               : 0.0}});
    }
  } else if (name.rfind("robustness_", 0) == 0) {
    const RobustnessVariant v = parse_variant(name.substr(11));
    Pipeline p = build_pipeline(cfg);
    RobustnessReport rep = run_robustness(p, v);
    rep.checkpoints.push_back(save_model("scenario_" + name + "_protected.ckpt",
                                         rep.protected_model, p.sched,
                                         "scenario_protected"));
    rep.checkpoints.push_back(save_model("scenario_" + name + "_attacked.ckpt",
                                         rep.attacked_model, p.sched,
                                         "scenario_attacked"));
    write_json(dir / report_name, rep.to_json());
    append_matrix_rows(
        dir / "scenario_matrix.csv", "robustness", rep.variant,
        {{"baseline_attacked_sim",
          rep.baseline_attacked_scores.subject_similarity},
         {"attacked_sim", rep.attacked_scores.subject_similarity},
         {"similarity_ratio", rep.similarity_ratio},
         {"verdict", rep.verdict ? 1.0 : 0.0}});
  } else {
    throw UsageError("scenario: unknown name '" + name + "'");
  }
  artifacts.push_back(report_name);
  artifacts.push_back("scenario_matrix.csv");
  return artifacts;
}

std::vector<std::string> stage_report(const ExperimentConfig& cfg,
                                      const fs::path& dir) {
  (void)cfg;
  std::vector<std::string> artifacts;
  std::vector<std::pair<std::string, CsvTable>> tables;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    const std::string stem = entry.path().stem().string();
    if (stem == "metrics" || stem == "scenario_matrix" || stem == "summary")
      continue;
    tables.emplace_back(stem, read_csv(entry.path()));
  }
  std::sort(tables.begin(), tables.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  ExperimentTrace summary;
  summary.set_columns({});  // written by hand below
  std::ofstream sum(dir / "summary.csv");
  sum << "ledger,column,rows,last_value\n";
  for (const auto& [stem, table] : tables) {
    if (table.rows.empty() || table.columns.size() < 2) continue;
    // Downsample long curves for plotting.
    const std::size_t stride = std::max<std::size_t>(1, table.rows.size() / 1000);
    std::vector<double> x;
    for (std::size_t r = 0; r < table.rows.size(); r += stride)
      x.push_back(table.rows[r][0]);
    std::vector<PlotSeries> series;
    for (std::size_t c = 1; c < table.columns.size(); ++c) {
      PlotSeries s;
      s.name = table.columns[c];
      for (std::size_t r = 0; r < table.rows.size(); r += stride)
        s.y.push_back(table.rows[r][c]);
      series.push_back(std::move(s));
      sum << stem << "," << table.columns[c] << "," << table.rows.size() << ","
          << format_double(table.rows.back()[c]) << "\n";
    }
    const std::string svg_name = stem + ".svg";
    write_line_plot(dir / svg_name, stem, x, series);
    artifacts.push_back(svg_name);
  }
  artifacts.push_back("summary.csv");
  return artifacts;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"toy diffusion anti-personalization laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_override, model_path, mode, tag = "eval",
                                                           scenario_name;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")
        ->required();
    sub->add_option("--out", out_override, "override config out_dir");
  };

  CLI::App* c_pretrain = app.add_subcommand("pretrain", "train the base model");
  add_common(c_pretrain);
  CLI::App* c_personalize =
      app.add_subcommand("personalize", "personalize a checkpoint");
  add_common(c_personalize);
  c_personalize->add_option("--model", model_path, "input checkpoint");
  CLI::App* c_protect = app.add_subcommand("protect", "run a protection stage");
  add_common(c_protect);
  c_protect->add_option("--mode", mode, "naive | dpo | l2p")
      ->required()
      ->check(CLI::IsMember({"naive", "dpo", "l2p"}));
  CLI::App* c_attack =
      app.add_subcommand("attack", "personalize against a protected checkpoint");
  add_common(c_attack);
  c_attack->add_option("--model", model_path, "input checkpoint");
  CLI::App* c_eval = app.add_subcommand("eval", "score a checkpoint");
  add_common(c_eval);
  c_eval->add_option("--model", model_path, "checkpoint to score");
  c_eval->add_option("--tag", tag, "metric report tag");
  CLI::App* c_diag =
      app.add_subcommand("diagnose", "gradient diagnostics at a checkpoint");
  add_common(c_diag);
  c_diag->add_option("--model", model_path, "checkpoint to diagnose");
  CLI::App* c_scenario = app.add_subcommand("scenario", "run a named scenario");
  add_common(c_scenario);
  c_scenario->add_option("--name", scenario_name, "scenario id")->required();
  CLI::App* c_report =
      app.add_subcommand("report", "aggregate ledgers into tables and plots");
  add_common(c_report);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const ExperimentConfig cfg = [&] {
      ExperimentConfig c = load_config(config_path);
      if (!out_override.empty()) c.out_dir = out_override;
      return c;
    }();
    const fs::path dir(cfg.out_dir);

    RunLock lock(dir);
    std::vector<std::string> artifacts;
    std::string stage;
    if (app.got_subcommand(c_pretrain)) {
      stage = "pretrain";
      artifacts = stage_pretrain(cfg, dir);
    } else if (app.got_subcommand(c_personalize)) {
      stage = "personalize";
      artifacts = stage_personalize(cfg, dir, model_path, "personalized.ckpt",
                                    "personalize.csv");
    } else if (app.got_subcommand(c_protect)) {
      stage = "protect_" + mode;
      artifacts = stage_protect(cfg, dir, mode);
    } else if (app.got_subcommand(c_attack)) {
      stage = "attack";
      const std::string target = model_path.empty()
                                     ? (dir / "protected_l2p.ckpt").string()
                                     : model_path;
      artifacts =
          stage_personalize(cfg, dir, target, "attacked.ckpt", "attack.csv");
    } else if (app.got_subcommand(c_eval)) {
      stage = "eval_" + tag;
      artifacts = stage_eval(cfg, dir, model_path, tag);
    } else if (app.got_subcommand(c_diag)) {
      stage = "diagnose";
      artifacts = stage_diagnose(cfg, dir, model_path);
    } else if (app.got_subcommand(c_scenario)) {
      stage = "scenario_" + scenario_name;
      artifacts = stage_scenario(cfg, dir, scenario_name);
    } else if (app.got_subcommand(c_report)) {
      stage = "report";
      artifacts = stage_report(cfg, dir);
    }
    update_manifest(dir, cfg, stage, artifacts);
    std::cout << stage << ": wrote " << artifacts.size() << " artifact(s) to "
              << dir.string() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace apdm
