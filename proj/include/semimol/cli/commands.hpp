#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "semimol/cli/config.hpp"
#include "semimol/data/cliffs.hpp"
#include "semimol/data/metrics.hpp"
#include "semimol/data/records.hpp"
#include "semimol/data/task_builder.hpp"
#include "semimol/models/checkpoint.hpp"
#include "semimol/semisup/engine.hpp"

namespace semimol::cli {

namespace fs = std::filesystem;

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
}

inline Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingMetrics("cannot open " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw MissingMetrics(path.string() + " is not valid JSON: " + e.what());
  }
  return j;
}

inline std::string run_log_csv(const std::vector<semisup::EpochRow>& log) {
  std::string out = "epoch,gamma,hybrid_size,loss_f,loss_g,val_metric,test_metric\n";
  for (const auto& r : log) {
    out += std::to_string(r.epoch) + "," + fmt_double(r.gamma) + "," +
           std::to_string(r.hybrid_size) + "," + fmt_double(r.loss_f) + "," +
           fmt_double(r.loss_g) + "," + fmt_double(r.val_metric) + ",";
    if (r.test_metric) out += fmt_double(*r.test_metric);
    out += "\n";
  }
  return out;
}

// wall-clock timings are kept out of the run log so reruns are byte-identical
inline std::string timing_csv(const std::vector<semisup::EpochRow>& log) {
  std::string out = "epoch,wall_ms\n";
  for (const auto& r : log) {
    out += std::to_string(r.epoch) + "," + fmt_double(r.wall_ms) + "\n";
  }
  return out;
}

struct SplitMetrics {
  Json json;  // metric name -> value or null
};

inline Json split_metrics(const ExperimentConfig& cfg,
                          const std::vector<double>& preds,
                          const std::vector<semisup::LabeledExample>& examples) {
  Json j;
  std::vector<double> targets;
  std::vector<bool> flags;
  bool any_flag = false;
  for (const auto& ex : examples) {
    targets.push_back(ex.y);
    flags.push_back(ex.cliff);
    any_flag = any_flag || ex.cliff;
  }
  j["n"] = examples.size();
  j["n_cliff"] = static_cast<int>(std::count(flags.begin(), flags.end(), true));
  if (cfg.task == "classification") {
    std::vector<int> labels;
    std::vector<double> scores = preds;
    for (double y : targets) labels.push_back(y != 0.0 ? 1 : 0);
    for (double& s : scores) s = nd::stable_sigmoid(s);
    j["roc_auc"] = data::roc_auc(scores, labels);
    j["cliff_roc_auc"] =
        any_flag ? Json(data::cliff_roc_auc(scores, labels, flags)) : Json(nullptr);
  } else {
    j["rmse"] = data::rmse(preds, targets);
    j["mae"] = data::mae(preds, targets);
    j["cliff_rmse"] = any_flag ? Json(data::cliff_rmse(preds, targets, flags)) : Json(nullptr);
    j["cliff_mae"] = any_flag ? Json(data::cliff_mae(preds, targets, flags)) : Json(nullptr);
  }
  return j;
}

inline std::vector<double> predictions_for(const models::TargetModel& f,
                                           const semisup::TaskData& data,
                                           const std::vector<semisup::LabeledExample>& set) {
  std::vector<int> mols;
  for (const auto& ex : set) mols.push_back(ex.mol);
  return semisup::predict(f, data.store, mols);
}

}  // namespace detail

struct TrainOutcome {
  fs::path run_dir;
  Json metrics;
};

// Runs the configured strategy and writes the run directory: resolved config
// snapshot, run log, timing sidecar, best checkpoints, metrics JSON, and
// optional per-epoch pseudo-label dumps. On a NonFiniteLoss abort the
// partial log and snapshot are preserved before the error propagates.
inline TrainOutcome cmd_train(ExperimentConfig cfg, const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  detail::write_text_file(out_dir / "config_resolved.json", cfg.to_json().dump(2) + "\n");

  // ingest
  data::LoadReport labeled_report, pool_report;
  data::ColumnMap cols;
  cols.smiles = cfg.smiles_column;
  cols.label = cfg.label_column;
  cols.split = cfg.split_column;
  auto records = data::load_labeled_csv(cfg.data_labeled, cols, &labeled_report);
  if (records.empty()) throw EmptyDataset("no usable records in " + cfg.data_labeled);
  const auto cliffs = data::detect_cliffs(records, cfg.cliff_sim_threshold,
                                          cfg.cliff_potency_threshold,
                                          cfg.fingerprint_radius, cfg.fingerprint_width);
  for (size_t i = 0; i < records.size(); ++i) records[i].cliff_flag = cliffs.flags[i];
  std::vector<data::UnlabeledRecord> pool;
  if (!cfg.data_pool.empty()) pool = data::load_pool(cfg.data_pool, &pool_report);

  const auto task_data = data::build_task_data(
      records, pool, cfg.split_ratios, cfg.seed, cfg.task == "classification",
      cfg.fingerprint_radius, cfg.fingerprint_width);

  semisup::Trainer trainer(cfg.to_trainer_config(), task_data);
  std::optional<semisup::RunResult> result;
  try {
    result = trainer.run();
  } catch (const NonFiniteLoss&) {
    detail::write_text_file(out_dir / "run_log.csv", detail::run_log_csv(trainer.log()));
    detail::write_text_file(out_dir / "timing.csv", detail::timing_csv(trainer.log()));
    throw;
  }

  detail::write_text_file(out_dir / "run_log.csv", detail::run_log_csv(result->log));
  detail::write_text_file(out_dir / "timing.csv", detail::timing_csv(result->log));

  models::save_checkpoint((out_dir / "f.ckpt").string(), result->f.arch_descriptor(),
                          std::as_const(result->f).params());
  if (result->g) {
    models::save_checkpoint((out_dir / "g.ckpt").string(),
                            result->g->arch_descriptor(),
                            std::as_const(*result->g).params());
  }

  if (!result->pseudo_dumps.empty()) {
    fs::create_directories(out_dir / "pseudo");
    for (const auto& [epoch, rows] : result->pseudo_dumps) {
      std::string csv = "sample,y_hat,p,admitted\n";
      for (const auto& r : rows) {
        csv += std::to_string(r.sample) + "," + detail::fmt_double(r.y_hat) + "," +
               detail::fmt_double(r.p) + "," + (r.admitted ? "1" : "0") + "\n";
      }
      detail::write_text_file(out_dir / "pseudo" / ("epoch_" + std::to_string(epoch) + ".csv"),
                              csv);
    }
  }

  Json metrics;
  metrics["strategy"] = cfg.strategy;
  metrics["task"] = cfg.task;
  metrics["seed"] = cfg.seed;
  metrics["best_epoch"] = result->best_epoch;
  metrics["best_val_metric"] = result->best_val;
  metrics["gamma_final"] = result->final_gamma;
  metrics["hybrid_final"] = result->log.empty() ? 0 : result->log.back().hybrid_size;
  {
    const auto val_preds = detail::predictions_for(result->f, task_data, task_data.val);
    metrics["val"] = detail::split_metrics(cfg, val_preds, task_data.val);
  }
  if (!task_data.test.empty()) {
    const auto preds = detail::predictions_for(result->f, task_data, task_data.test);
    const Json test = detail::split_metrics(cfg, preds, task_data.test);
    metrics["test"] = test;
    // top-level convenience keys refer to the test split
    for (const auto& key : {"rmse", "mae", "cliff_rmse", "cliff_mae", "roc_auc",
                            "cliff_roc_auc"}) {
      if (test.contains(key)) metrics[key] = test[key];
    }
  } else {
    metrics["test"] = nullptr;
  }
  metrics["data"] = {{"labeled_rows", labeled_report.total_rows},
                     {"labeled_kept", labeled_report.kept},
                     {"labeled_dropped", labeled_report.dropped()},
                     {"pool_rows", pool_report.total_rows},
                     {"pool_kept", pool_report.kept},
                     {"pool_dropped", pool_report.dropped()},
                     {"cliff_pairs", cliffs.pairs.size()},
                     {"cliff_flagged", cliffs.flagged_count},
                     {"n_train", task_data.train.size()},
                     {"n_val", task_data.val.size()},
                     {"n_test", task_data.test.size()},
                     {"n_pool", task_data.pool.size()}};
  detail::write_text_file(out_dir / "metrics.json", metrics.dump(2) + "\n");
  return {out_dir, metrics};
}

// Comparison table over completed runs: one row per run plus per-strategy
// medians. Returns the CSV text (also printed as an aligned table).
inline std::string cmd_compare(const std::vector<fs::path>& run_dirs,
                               std::ostream& out = std::cout) {
  if (run_dirs.size() < 2) {
    throw MissingMetrics("compare needs at least two run directories");
  }
  struct Row {
    std::string strategy;
    uint64_t seed;
    double overall;
    std::optional<double> cliff;
  };
  std::vector<Row> rows;
  std::string task;
  std::string overall_name, cliff_name;
  for (const auto& dir : run_dirs) {
    const Json m = detail::read_json_file(dir / "metrics.json");
    if (!m.contains("strategy") || !m.contains("task")) {
      throw MissingMetrics(dir.string() + ": metrics.json lacks run fields");
    }
    const std::string t = m["task"].get<std::string>();
    if (task.empty()) {
      task = t;
      overall_name = task == "classification" ? "roc_auc" : "rmse";
      cliff_name = task == "classification" ? "cliff_roc_auc" : "cliff_rmse";
    } else if (t != task) {
      throw MissingMetrics("mixed task types across runs: " + task + " vs " + t);
    }
    const Json& source = m.contains("rmse") || m.contains("roc_auc")
                             ? m
                             : m["val"];  // runs without a test split
    if (!source.contains(overall_name)) {
      throw MissingMetrics(dir.string() + ": no " + overall_name + " metric");
    }
    Row r;
    r.strategy = m["strategy"].get<std::string>();
    r.seed = m["seed"].get<uint64_t>();
    r.overall = source[overall_name].get<double>();
    if (source.contains(cliff_name) && !source[cliff_name].is_null()) {
      r.cliff = source[cliff_name].get<double>();
    }
    rows.push_back(r);
  }

  std::string csv = "strategy,seed,overall_" + overall_name + "," + cliff_name + "\n";
  out << "strategy           seed  " << overall_name << "      " << cliff_name << "\n";
  for (const auto& r : rows) {
    csv += r.strategy + "," + std::to_string(r.seed) + "," +
           detail::fmt_double(r.overall) + ",";
    if (r.cliff) csv += detail::fmt_double(*r.cliff);
    csv += "\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-18s %5llu  %-10.6g %-10.6g", r.strategy.c_str(),
                  static_cast<unsigned long long>(r.seed), r.overall,
                  r.cliff ? *r.cliff : std::nan(""));
    out << line << "\n";
  }

  // per-strategy medians
  std::map<std::string, std::vector<double>> overall_by, cliff_by;
  for (const auto& r : rows) {
    overall_by[r.strategy].push_back(r.overall);
    if (r.cliff) cliff_by[r.strategy].push_back(*r.cliff);
  }
  out << "-- medians --\n";
  csv += "# medians\n";
  for (const auto& [strat, vals] : overall_by) {
    const double med = data::median(vals);
    std::optional<double> cmed;
    if (cliff_by.count(strat)) cmed = data::median(cliff_by[strat]);
    csv += "median_" + strat + "," + detail::fmt_double(med) + ",";
    if (cmed) csv += detail::fmt_double(*cmed);
    csv += "\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-18s median %-10.6g %-10.6g", strat.c_str(), med,
                  cmed ? *cmed : std::nan(""));
    out << line << "\n";
  }
  return csv;
}

// Cliff-pair report over a labeled CSV. Writes pairs CSV and prints a
// summary with the thresholds echoed.
inline data::CliffResult cmd_cliffs(const std::string& labeled_csv, double sim_threshold,
                                    double potency_threshold, const fs::path& out_csv,
                                    const data::ColumnMap& cols = {},
                                    std::ostream& out = std::cout) {
  data::LoadReport rep;
  const auto records = data::load_labeled_csv(labeled_csv, cols, &rep);
  const auto res = data::detect_cliffs(records, sim_threshold, potency_threshold);
  std::string csv = "i,j,similarity,delta_potency\n";
  for (const auto& p : res.pairs) {
    csv += std::to_string(p.i) + "," + std::to_string(p.j) + "," +
           detail::fmt_double(p.similarity) + "," + detail::fmt_double(p.delta_potency) +
           "\n";
  }
  detail::write_text_file(out_csv, csv);
  out << "cliff report: sim_threshold=" << detail::fmt_double(sim_threshold)
      << " potency_threshold=" << detail::fmt_double(potency_threshold) << "\n"
      << "records=" << records.size() << " (dropped " << rep.dropped() << ")"
      << " pairs=" << res.pairs.size() << " flagged_molecules=" << res.flagged_count
      << "\n"
      << "wrote " << out_csv.string() << "\n";
  return res;
}

// Per-sample dump of the pseudo pool at one epoch of a completed run.
inline std::string cmd_pseudo_inspect(const fs::path& run_dir, int epoch,
                                      std::ostream& out = std::cout) {
  const auto path = run_dir / "pseudo" / ("epoch_" + std::to_string(epoch) + ".csv");
  std::ifstream in(path);
  if (!in) {
    throw EpochNotDumped("no pseudo dump for epoch " + std::to_string(epoch) +
                         " in " + run_dir.string() +
                         " (train with dump_pseudo=true)");
  }
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  out << content;
  return content;
}

}  // namespace semimol::cli
