// Command-line front end: train models, compare runs, report activity
// cliffs, inspect pseudo-label state, and run the built-in selftest.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric abort.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semimol/cli/commands.hpp"
#include "semimol/cli/config.hpp"
#include "semimol/cli/selftest.hpp"
#include "semimol/errors.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

using semimol::cli::ExperimentConfig;
namespace fs = std::filesystem;

fs::path default_run_dir(const ExperimentConfig& cfg) {
  const char* root_env = std::getenv("SEMIMOL_RUN_ROOT");
  const fs::path root = root_env && *root_env ? fs::path(root_env) : fs::path("runs");
  char hash8[16];
  std::snprintf(hash8, sizeof(hash8), "%08llx",
                static_cast<unsigned long long>(
                    semimol::nd::detail::fnv1a64(cfg.to_json().dump()) & 0xffffffffull));
  return root / (cfg.strategy + "-seed" + std::to_string(cfg.seed) + "-" + hash8);
}

int run_train(const std::string& config_path, const std::vector<std::string>& overrides,
              std::string out_dir) {
  ExperimentConfig cfg = ExperimentConfig::load(config_path);
  cfg.apply_overrides(overrides);
  cfg.validate();
  fs::path dir = out_dir.empty() ? default_run_dir(cfg) : fs::path(out_dir);
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    throw semimol::ConfigError("run directory already exists and is not empty: " +
                               dir.string());
  }
  const auto outcome = semimol::cli::cmd_train(cfg, dir);
  std::cout << "run complete: " << outcome.run_dir.string() << "\n";
  const auto& m = outcome.metrics;
  if (m.contains("rmse")) {
    std::cout << "test rmse " << m["rmse"] << ", cliff rmse " << m["cliff_rmse"]
              << "\n";
  } else if (m.contains("roc_auc")) {
    std::cout << "test roc_auc " << m["roc_auc"] << ", cliff roc_auc "
              << m["cliff_roc_auc"] << "\n";
  }
  std::cout << "gamma_final " << m["gamma_final"] << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-supervised molecular property training engine"};
  app.require_subcommand(1);

  // train
  std::string config_path, train_out;
  std::vector<std::string> overrides;
  auto* train = app.add_subcommand("train", "train a model per a config file");
  train->add_option("-c,--config", config_path, "experiment config JSON")->required();
  train->add_option("-s,--set", overrides, "override config keys (key=value)");
  train->add_option("-o,--out", train_out,
                    "run directory (default: $SEMIMOL_RUN_ROOT/<derived name>)");

  // compare
  std::vector<std::string> run_dirs;
  std::string compare_csv = "compare.csv";
  auto* compare = app.add_subcommand("compare", "tabulate metrics across runs");
  compare->add_option("dirs", run_dirs, "run directories")->expected(-1);
  compare->add_option("--csv", compare_csv, "comparison CSV output path");

  // cliffs
  std::string cliffs_data, cliffs_out = "cliff_pairs.csv";
  double sim_thr = 0.9, pot_thr = 1.0;
  std::string col_smiles = "smiles", col_label = "label";
  auto* cliffs = app.add_subcommand("cliffs", "detect activity-cliff pairs in a dataset");
  cliffs->add_option("-d,--data", cliffs_data, "labeled CSV")->required();
  cliffs->add_option("--sim", sim_thr, "similarity threshold (default 0.9)");
  cliffs->add_option("--potency", pot_thr, "potency gap threshold (default 1.0)");
  cliffs->add_option("-o,--out", cliffs_out, "pair report CSV path");
  cliffs->add_option("--smiles-column", col_smiles, "SMILES column name");
  cliffs->add_option("--label-column", col_label, "label column name");

  // pseudo-inspect
  std::string inspect_dir;
  int inspect_epoch = 0;
  auto* inspect =
      app.add_subcommand("pseudo-inspect", "dump pseudo-label state at an epoch");
  inspect->add_option("-r,--run", inspect_dir, "run directory")->required();
  inspect->add_option("-e,--epoch", inspect_epoch, "epoch to dump")->required();

  // selftest
  auto* selftest = app.add_subcommand("selftest", "run the built-in invariant suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(config_path, overrides, train_out);
    if (*compare) {
      std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
      const std::string csv = semimol::cli::cmd_compare(dirs);
      std::ofstream out(compare_csv, std::ios::binary);
      if (!out) throw semimol::IoError("cannot write " + compare_csv);
      out << csv;
      std::cout << "wrote " << compare_csv << "\n";
      return kExitOk;
    }
    if (*cliffs) {
      semimol::data::ColumnMap cols;
      cols.smiles = col_smiles;
      cols.label = col_label;
      semimol::cli::cmd_cliffs(cliffs_data, sim_thr, pot_thr, cliffs_out, cols);
      return kExitOk;
    }
    if (*inspect) {
      semimol::cli::cmd_pseudo_inspect(inspect_dir, inspect_epoch);
      return kExitOk;
    }
    if (*selftest) return semimol::cli::run_selftest() ? kExitOk : 1;
  } catch (const semimol::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const semimol::InvalidSpec& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const semimol::NonFiniteLoss& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const semimol::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
