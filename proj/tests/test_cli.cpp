#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "semimol/cli/commands.hpp"
#include "semimol/cli/config.hpp"
#include "semimol/cli/selftest.hpp"

using namespace semimol;
using namespace semimol::cli;

namespace {

namespace fs = std::filesystem;

const std::string kFixtureCsv =
    std::string(SEMIMOL_SOURCE_DIR) + "/data/fixtures/tiny_labeled.csv";
const std::string kFixturePool =
    std::string(SEMIMOL_SOURCE_DIR) + "/data/fixtures/tiny_pool.smi";

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "semimol_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig fixture_config(uint64_t seed) {
  ExperimentConfig cfg;
  cfg.data_labeled = kFixtureCsv;
  cfg.data_pool = kFixturePool;
  cfg.seed = seed;
  cfg.epochs = 2;
  cfg.warmup_epochs_f = 2;
  cfg.warmup_epochs_g = 2;
  cfg.batch_size = 16;
  cfg.lr = 3e-3;
  cfg.hidden_dim = 8;
  cfg.num_layers = 2;
  cfg.fingerprint_width = 256;
  cfg.instructor_embed_dim = 8;
  cfg.instructor_fusion_hidden = 8;
  cfg.split_ratios = {0.7, 0.15, 0.15};
  cfg.cliff_sim_threshold = 0.7;
  return cfg;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("config round trip and overrides") {
  ExperimentConfig cfg = fixture_config(7);
  const Json j = cfg.to_json();
  const ExperimentConfig back = ExperimentConfig::from_json(j);
  CHECK(back.to_json() == j);

  ExperimentConfig o = cfg;
  o.apply_overrides({"gamma=0.8", "strategy=supervised", "epochs=5"});
  CHECK(o.gamma == 0.8);
  CHECK(o.strategy == "supervised");
  CHECK(o.epochs == 5);
  CHECK_THROWS_AS(o.apply_overrides({"nonsense_key=1"}), ConfigError);
  CHECK_THROWS_AS(o.apply_overrides({"no_equals_sign"}), ConfigError);
}

TEST_CASE("config validation reports field paths") {
  auto check_field = [](void (*mut)(ExperimentConfig&), const std::string& field) {
    ExperimentConfig cfg;
    cfg.data_labeled = "x.csv";
    mut(cfg);
    try {
      cfg.validate();
      FAIL("expected ConfigError for " + field);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(field) == 0);
    }
  };
  check_field([](ExperimentConfig& c) { c.gamma = 1.5; }, "gamma");
  check_field([](ExperimentConfig& c) { c.delta_gamma = 0.0; }, "delta_gamma");
  check_field([](ExperimentConfig& c) { c.k = 0; }, "k");
  check_field([](ExperimentConfig& c) { c.epochs = 0; }, "epochs");
  check_field([](ExperimentConfig& c) { c.strategy = "bogus"; }, "strategy");
  check_field([](ExperimentConfig& c) { c.split_ratios = {0.5, 0.5, 0.5}; },
              "split_ratios");
  check_field([](ExperimentConfig& c) { c.fingerprint_width = 100; },
              "fingerprint_width");
  check_field([](ExperimentConfig& c) { c.metric = "roc_auc"; }, "metric");
}

TEST_CASE("cmd_train supervised writes a complete run directory") {
  auto cfg = fixture_config(11);
  cfg.strategy = "supervised";
  const auto dir = fresh_dir("sup");
  const auto outcome = cmd_train(cfg, dir);

  CHECK(fs::exists(dir / "config_resolved.json"));
  CHECK(fs::exists(dir / "run_log.csv"));
  CHECK(fs::exists(dir / "timing.csv"));
  CHECK(fs::exists(dir / "metrics.json"));
  CHECK(fs::exists(dir / "f.ckpt"));
  CHECK_FALSE(fs::exists(dir / "g.ckpt"));  // no instructor in supervised runs

  const std::string log = slurp(dir / "run_log.csv");
  CHECK(count_lines(log) == 1 + cfg.epochs);  // header + one row per epoch
  CHECK(log.rfind("epoch,gamma,hybrid_size,loss_f,loss_g,val_metric,test_metric\n",
                  0) == 0);

  CHECK(outcome.metrics.contains("rmse"));
  CHECK(outcome.metrics.contains("cliff_rmse"));
  CHECK(outcome.metrics.contains("gamma_final"));
  CHECK(outcome.metrics["strategy"] == "supervised");
}

TEST_CASE("cmd_train is byte-deterministic given config and seed") {
  auto cfg = fixture_config(13);
  cfg.strategy = "semimol";
  const auto d1 = fresh_dir("det1");
  const auto d2 = fresh_dir("det2");
  cmd_train(cfg, d1);
  cmd_train(cfg, d2);
  CHECK(slurp(d1 / "run_log.csv") == slurp(d2 / "run_log.csv"));
  CHECK(slurp(d1 / "metrics.json") == slurp(d2 / "metrics.json"));
  CHECK(slurp(d1 / "f.ckpt") == slurp(d2 / "f.ckpt"));
  CHECK(slurp(d1 / "g.ckpt") == slurp(d2 / "g.ckpt"));
}

TEST_CASE("run directories are self-describing") {
  auto cfg = fixture_config(17);
  cfg.strategy = "fixed_threshold";
  const auto d1 = fresh_dir("self1");
  cmd_train(cfg, d1);

  // reload the snapshot and rerun: metrics must reproduce bit-exactly
  const auto reloaded = ExperimentConfig::load((d1 / "config_resolved.json").string());
  const auto d2 = fresh_dir("self2");
  cmd_train(reloaded, d2);
  CHECK(slurp(d1 / "metrics.json") == slurp(d2 / "metrics.json"));
  CHECK(slurp(d1 / "run_log.csv") == slurp(d2 / "run_log.csv"));
}

TEST_CASE("cmd_train semimol produces the expected metric keys and dumps") {
  auto cfg = fixture_config(19);
  cfg.strategy = "semimol";
  cfg.dump_pseudo = true;
  const auto dir = fresh_dir("smol");
  const auto outcome = cmd_train(cfg, dir);
  CHECK(outcome.metrics.contains("rmse"));
  CHECK(outcome.metrics.contains("cliff_rmse"));
  CHECK(outcome.metrics.contains("gamma_final"));
  CHECK(fs::exists(dir / "g.ckpt"));

  // pseudo dump: one row per pool molecule, admitted flag consistent with
  // the logged gamma of that epoch
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::stringstream sink;
    const std::string dump = cmd_pseudo_inspect(dir, epoch, sink);
    const int rows = count_lines(dump) - 1;
    CHECK(rows == outcome.metrics["data"]["n_pool"].get<int>());
  }
  std::stringstream sink;
  CHECK_THROWS_AS(cmd_pseudo_inspect(dir, 99, sink), EpochNotDumped);

  // admitted flag replays p >= gamma from the dump itself
  const std::string dump = cmd_pseudo_inspect(dir, 0, sink);
  const std::string log = slurp(dir / "run_log.csv");
  std::stringstream ls(log);
  std::string line;
  std::getline(ls, line);           // header
  std::getline(ls, line);           // epoch 0
  const auto c1 = line.find(',');
  const auto c2 = line.find(',', c1 + 1);
  const double gamma0 = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
  std::stringstream ds(dump);
  std::getline(ds, line);  // header
  while (std::getline(ds, line)) {
    std::vector<std::string> f;
    std::stringstream fs_(line);
    std::string tok;
    while (std::getline(fs_, tok, ',')) f.push_back(tok);
    REQUIRE(f.size() == 4);
    const double p = std::stod(f[2]);
    const bool admitted = f[3] == "1";
    CHECK(admitted == (p >= gamma0));
  }
}

TEST_CASE("cmd_train aborts with partial log on numeric blowup") {
  auto cfg = fixture_config(23);
  cfg.strategy = "supervised";
  cfg.lr = 1e100;
  cfg.warmup_epochs_f = 0;
  cfg.epochs = 4;
  const auto dir = fresh_dir("blowup");
  CHECK_THROWS_AS(cmd_train(cfg, dir), NonFiniteLoss);
  CHECK(fs::exists(dir / "run_log.csv"));  // partial log preserved
  CHECK(fs::exists(dir / "config_resolved.json"));
}

TEST_CASE("cmd_compare tabulates runs and guards against mixed tasks") {
  auto cfg = fixture_config(29);
  cfg.strategy = "supervised";
  const auto d1 = fresh_dir("cmp1");
  cmd_train(cfg, d1);
  cfg.strategy = "semimol";
  cfg.seed = 31;
  const auto d2 = fresh_dir("cmp2");
  cmd_train(cfg, d2);

  std::stringstream out;
  const std::string csv = cmd_compare({d1, d2}, out);
  CHECK(csv.find("supervised,29,") != std::string::npos);
  CHECK(csv.find("semimol,31,") != std::string::npos);
  CHECK(csv.find("median_supervised,") != std::string::npos);
  CHECK(csv.find("median_semimol,") != std::string::npos);
  CHECK(out.str().find("medians") != std::string::npos);

  std::stringstream sink;
  CHECK_THROWS_AS(cmd_compare({d1}, sink), MissingMetrics);
  CHECK_THROWS_AS(cmd_compare({d1, fresh_dir("empty")}, sink), MissingMetrics);

  // fake a classification run to trip the mixed-task guard
  const auto d3 = fresh_dir("cmp3");
  Json fake;
  fake["strategy"] = "supervised";
  fake["task"] = "classification";
  fake["seed"] = 1;
  fake["roc_auc"] = 0.9;
  std::ofstream(d3 / "metrics.json") << fake.dump(2);
  CHECK_THROWS_AS(cmd_compare({d1, d3}, sink), MissingMetrics);
}

TEST_CASE("cmd_cliffs writes the pair report and echoes thresholds") {
  const auto dir = fresh_dir("cliffs");
  const auto out_csv = dir / "pairs.csv";
  std::stringstream out;
  const auto res = cmd_cliffs(kFixtureCsv, 0.7, 0.5, out_csv, {}, out);

  const auto oracle =
      data::detect_cliffs(data::load_labeled_csv(kFixtureCsv, {}), 0.7, 0.5);
  CHECK(res.pairs.size() == oracle.pairs.size());
  const std::string csv = slurp(out_csv);
  CHECK(count_lines(csv) == 1 + static_cast<int>(oracle.pairs.size()));
  CHECK(out.str().find("sim_threshold=0.7") != std::string::npos);
  CHECK(out.str().find("potency_threshold=0.5") != std::string::npos);

  // all-equal labels produce zero pairs
  const auto eq_dir = fresh_dir("cliffs_eq");
  std::ofstream(eq_dir / "eq.csv") << "smiles,label\nCCO,1\nCCN,1\nCCC,1\n";
  std::stringstream out2;
  const auto res2 = cmd_cliffs((eq_dir / "eq.csv").string(), 0.9, 1.0,
                               eq_dir / "pairs.csv", {}, out2);
  CHECK(res2.pairs.empty());
}

TEST_CASE("classification mode end to end") {
  // binarized fixture: class = amide count > 0
  const auto dir = fresh_dir("clf");
  const auto src = data::load_labeled_csv(kFixtureCsv, {});
  std::ofstream csv(dir / "clf.csv");
  csv << "smiles,label\n";
  for (const auto& r : src) csv << r.smiles << "," << (r.y > 0.5 ? 1 : 0) << "\n";
  csv.close();

  auto cfg = fixture_config(37);
  cfg.task = "classification";
  cfg.metric = "roc_auc";
  cfg.data_labeled = (dir / "clf.csv").string();
  cfg.strategy = "semimol";
  const auto outcome = cmd_train(cfg, dir / "run");
  CHECK(outcome.metrics.contains("roc_auc"));
  CHECK(outcome.metrics["roc_auc"].get<double>() >= 0.0);
  CHECK(outcome.metrics["roc_auc"].get<double>() <= 1.0);
}

TEST_CASE("selftest passes") {
  std::stringstream out;
  CHECK(run_selftest(out));
  CHECK(out.str().find("FAIL") == std::string::npos);
}
