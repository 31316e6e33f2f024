#pragma once

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semimol/errors.hpp"
#include "semimol/semisup/engine.hpp"

namespace semimol::cli {

using Json = nlohmann::ordered_json;

// Resolved experiment description. Serializes to a flat JSON object whose
// snapshot reloads to an identical config; every run directory carries one.
struct ExperimentConfig {
  std::string task = "regression";        // regression | classification
  std::string strategy = "semimol";       // semimol | supervised | pi_model |
                                          // fixed_threshold | percentile
  std::string backbone = "gin";           // gin | fingerprint_mlp
  std::string metric = "rmse";            // rmse | mae | roc_auc
  std::string hf_loss = "mse";            // mse | rmse | mae (regression H_f)

  std::string data_labeled;               // labeled CSV path
  std::string data_pool;                  // unlabeled pool path ("" = none)
  std::string smiles_column = "smiles";
  std::string label_column = "label";
  std::string split_column = "split";
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};

  double lr = 1e-4;
  int batch_size = 32;
  int epochs = 100;
  double dropout = 0.2;
  double lambda = 1.0;
  double gamma = 0.9;
  double delta_gamma = 0.05;
  int k = 5;
  int pool_cap = 5000;
  int warmup_epochs_f = 20;
  int warmup_epochs_g = 10;
  double consistency_weight = 1.0;

  int hidden_dim = 64;
  int num_layers = 3;
  int fc_layers = 2;
  std::string pooling = "attention";      // sum | mean | attention
  int fingerprint_radius = 2;
  int fingerprint_width = 1024;
  std::string instructor_encoder = "fingerprint_mlp";  // fingerprint_mlp | gin
  int instructor_embed_dim = 32;
  int instructor_fusion_hidden = 32;
  int instructor_fusion_layers = 2;

  double cliff_sim_threshold = 0.9;
  double cliff_potency_threshold = 1.0;

  uint64_t seed = 0;
  bool dump_pseudo = false;
  bool log_test_metric = true;

  Json to_json() const {
    Json j;
    j["task"] = task;
    j["strategy"] = strategy;
    j["backbone"] = backbone;
    j["metric"] = metric;
    j["hf_loss"] = hf_loss;
    j["data_labeled"] = data_labeled;
    j["data_pool"] = data_pool;
    j["smiles_column"] = smiles_column;
    j["label_column"] = label_column;
    j["split_column"] = split_column;
    j["split_ratios"] = split_ratios;
    j["lr"] = lr;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["dropout"] = dropout;
    j["lambda"] = lambda;
    j["gamma"] = gamma;
    j["delta_gamma"] = delta_gamma;
    j["k"] = k;
    j["pool_cap"] = pool_cap;
    j["warmup_epochs_f"] = warmup_epochs_f;
    j["warmup_epochs_g"] = warmup_epochs_g;
    j["consistency_weight"] = consistency_weight;
    j["hidden_dim"] = hidden_dim;
    j["num_layers"] = num_layers;
    j["fc_layers"] = fc_layers;
    j["pooling"] = pooling;
    j["fingerprint_radius"] = fingerprint_radius;
    j["fingerprint_width"] = fingerprint_width;
    j["instructor_encoder"] = instructor_encoder;
    j["instructor_embed_dim"] = instructor_embed_dim;
    j["instructor_fusion_hidden"] = instructor_fusion_hidden;
    j["instructor_fusion_layers"] = instructor_fusion_layers;
    j["cliff_sim_threshold"] = cliff_sim_threshold;
    j["cliff_potency_threshold"] = cliff_potency_threshold;
    j["seed"] = seed;
    j["dump_pseudo"] = dump_pseudo;
    j["log_test_metric"] = log_test_metric;
    return j;
  }

  static ExperimentConfig from_json(const Json& j) {
    ExperimentConfig c;
    for (const auto& [key, value] : j.items()) {
      try {
        if (key == "task") c.task = value.get<std::string>();
        else if (key == "strategy") c.strategy = value.get<std::string>();
        else if (key == "backbone") c.backbone = value.get<std::string>();
        else if (key == "metric") c.metric = value.get<std::string>();
        else if (key == "hf_loss") c.hf_loss = value.get<std::string>();
        else if (key == "data_labeled") c.data_labeled = value.get<std::string>();
        else if (key == "data_pool") c.data_pool = value.get<std::string>();
        else if (key == "smiles_column") c.smiles_column = value.get<std::string>();
        else if (key == "label_column") c.label_column = value.get<std::string>();
        else if (key == "split_column") c.split_column = value.get<std::string>();
        else if (key == "split_ratios") c.split_ratios = value.get<std::array<double, 3>>();
        else if (key == "lr") c.lr = value.get<double>();
        else if (key == "batch_size") c.batch_size = value.get<int>();
        else if (key == "epochs") c.epochs = value.get<int>();
        else if (key == "dropout") c.dropout = value.get<double>();
        else if (key == "lambda") c.lambda = value.get<double>();
        else if (key == "gamma") c.gamma = value.get<double>();
        else if (key == "delta_gamma") c.delta_gamma = value.get<double>();
        else if (key == "k") c.k = value.get<int>();
        else if (key == "pool_cap") c.pool_cap = value.get<int>();
        else if (key == "warmup_epochs_f") c.warmup_epochs_f = value.get<int>();
        else if (key == "warmup_epochs_g") c.warmup_epochs_g = value.get<int>();
        else if (key == "consistency_weight") c.consistency_weight = value.get<double>();
        else if (key == "hidden_dim") c.hidden_dim = value.get<int>();
        else if (key == "num_layers") c.num_layers = value.get<int>();
        else if (key == "fc_layers") c.fc_layers = value.get<int>();
        else if (key == "pooling") c.pooling = value.get<std::string>();
        else if (key == "fingerprint_radius") c.fingerprint_radius = value.get<int>();
        else if (key == "fingerprint_width") c.fingerprint_width = value.get<int>();
        else if (key == "instructor_encoder") c.instructor_encoder = value.get<std::string>();
        else if (key == "instructor_embed_dim") c.instructor_embed_dim = value.get<int>();
        else if (key == "instructor_fusion_hidden") c.instructor_fusion_hidden = value.get<int>();
        else if (key == "instructor_fusion_layers") c.instructor_fusion_layers = value.get<int>();
        else if (key == "cliff_sim_threshold") c.cliff_sim_threshold = value.get<double>();
        else if (key == "cliff_potency_threshold") c.cliff_potency_threshold = value.get<double>();
        else if (key == "seed") c.seed = value.get<uint64_t>();
        else if (key == "dump_pseudo") c.dump_pseudo = value.get<bool>();
        else if (key == "log_test_metric") c.log_test_metric = value.get<bool>();
        else throw ConfigError(key + ": unknown config key");
      } catch (const Json::exception&) {
        throw ConfigError(key + ": wrong value type");
      }
    }
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    Json j;
    try {
      in >> j;
    } catch (const Json::exception& e) {
      throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    return from_json(j);
  }

  // key=value overrides; values parse as JSON when possible, else as strings
  void apply_overrides(const std::vector<std::string>& overrides) {
    Json j = to_json();
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("override must look like key=value: " + kv);
      }
      const std::string key = kv.substr(0, eq);
      const std::string raw = kv.substr(eq + 1);
      if (!j.contains(key)) throw ConfigError(key + ": unknown config key");
      Json parsed = Json::parse(raw, nullptr, false);
      if (parsed.is_discarded()) parsed = raw;  // plain string value
      j[key] = parsed;
    }
    *this = from_json(j);
  }

  void validate() const {
    auto fail = [](const std::string& field, const std::string& msg) {
      throw ConfigError(field + ": " + msg);
    };
    auto one_of = [&](const std::string& field, const std::string& v,
                      std::initializer_list<const char*> allowed) {
      for (const char* a : allowed) {
        if (v == a) return;
      }
      std::string msg = "must be one of {";
      bool first = true;
      for (const char* a : allowed) {
        if (!first) msg += ", ";
        msg += a;
        first = false;
      }
      fail(field, msg + "}, got '" + v + "'");
    };
    one_of("task", task, {"regression", "classification"});
    one_of("strategy", strategy,
           {"semimol", "supervised", "pi_model", "fixed_threshold", "percentile"});
    one_of("backbone", backbone, {"gin", "fingerprint_mlp"});
    one_of("metric", metric, {"rmse", "mae", "roc_auc"});
    one_of("hf_loss", hf_loss, {"mse", "rmse", "mae"});
    one_of("pooling", pooling, {"sum", "mean", "attention"});
    one_of("instructor_encoder", instructor_encoder, {"fingerprint_mlp", "gin"});
    if (task == "classification" && metric != "roc_auc") {
      fail("metric", "classification runs report roc_auc");
    }
    if (task == "regression" && metric == "roc_auc") {
      fail("metric", "roc_auc needs a classification task");
    }
    if (gamma < 0.0 || gamma > 1.0) fail("gamma", "must be in [0, 1]");
    if (delta_gamma <= 0.0 || delta_gamma >= 1.0) fail("delta_gamma", "must be in (0, 1)");
    if (k < 1) fail("k", "must be >= 1");
    if (epochs < 1) fail("epochs", "must be >= 1");
    if (batch_size < 1) fail("batch_size", "must be >= 1");
    if (lr <= 0.0) fail("lr", "must be > 0");
    if (dropout < 0.0 || dropout >= 1.0) fail("dropout", "must be in [0, 1)");
    if (lambda < 0.0) fail("lambda", "must be >= 0");
    if (pool_cap < 0) fail("pool_cap", "must be >= 0");
    if (warmup_epochs_f < 0) fail("warmup_epochs_f", "must be >= 0");
    if (warmup_epochs_g < 0) fail("warmup_epochs_g", "must be >= 0");
    if (hidden_dim < 1) fail("hidden_dim", "must be >= 1");
    if (num_layers < 1) fail("num_layers", "must be >= 1");
    if (fc_layers < 1) fail("fc_layers", "must be >= 1");
    if (instructor_embed_dim < 1) fail("instructor_embed_dim", "must be >= 1");
    if (fingerprint_radius < 0) fail("fingerprint_radius", "must be >= 0");
    if (fingerprint_width < 64 || (fingerprint_width & (fingerprint_width - 1)) != 0) {
      fail("fingerprint_width", "must be a power of two >= 64");
    }
    const double rsum = split_ratios[0] + split_ratios[1] + split_ratios[2];
    if (std::fabs(rsum - 1.0) > 1e-9) fail("split_ratios", "must sum to 1");
    if (data_labeled.empty()) fail("data_labeled", "required");
    if (cliff_sim_threshold <= 0.0 || cliff_sim_threshold > 1.0) {
      fail("cliff_sim_threshold", "must be in (0, 1]");
    }
    if (cliff_potency_threshold <= 0.0) fail("cliff_potency_threshold", "must be > 0");
  }

  semisup::TrainerConfig to_trainer_config() const {
    semisup::TrainerConfig t;
    if (strategy == "semimol") t.strategy = semisup::Strategy::Semimol;
    else if (strategy == "supervised") t.strategy = semisup::Strategy::Supervised;
    else if (strategy == "pi_model") t.strategy = semisup::Strategy::PiModel;
    else if (strategy == "fixed_threshold") t.strategy = semisup::Strategy::FixedThreshold;
    else t.strategy = semisup::Strategy::Percentile;
    t.task = task == "classification" ? semisup::Task::Classification
                                      : semisup::Task::Regression;
    t.hf = hf_loss == "rmse"  ? semisup::HfKind::Rmse
           : hf_loss == "mae" ? semisup::HfKind::Mae
                              : semisup::HfKind::Mse;
    t.metric = metric == "roc_auc" ? semisup::Metric::RocAuc
               : metric == "mae"   ? semisup::Metric::Mae
                                   : semisup::Metric::Rmse;
    t.lr = lr;
    t.batch_size = batch_size;
    t.epochs = epochs;
    t.lambda = lambda;
    t.gamma = gamma;
    t.delta_gamma = delta_gamma;
    t.k = k;
    t.pool_cap = pool_cap;
    t.warmup_epochs_f = warmup_epochs_f;
    t.warmup_epochs_g = warmup_epochs_g;
    t.consistency_weight = consistency_weight;
    t.seed = seed;
    t.dump_pseudo = dump_pseudo;
    t.log_test_metric = log_test_metric;

    t.backbone_gin = backbone == "gin";
    t.gin.hidden = hidden_dim;
    t.gin.layers = num_layers;
    t.gin.fc_layers = fc_layers;
    t.gin.dropout = dropout;
    t.gin.pooling = pooling == "sum"    ? models::Pooling::Sum
                    : pooling == "mean" ? models::Pooling::Mean
                                        : models::Pooling::Attention;
    t.fp_mlp.width = fingerprint_width;
    t.fp_mlp.hidden = hidden_dim;
    t.fp_mlp.fc_layers = fc_layers;
    t.fp_mlp.dropout = dropout;

    t.instructor.encoder = instructor_encoder == "gin"
                               ? models::InstructorEncoder::Gin
                               : models::InstructorEncoder::FingerprintMlp;
    t.instructor.fp_width = fingerprint_width;
    t.instructor.embed_dim = instructor_embed_dim;
    t.instructor.fusion_hidden = instructor_fusion_hidden;
    t.instructor.fusion_layers = instructor_fusion_layers;
    t.instructor.gin = t.gin;  // shared architecture, independent parameters
    t.instructor.gin.dropout = 0.0;
    return t;
  }
};

}  // namespace semimol::cli
