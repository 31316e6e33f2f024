#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semimol/data/metrics.hpp"
#include "semimol/errors.hpp"
#include "semimol/models/instructor.hpp"
#include "semimol/models/target.hpp"
#include "semimol/nd/adam.hpp"
#include "semimol/semisup/curriculum.hpp"
#include "semimol/semisup/sets.hpp"

namespace semimol::semisup {

enum class Strategy { Semimol, Supervised, PiModel, FixedThreshold, Percentile };
enum class Task { Regression, Classification };
enum class HfKind { Mse, Rmse, Mae };
enum class Metric { Rmse, Mae, RocAuc };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Semimol: return "semimol";
    case Strategy::Supervised: return "supervised";
    case Strategy::PiModel: return "pi_model";
    case Strategy::FixedThreshold: return "fixed_threshold";
    case Strategy::Percentile: return "percentile";
  }
  return "?";
}

inline bool metric_lower_is_better(Metric m) { return m != Metric::RocAuc; }

// Parsed molecules with cached features and fingerprints, shared by every
// consumer of a run. Indexing is stable; featurization cost is paid once.
class MoleculeStore {
 public:
  struct Entry {
    std::string smiles;
    chem::MolecularGraph graph;
    chem::FeatureMatrices feats;
    chem::Fingerprint fp;
  };

  explicit MoleculeStore(int fp_radius = 2, int fp_width = 1024)
      : fp_radius_(fp_radius), fp_width_(fp_width) {}

  int add(const std::string& smiles) {
    Entry e;
    e.smiles = smiles;
    e.graph = chem::parse_smiles(smiles);
    e.feats = chem::featurize(e.graph);
    e.fp = chem::morgan_fingerprint(e.graph, fp_radius_, fp_width_);
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
  }

  const Entry& at(int id) const { return entries_[id]; }
  int size() const { return static_cast<int>(entries_.size()); }
  int fp_width() const { return fp_width_; }

 private:
  int fp_radius_, fp_width_;
  std::vector<Entry> entries_;
};

struct LabeledExample {
  int mol = -1;
  double y = 0.0;
  bool cliff = false;
};

struct TaskData {
  MoleculeStore store;
  std::vector<LabeledExample> train, val, test;
  std::vector<int> pool;  // molecule ids

  // D* = train + val: the full labeled set seen by the epoch loop
  std::vector<LabeledExample> labeled_all() const {
    std::vector<LabeledExample> out = train;
    out.insert(out.end(), val.begin(), val.end());
    return out;
  }
};

struct TrainerConfig {
  Strategy strategy = Strategy::Semimol;
  Task task = Task::Regression;
  HfKind hf = HfKind::Mse;
  Metric metric = Metric::Rmse;

  double lr = 1e-4;
  int batch_size = 32;
  int epochs = 100;
  double lambda = 1.0;
  double gamma = 0.9;
  double delta_gamma = 0.05;
  int k = 5;
  int pool_cap = 5000;
  int warmup_epochs_f = 20;
  int warmup_epochs_g = 10;
  double consistency_weight = 1.0;
  uint64_t seed = 0;

  bool backbone_gin = true;
  models::GinConfig gin;
  models::FpMlpConfig fp_mlp;
  models::InstructorConfig instructor;

  bool dump_pseudo = false;
  bool log_test_metric = true;
  int eval_batch = 256;

  // Regression targets are z-scored with training-split statistics before
  // optimization; predictions are mapped back for metrics and pseudo-labels.
  bool standardize_targets = true;
};

struct EpochRow {
  int epoch = 0;
  double gamma = 0.0;  // threshold used this epoch (admission fraction for
                       // the percentile baseline)
  int64_t hybrid_size = 0;
  double loss_f = 0.0;
  double loss_g = 0.0;
  double val_metric = 0.0;
  std::optional<double> test_metric;
  double wall_ms = 0.0;  // timing sidecar only; excluded from run-log bytes
};

struct PseudoDumpRow {
  int sample = 0;
  double y_hat = 0.0;
  double p = 0.5;
  bool admitted = false;
};

struct EpochObs {
  int epoch = 0;
  double gamma_used = 0.0;
  int64_t hybrid_size = 0;
  const models::TargetModel* f = nullptr;
  const std::vector<PseudoSample>* pool = nullptr;
};

struct RunResult {
  std::vector<EpochRow> log;
  models::TargetModel f;
  std::optional<models::InstructorModel> g;
  int best_epoch = -1;
  double best_val = std::numeric_limits<double>::quiet_NaN();
  double final_gamma = 0.0;
  std::map<int, std::vector<PseudoDumpRow>> pseudo_dumps;
};

// ---------------------------------------------------------------------------
// standalone pieces of the algorithm, used by the trainer and by tests
// ---------------------------------------------------------------------------

// Per-sample loss value H_f fed to the instructor and summed by the target
// loss. For regression the RMSE flavor is the eps-smoothed absolute error.
inline double hf_value(HfKind kind, Task task, double pred, double y) {
  if (task == Task::Classification) {
    // cross entropy on the logit
    const double sp = pred > 0.0 ? pred + std::log1p(std::exp(-pred))
                                 : std::log1p(std::exp(pred));
    return sp - pred * y;
  }
  const double d = pred - y;
  switch (kind) {
    case HfKind::Mse: return d * d;
    case HfKind::Rmse: return std::sqrt(d * d + nd::kRmseEps);
    case HfKind::Mae: return std::fabs(d);
  }
  return d * d;
}

namespace detail {

inline models::GraphBatch build_batch(const MoleculeStore& store,
                                      const std::vector<int>& mols,
                                      bool graphs, bool fingerprints) {
  models::GraphBatch batch;
  batch.num_graphs = static_cast<int64_t>(mols.size());
  if (graphs) {
    std::vector<const chem::MolecularGraph*> gp;
    std::vector<const chem::FeatureMatrices*> fp;
    gp.reserve(mols.size());
    fp.reserve(mols.size());
    for (int id : mols) {
      gp.push_back(&store.at(id).graph);
      fp.push_back(&store.at(id).feats);
    }
    batch = models::make_graph_batch(gp, fp);
  }
  if (fingerprints) {
    std::vector<const chem::Fingerprint*> fps;
    fps.reserve(mols.size());
    for (int id : mols) fps.push_back(&store.at(id).fp);
    batch.fingerprints = models::fingerprint_matrix(fps);
  }
  return batch;
}

// elementwise per-sample H_f on the tape (pred: Nx1, targets constant)
inline nd::Var hf_elems(nd::Tape& t, HfKind kind, Task task, nd::Var pred,
                        nd::Tensor targets) {
  if (task == Task::Classification) {
    return nd::bce_logits_elem(t, pred, std::move(targets));
  }
  const nd::Var d = nd::sub(t, pred, t.constant(std::move(targets)));
  switch (kind) {
    case HfKind::Mse: return nd::mul(t, d, d);
    case HfKind::Rmse: return nd::abs_smooth(t, d, nd::kRmseEps);
    case HfKind::Mae: return nd::abs_val(t, d);
  }
  return nd::mul(t, d, d);
}

}  // namespace detail

// Affine map between the model's output space and label space. Regression
// targets are z-scored for optimization; this undoes it for reporting.
struct TargetScale {
  double mu = 0.0;
  double sd = 1.0;
  double to_label(double z) const { return mu + sd * z; }
  double to_model(double y) const { return (y - mu) / sd; }
};

// Batched eval-mode predictions in label space, in input order. Outputs are
// identical regardless of batching because every op is per-graph.
inline std::vector<double> predict(const models::TargetModel& f,
                                   const MoleculeStore& store,
                                   const std::vector<int>& mols, int eval_batch = 256,
                                   const TargetScale& scale = {}) {
  std::vector<double> out;
  out.reserve(mols.size());
  nd::Tape tape;
  for (size_t start = 0; start < mols.size(); start += eval_batch) {
    const size_t stop = std::min(mols.size(), start + eval_batch);
    std::vector<int> chunk(mols.begin() + start, mols.begin() + stop);
    const auto batch =
        detail::build_batch(store, chunk, f.uses_graphs(), !f.uses_graphs());
    tape.reset();
    const nd::Var pred = f.forward(tape, batch, models::Mode::Eval);
    for (double v : tape.val(pred).data) out.push_back(scale.to_label(v));
  }
  return out;
}

// Algorithm step: refresh proxy labels every k epochs, in pool-index order.
// No-op (returns false) at epochs not divisible by k. Classification runs
// harden the sigmoid output into a 0/1 class label.
inline bool assign_pseudo_labels(const models::TargetModel& f,
                                 const MoleculeStore& store,
                                 std::vector<PseudoSample>& pool, int epoch, int k,
                                 Task task, int eval_batch = 256,
                                 const TargetScale& scale = {}) {
  if (k < 1) throw Error("pseudo-label update frequency k must be >= 1");
  if (epoch % k != 0) return false;
  std::vector<int> mols;
  mols.reserve(pool.size());
  for (const auto& ps : pool) mols.push_back(ps.mol);
  const auto preds = predict(f, store, mols, eval_batch, scale);
  for (size_t i = 0; i < pool.size(); ++i) {
    pool[i].y_hat =
        task == Task::Classification ? (preds[i] >= 0.0 ? 1.0 : 0.0) : preds[i];
    pool[i].epoch_assigned = epoch;
  }
  return true;
}

// Instructor confidences for an explicit (mol, y', hf) list, eval mode.
inline std::vector<double> score_confidences(const models::InstructorModel& g,
                                             const MoleculeStore& store,
                                             const std::vector<int>& mols,
                                             const std::vector<double>& y_prime,
                                             const std::vector<double>& hf,
                                             int eval_batch = 256) {
  const bool graphs = g.cfg.encoder == models::InstructorEncoder::Gin;
  std::vector<double> out;
  out.reserve(mols.size());
  nd::Tape tape;
  for (size_t start = 0; start < mols.size(); start += eval_batch) {
    const size_t stop = std::min(mols.size(), start + eval_batch);
    std::vector<int> chunk(mols.begin() + start, mols.begin() + stop);
    std::vector<double> yc(y_prime.begin() + start, y_prime.begin() + stop);
    std::vector<double> hc(hf.begin() + start, hf.begin() + stop);
    const auto batch = detail::build_batch(store, chunk, graphs, !graphs);
    tape.reset();
    const nd::Var p = g.forward(tape, batch, yc, hc, models::Mode::Eval);
    const auto& vals = tape.val(p).data;
    out.insert(out.end(), vals.begin(), vals.end());
  }
  return out;
}

// Class-balanced BCE weights for D' with N observed and M pseudo members:
// both classes contribute equal total weight, normalized to mean one.
inline std::pair<double, double> instructor_class_weights(int64_t n_observed,
                                                          int64_t n_pseudo) {
  if (n_observed <= 0) throw EmptyDataset("instructor needs observed samples");
  if (n_pseudo == 0) return {1.0, 1.0};
  const double total = static_cast<double>(n_observed + n_pseudo);
  return {total / (2.0 * static_cast<double>(n_observed)),
          total / (2.0 * static_cast<double>(n_pseudo))};
}

// ---------------------------------------------------------------------------
// trainer
// ---------------------------------------------------------------------------

class Trainer {
 public:
  Trainer(const TrainerConfig& cfg, const TaskData& data)
      : cfg_(cfg), data_(data) {
    if (data_.train.empty()) throw EmptyDataset("training split is empty");
    if (data_.val.empty()) throw EmptyDataset("validation split is empty");
    if (cfg_.epochs < 1) throw InvalidSpec("epochs must be >= 1");
    if (cfg_.k < 1) throw InvalidSpec("k must be >= 1");
    if (cfg_.gamma < 0.0 || cfg_.gamma > 1.0) throw InvalidSpec("gamma must be in [0,1]");
    labeled_all_ = data_.labeled_all();
  }

  // Observer invoked after each loop epoch; used by tests and dump writers.
  std::function<void(const EpochObs&)> observer;

  // Phases are public so tests can drive them separately; run() is the
  // standard entry point.
  void init() {
    auto init_f = nd::named_stream(cfg_.seed, "init-f");
    if (cfg_.backbone_gin) {
      f_ = models::TargetModel::gin(cfg_.gin, init_f);
    } else {
      f_ = models::TargetModel::fingerprint_mlp(cfg_.fp_mlp, init_f);
    }
    adam_f_.emplace(f_.params(), cfg_.lr);
    if (uses_instructor()) {
      auto init_g = nd::named_stream(cfg_.seed, "init-g");
      g_ = models::InstructorModel::create(cfg_.instructor, init_g);
      adam_g_.emplace(g_->params(), cfg_.lr);
    }
    dropout_f_ = nd::named_stream(cfg_.seed, "dropout-f");
    shuffle_f_ = nd::named_stream(cfg_.seed, "shuffle-f");
    dropout_g_ = nd::named_stream(cfg_.seed, "dropout-g");
    shuffle_g_ = nd::named_stream(cfg_.seed, "shuffle-g");

    scale_ = TargetScale{};
    if (cfg_.task == Task::Regression && cfg_.standardize_targets) {
      double mu = 0.0;
      for (const auto& ex : data_.train) mu += ex.y;
      mu /= static_cast<double>(data_.train.size());
      double var = 0.0;
      for (const auto& ex : data_.train) var += (ex.y - mu) * (ex.y - mu);
      var /= static_cast<double>(data_.train.size());
      scale_.mu = mu;
      scale_.sd = std::sqrt(var) > 1e-8 ? std::sqrt(var) : 1.0;
    }

    // subsample the pool once per run
    pool_.clear();
    if (uses_pool()) {
      auto pool_rng = nd::named_stream(cfg_.seed, "pool-shuffle");
      std::vector<int> ids = data_.pool;
      if (static_cast<int>(ids.size()) > cfg_.pool_cap) {
        pool_rng.shuffle(ids);
        ids.resize(cfg_.pool_cap);
        std::sort(ids.begin(), ids.end());
      }
      for (int id : ids) pool_.push_back(PseudoSample{id});
    }
    initialized_ = true;
  }

  // Supervised warmup of f on the training split with best-on-validation
  // restore, then (for instructor strategies) warmup of g on D' built from
  // the warmed-up f.
  void warmup() {
    require_init();
    warmed_ = true;
    std::vector<FItem> items;
    for (const auto& ex : data_.train) items.push_back({ex.mol, ex.y, false});
    const bool lower_better = metric_lower_is_better(cfg_.metric);
    double best = std::numeric_limits<double>::infinity();
    std::vector<nd::Tensor> best_params = snapshot(f_.params());
    for (int e = 0; e < cfg_.warmup_epochs_f; ++e) {
      sweep_f(items);
      const double m = eval_metric(data_.val);
      const double v = lower_better ? m : -m;
      if (v < best) {
        best = v;
        best_params = snapshot(f_.params());
      }
    }
    if (cfg_.warmup_epochs_f > 0) restore(f_.params(), best_params);

    if (uses_instructor() && !pool_.empty()) {
      assign_pseudo_labels(f_, data_.store, pool_, 0, 1, cfg_.task, cfg_.eval_batch,
                           scale_);
      for (auto& ps : pool_) ps.epoch_assigned = -1;  // loop epoch 0 refreshes
      const DPrimeState dp = build_dprime_state();
      for (int e = 0; e < cfg_.warmup_epochs_g; ++e) sweep_g(dp);
    }
  }

  RunResult run() {
    if (!initialized_) init();
    if (!warmed_) warmup();

    CurriculumState cur;
    cur.gamma = cfg_.gamma;
    cur.delta_gamma = cfg_.delta_gamma;
    cur.k = cfg_.k;

    double best = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    std::vector<nd::Tensor> best_f = snapshot(f_.params());
    std::vector<nd::Tensor> best_g;
    if (g_) best_g = snapshot(g_->params());

    RunResult result;
    const bool lower_better = metric_lower_is_better(cfg_.metric);

    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      EpochRow row;
      row.epoch = epoch;

      if (cfg_.strategy == Strategy::Supervised) {
        std::vector<FItem> items;
        for (const auto& ex : labeled_all_) items.push_back({ex.mol, ex.y, false});
        row.loss_f = sweep_f(items);
        row.gamma = cur.gamma;
        row.hybrid_size = static_cast<int64_t>(items.size());
      } else if (cfg_.strategy == Strategy::PiModel) {
        row.loss_f = sweep_pi();
        row.gamma = cur.gamma;
        row.hybrid_size = static_cast<int64_t>(labeled_all_.size() + pool_.size());
      } else {
        // one SemiMol-family epoch
        assign_pseudo_labels(f_, data_.store, pool_, epoch, cfg_.k, cfg_.task,
                             cfg_.eval_batch, scale_);
        const DPrimeState dp = build_dprime_state();
        for (size_t i = 0; i < pool_.size(); ++i) {
          pool_[i].p = dp.p[labeled_all_.size() + i];
        }

        std::vector<int> admitted;
        if (cfg_.strategy == Strategy::Percentile) {
          const double q =
              cfg_.epochs > 1
                  ? 0.1 + 0.9 * static_cast<double>(epoch) / (cfg_.epochs - 1)
                  : 1.0;
          admitted = admit_top_fraction(pool_, q);
          row.gamma = q;
        } else {
          admitted = admit_by_threshold(pool_, cur.gamma);
          row.gamma = cur.gamma;
        }

        row.loss_g = sweep_g(dp);

        std::vector<FItem> items;
        for (const auto& ex : labeled_all_) items.push_back({ex.mol, ex.y, false});
        for (int idx : admitted) {
          items.push_back({pool_[idx].mol, pool_[idx].y_hat, true});
        }
        row.hybrid_size = static_cast<int64_t>(items.size());
        row.loss_f = sweep_f(items);

        if (cfg_.dump_pseudo) {
          std::vector<PseudoDumpRow> rows;
          rows.reserve(pool_.size());
          std::vector<bool> adm(pool_.size(), false);
          for (int idx : admitted) adm[idx] = true;
          for (size_t i = 0; i < pool_.size(); ++i) {
            rows.push_back({static_cast<int>(i), pool_[i].y_hat, pool_[i].p, adm[i]});
          }
          result.pseudo_dumps[epoch] = std::move(rows);
        }
      }

      row.val_metric = eval_metric(data_.val);
      if (cfg_.log_test_metric && !data_.test.empty()) {
        row.test_metric = eval_metric(data_.test);
      }

      const double norm = lower_better ? row.val_metric : -row.val_metric;
      if (norm < best) {
        best = norm;
        best_epoch = epoch;
        best_f = snapshot(f_.params());
        if (g_) best_g = snapshot(g_->params());
      }

      row.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
      log_.push_back(row);

      if (observer) {
        EpochObs obs;
        obs.epoch = epoch;
        obs.gamma_used = row.gamma;
        obs.hybrid_size = row.hybrid_size;
        obs.f = &f_;
        obs.pool = &pool_;
        observer(obs);
      }

      if (cfg_.strategy == Strategy::Semimol) {
        curriculum_step(cur, row.val_metric, lower_better);
      } else {
        cur.epoch += 1;  // fixed threshold / percentile: no gamma adaptation
      }
    }

    restore(f_.params(), best_f);
    if (g_) restore(g_->params(), best_g);

    result.log = log_;
    result.f = f_;
    result.g = g_;
    result.best_epoch = best_epoch;
    result.best_val = lower_better ? best : -best;
    result.final_gamma = cur.gamma;
    return result;
  }

  const std::vector<EpochRow>& log() const { return log_; }
  const models::TargetModel& f() const { return f_; }
  const models::InstructorModel& g() const { return *g_; }

  // validation/test metric of the current f on an example list
  double eval_metric(const std::vector<LabeledExample>& set) const {
    if (set.empty()) throw EmptyStratum("metric over empty split");
    std::vector<int> mols;
    std::vector<double> targets;
    for (const auto& ex : set) {
      mols.push_back(ex.mol);
      targets.push_back(ex.y);
    }
    auto preds = predict(f_, data_.store, mols, cfg_.eval_batch, scale_);
    if (cfg_.metric == Metric::RocAuc) {
      std::vector<int> labels;
      for (double y : targets) labels.push_back(y != 0.0 ? 1 : 0);
      for (double& s : preds) s = nd::stable_sigmoid(s);
      return data::roc_auc(preds, labels);
    }
    return cfg_.metric == Metric::Rmse ? data::rmse(preds, targets)
                                       : data::mae(preds, targets);
  }

 private:
  struct FItem {
    int mol;
    double y;
    bool pseudo;
  };

  // Epoch state over D' = labeled ∪ pseudo: predictions, per-sample H_f,
  // instructor confidences, fitted feature scaler.
  struct DPrimeState {
    std::vector<int> mols;
    std::vector<double> y_prime;
    std::vector<double> hf;
    std::vector<double> c;  // observability mask
    std::vector<double> p;  // instructor confidence
    double w_observed = 1.0, w_pseudo = 1.0;
  };

  bool uses_instructor() const {
    return cfg_.strategy == Strategy::Semimol ||
           cfg_.strategy == Strategy::FixedThreshold ||
           cfg_.strategy == Strategy::Percentile;
  }
  bool uses_pool() const { return cfg_.strategy != Strategy::Supervised; }

  void require_init() const {
    if (!initialized_) throw Error("trainer used before init()");
  }

  static std::vector<nd::Tensor> snapshot(const std::vector<nd::Tensor*>& params) {
    std::vector<nd::Tensor> out;
    out.reserve(params.size());
    for (const auto* p : params) out.push_back(*p);
    return out;
  }
  static void restore(const std::vector<nd::Tensor*>& params,
                      const std::vector<nd::Tensor>& saved) {
    for (size_t i = 0; i < params.size(); ++i) *params[i] = saved[i];
  }

  // f prediction pass over D', per-sample H_f, scaler fit, confidence pass.
  DPrimeState build_dprime_state() {
    DPrimeState dp;
    for (const auto& ex : labeled_all_) {
      dp.mols.push_back(ex.mol);
      dp.y_prime.push_back(ex.y);
      dp.c.push_back(1.0);
    }
    for (const auto& ps : pool_) {
      dp.mols.push_back(ps.mol);
      dp.y_prime.push_back(ps.y_hat);
      dp.c.push_back(0.0);
    }
    const auto preds = predict(f_, data_.store, dp.mols, cfg_.eval_batch, scale_);
    dp.hf.resize(dp.mols.size());
    for (size_t i = 0; i < dp.mols.size(); ++i) {
      dp.hf[i] = hf_value(cfg_.hf, cfg_.task, preds[i], dp.y_prime[i]);
    }
    g_->scaler = models::FeatureScaler::fit(dp.y_prime, dp.hf);
    dp.p = score_confidences(*g_, data_.store, dp.mols, dp.y_prime, dp.hf,
                             cfg_.eval_batch);
    const auto [w1, w0] = instructor_class_weights(
        static_cast<int64_t>(labeled_all_.size()), static_cast<int64_t>(pool_.size()));
    dp.w_observed = w1;
    dp.w_pseudo = w0;
    return dp;
  }

  void check_finite(double loss) const {
    if (!std::isfinite(loss)) {
      throw NonFiniteLoss("loss became non-finite; aborting run");
    }
  }

  // gradient read-back across possibly repeated bindings of the same params
  static std::vector<nd::Tensor> collect_grads(
      const nd::Tape& tape, const std::vector<nd::Tensor*>& params,
      const std::vector<std::vector<nd::Var>>& bound_lists) {
    for (const auto& bl : bound_lists) {
      if (bl.size() != params.size()) {
        throw ShapeMismatch("forward bound a different number of parameters");
      }
    }
    std::vector<nd::Tensor> grads;
    grads.reserve(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      nd::Tensor g = tape.grad(bound_lists[0][i]);
      for (size_t l = 1; l < bound_lists.size(); ++l) {
        const auto& extra = tape.grad(bound_lists[l][i]).data;
        for (size_t k = 0; k < g.data.size(); ++k) g.data[k] += extra[k];
      }
      grads.push_back(std::move(g));
    }
    return grads;
  }

  // One shuffled minibatch sweep of f over the given items. The loss of a
  // batch is mean H_f over its labeled members plus lambda times mean H_f
  // over its pseudo members. Returns the mean batch loss.
  double sweep_f(std::vector<FItem>& items) {
    shuffle_f_.shuffle(items);
    auto params = f_.params();
    double loss_acc = 0.0;
    int batches = 0;
    nd::Tape tape;
    for (size_t start = 0; start < items.size(); start += cfg_.batch_size) {
      const size_t stop = std::min(items.size(), start + cfg_.batch_size);
      const auto n = static_cast<int64_t>(stop - start);
      std::vector<int> mols;
      nd::Tensor targets = nd::Tensor::zeros(n, 1);
      nd::Tensor mask_lab = nd::Tensor::zeros(n, 1);
      nd::Tensor mask_pse = nd::Tensor::zeros(n, 1);
      int64_t n_lab = 0, n_pse = 0;
      for (size_t i = start; i < stop; ++i) {
        mols.push_back(items[i].mol);
        const int64_t r = static_cast<int64_t>(i - start);
        targets.data[r] = scale_.to_model(items[i].y);
        if (items[i].pseudo) {
          mask_pse.data[r] = 1.0;
          n_pse++;
        } else {
          mask_lab.data[r] = 1.0;
          n_lab++;
        }
      }
      const auto batch =
          detail::build_batch(data_.store, mols, f_.uses_graphs(), !f_.uses_graphs());
      tape.reset();
      std::vector<nd::Var> bound;
      const nd::Var pred =
          f_.forward(tape, batch, models::Mode::Train, &dropout_f_, &bound);
      const nd::Var hf = detail::hf_elems(tape, cfg_.hf, cfg_.task, pred, targets);
      std::optional<nd::Var> loss;
      if (n_lab > 0) {
        loss = nd::weighted_sum(tape, hf, mask_lab, static_cast<double>(n_lab));
      }
      if (n_pse > 0 && cfg_.lambda != 0.0) {
        const nd::Var pse = nd::scale(
            tape, nd::weighted_sum(tape, hf, mask_pse, static_cast<double>(n_pse)),
            cfg_.lambda);
        loss = loss ? nd::add(tape, *loss, pse) : pse;
      }
      if (!loss) continue;  // pseudo-only batch with lambda == 0
      const double lv = tape.val(*loss).item();
      check_finite(lv);
      loss_acc += lv;
      batches++;
      tape.backward(*loss);
      const auto grads = collect_grads(tape, params, {bound});
      std::vector<const nd::Tensor*> gptrs;
      for (const auto& g : grads) gptrs.push_back(&g);
      adam_f_->step(params, gptrs);
    }
    return batches ? loss_acc / batches : 0.0;
  }

  // One shuffled minibatch sweep of g over D' with class-balanced BCE.
  double sweep_g(const DPrimeState& dp) {
    std::vector<int> order(dp.mols.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle_g_.shuffle(order);
    auto params = g_->params();
    const bool graphs = g_->cfg.encoder == models::InstructorEncoder::Gin;
    double loss_acc = 0.0;
    int batches = 0;
    nd::Tape tape;
    for (size_t start = 0; start < order.size(); start += cfg_.batch_size) {
      const size_t stop = std::min(order.size(), start + cfg_.batch_size);
      const auto n = static_cast<int64_t>(stop - start);
      std::vector<int> mols;
      std::vector<double> yv, hv;
      nd::Tensor c = nd::Tensor::zeros(n, 1);
      nd::Tensor w = nd::Tensor::zeros(n, 1);
      for (size_t i = start; i < stop; ++i) {
        const int idx = order[i];
        mols.push_back(dp.mols[idx]);
        yv.push_back(dp.y_prime[idx]);
        hv.push_back(dp.hf[idx]);
        const int64_t r = static_cast<int64_t>(i - start);
        c.data[r] = dp.c[idx];
        w.data[r] = dp.c[idx] == 1.0 ? dp.w_observed : dp.w_pseudo;
      }
      const auto batch = detail::build_batch(data_.store, mols, graphs, !graphs);
      tape.reset();
      std::vector<nd::Var> bound;
      const nd::Var p = g_->forward(tape, batch, yv, hv, models::Mode::Train,
                                    &dropout_g_, &bound);
      const nd::Var loss =
          nd::bce_weighted(tape, p, c, w, static_cast<double>(n));
      const double lv = tape.val(loss).item();
      check_finite(lv);
      loss_acc += lv;
      batches++;
      tape.backward(loss);
      const auto grads = collect_grads(tape, params, {bound});
      std::vector<const nd::Tensor*> gptrs;
      for (const auto& g : grads) gptrs.push_back(&g);
      adam_g_->step(params, gptrs);
    }
    return batches ? loss_acc / batches : 0.0;
  }

  // pi-model epoch: supervised term plus consistency between two stochastic
  // forward passes, then consistency-only batches over the pool. With zero
  // dropout the consistency term is identically zero and the pool sweep is
  // skipped, reducing the epoch to the supervised one.
  double sweep_pi() {
    const double rate = cfg_.backbone_gin ? cfg_.gin.dropout : cfg_.fp_mlp.dropout;
    std::vector<FItem> items;
    for (const auto& ex : labeled_all_) items.push_back({ex.mol, ex.y, false});
    shuffle_f_.shuffle(items);
    auto params = f_.params();
    double loss_acc = 0.0;
    int batches = 0;
    nd::Tape tape;

    auto run_batch = [&](const std::vector<int>& mols, const nd::Tensor* targets) {
      const auto batch =
          detail::build_batch(data_.store, mols, f_.uses_graphs(), !f_.uses_graphs());
      tape.reset();
      std::vector<nd::Var> bound_a, bound_b;
      const nd::Var pa =
          f_.forward(tape, batch, models::Mode::Train, &dropout_f_, &bound_a);
      std::optional<nd::Var> loss;
      std::vector<std::vector<nd::Var>> bounds{bound_a};
      if (targets) {
        const nd::Var hf = detail::hf_elems(tape, cfg_.hf, cfg_.task, pa, *targets);
        loss = nd::mean(tape, hf);
      }
      if (rate > 0.0) {
        const nd::Var pb =
            f_.forward(tape, batch, models::Mode::Train, &dropout_f_, &bound_b);
        bounds.push_back(bound_b);
        const nd::Var d = nd::sub(tape, pa, pb);
        const nd::Var cons =
            nd::scale(tape, nd::mean(tape, nd::mul(tape, d, d)), cfg_.consistency_weight);
        loss = loss ? nd::add(tape, *loss, cons) : cons;
      }
      if (!loss) return;
      const double lv = tape.val(*loss).item();
      check_finite(lv);
      loss_acc += lv;
      batches++;
      tape.backward(*loss);
      const auto grads = collect_grads(tape, params, bounds);
      std::vector<const nd::Tensor*> gptrs;
      for (const auto& g : grads) gptrs.push_back(&g);
      adam_f_->step(params, gptrs);
    };

    for (size_t start = 0; start < items.size(); start += cfg_.batch_size) {
      const size_t stop = std::min(items.size(), start + cfg_.batch_size);
      std::vector<int> mols;
      nd::Tensor targets =
          nd::Tensor::zeros(static_cast<int64_t>(stop - start), 1);
      for (size_t i = start; i < stop; ++i) {
        mols.push_back(items[i].mol);
        targets.data[i - start] = scale_.to_model(items[i].y);
      }
      run_batch(mols, &targets);
    }

    if (rate > 0.0 && !pool_.empty()) {
      std::vector<int> pool_order;
      for (const auto& ps : pool_) pool_order.push_back(ps.mol);
      shuffle_f_.shuffle(pool_order);
      for (size_t start = 0; start < pool_order.size(); start += cfg_.batch_size) {
        const size_t stop = std::min(pool_order.size(), start + cfg_.batch_size);
        std::vector<int> mols(pool_order.begin() + start, pool_order.begin() + stop);
        run_batch(mols, nullptr);
      }
    }
    return batches ? loss_acc / batches : 0.0;
  }

  TrainerConfig cfg_;
  const TaskData& data_;
  std::vector<LabeledExample> labeled_all_;
  std::vector<PseudoSample> pool_;
  models::TargetModel f_;
  std::optional<models::InstructorModel> g_;
  std::optional<nd::Adam> adam_f_, adam_g_;
  nd::RngStream dropout_f_, shuffle_f_, dropout_g_, shuffle_g_;
  TargetScale scale_;
  std::vector<EpochRow> log_;
  bool initialized_ = false;
  bool warmed_ = false;
};

// Full-set losses, used by tests and diagnostics rather than training.
inline double instructor_loss(const models::InstructorModel& g,
                              const MoleculeStore& store,
                              const std::vector<int>& mols,
                              const std::vector<double>& y_prime,
                              const std::vector<double>& hf,
                              const std::vector<double>& c) {
  int64_t n_obs = 0, n_pse = 0;
  for (double ci : c) (ci == 1.0 ? n_obs : n_pse)++;
  const auto [w1, w0] = instructor_class_weights(n_obs, n_pse);
  const auto p = score_confidences(g, store, mols, y_prime, hf);
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], nd::kBceEps, 1.0 - nd::kBceEps);
    const double w = c[i] == 1.0 ? w1 : w0;
    acc += w * -(c[i] * std::log(pc) + (1.0 - c[i]) * std::log(1.0 - pc));
  }
  return acc / static_cast<double>(p.size());
}

inline double target_loss(const models::TargetModel& f, const MoleculeStore& store,
                          const std::vector<LabeledExample>& labeled,
                          const std::vector<std::pair<int, double>>& admitted_pseudo,
                          double lambda, HfKind kind, Task task) {
  if (labeled.empty() && admitted_pseudo.empty()) {
    throw EmptyDataset("target loss over an empty hybrid set");
  }
  std::vector<int> mols;
  std::vector<double> ys;
  for (const auto& ex : labeled) {
    mols.push_back(ex.mol);
    ys.push_back(ex.y);
  }
  for (const auto& [mol, y] : admitted_pseudo) {
    mols.push_back(mol);
    ys.push_back(y);
  }
  const auto preds = predict(f, store, mols);
  double lab = 0.0, pse = 0.0;
  for (size_t i = 0; i < labeled.size(); ++i) {
    lab += hf_value(kind, task, preds[i], ys[i]);
  }
  for (size_t i = labeled.size(); i < mols.size(); ++i) {
    pse += hf_value(kind, task, preds[i], ys[i]);
  }
  double out = 0.0;
  if (!labeled.empty()) out += lab / static_cast<double>(labeled.size());
  if (!admitted_pseudo.empty()) {
    out += lambda * pse / static_cast<double>(admitted_pseudo.size());
  }
  return out;
}

inline RunResult train_semimol(const TrainerConfig& cfg, const TaskData& data) {
  TrainerConfig c = cfg;
  c.strategy = Strategy::Semimol;
  Trainer t(c, data);
  return t.run();
}

inline RunResult train_baseline(Strategy strategy, const TrainerConfig& cfg,
                                const TaskData& data) {
  TrainerConfig c = cfg;
  c.strategy = strategy;
  Trainer t(c, data);
  return t.run();
}

}  // namespace semimol::semisup
