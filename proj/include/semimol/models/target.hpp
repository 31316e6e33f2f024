#pragma once

#include <string>
#include <variant>
#include <vector>

#include "semimol/models/batch.hpp"
#include "semimol/models/mlp.hpp"

namespace semimol::models {

enum class Pooling { Sum, Mean, Attention };

inline const char* pooling_name(Pooling p) {
  switch (p) {
    case Pooling::Sum: return "sum";
    case Pooling::Mean: return "mean";
    case Pooling::Attention: return "attention";
  }
  return "?";
}

struct GinConfig {
  int node_dim = chem::kNodeFeatureDim;
  int hidden = 64;
  int layers = 3;
  int fc_layers = 2;
  Pooling pooling = Pooling::Attention;
  double dropout = 0.0;
};

// One GIN message-passing step: h <- MLP((1 + eps) * h + sum_{u in N(v)} h_u)
// with a learnable per-layer eps (initialized to zero).
struct GinLayerParams {
  nd::Tensor eps;  // 1x1
  Mlp mlp;         // in -> hidden -> hidden
};

// GIN stack plus graph-level pooling; yields one embedding row per graph.
struct GinEncoder {
  GinConfig cfg;
  std::vector<GinLayerParams> gin;
  nd::Tensor att_w;  // hidden x 1 (attention pooling only)
  nd::Tensor att_b;  // 1 x 1

  static GinEncoder create(const GinConfig& cfg, nd::RngStream& rng) {
    if (cfg.hidden <= 0 || cfg.layers <= 0 || cfg.node_dim <= 0) {
      throw InvalidSpec("gin encoder dims must be positive");
    }
    GinEncoder e;
    e.cfg = cfg;
    for (int l = 0; l < cfg.layers; ++l) {
      GinLayerParams p;
      p.eps = nd::Tensor::scalar(0.0);
      const int in = l == 0 ? cfg.node_dim : cfg.hidden;
      p.mlp = Mlp::create({in, cfg.hidden, cfg.hidden}, rng);
      e.gin.push_back(std::move(p));
    }
    if (cfg.pooling == Pooling::Attention) {
      e.att_w = nd::Tensor::zeros(cfg.hidden, 1);
      e.att_b = nd::Tensor::scalar(0.0);
      const double bound = std::sqrt(6.0 / cfg.hidden);
      for (double& v : e.att_w.data) v = rng.uniform(-bound, bound);
    }
    return e;
  }

  void collect_params(std::vector<nd::Tensor*>& out) {
    for (auto& l : gin) {
      out.push_back(&l.eps);
      l.mlp.collect_params(out);
    }
    if (cfg.pooling == Pooling::Attention) {
      out.push_back(&att_w);
      out.push_back(&att_b);
    }
  }

  // Returns per-graph embeddings (num_graphs x hidden).
  nd::Var forward(nd::Tape& t, const GraphBatch& batch, Mode mode,
                  nd::RngStream* drop_rng, std::vector<nd::Var>* bound) const {
    nd::Var h = t.constant(batch.node_features);
    for (const auto& layer : gin) {
      const nd::Var eps = t.leaf(layer.eps, true);
      if (bound) bound->push_back(eps);
      const nd::Var self = nd::add(t, h, nd::smul(t, h, eps));
      const nd::Var agg = nd::add(t, self, nd::neighbor_sum(t, h, batch.adj));
      h = nd::relu(t, layer.mlp.forward(t, agg, cfg.dropout, drop_rng, mode, bound));
      if (cfg.dropout > 0.0 && drop_rng) {
        h = nd::dropout(t, h, cfg.dropout, *drop_rng, mode == Mode::Train);
      }
    }
    switch (cfg.pooling) {
      case Pooling::Sum:
        return nd::segment_sum(t, h, batch.segments, batch.num_graphs);
      case Pooling::Mean:
        return nd::segment_mean(t, h, batch.segments, batch.num_graphs);
      case Pooling::Attention: {
        const nd::Var w = t.leaf(att_w, true);
        const nd::Var b = t.leaf(att_b, true);
        if (bound) {
          bound->push_back(w);
          bound->push_back(b);
        }
        const nd::Var scores = nd::add(t, nd::matmul(t, h, w), b);
        const nd::Var weights =
            nd::segment_softmax(t, scores, batch.segments, batch.num_graphs);
        return nd::segment_sum(t, nd::colmul(t, h, weights), batch.segments,
                               batch.num_graphs);
      }
    }
    throw InvalidSpec("unknown pooling");
  }
};

struct GinModel {
  GinEncoder enc;
  Mlp head;  // hidden -> ... -> 1

  static GinModel create(const GinConfig& cfg, nd::RngStream& rng) {
    GinModel m;
    m.enc = GinEncoder::create(cfg, rng);
    std::vector<int> dims{cfg.hidden};
    for (int i = 0; i < cfg.fc_layers - 1; ++i) dims.push_back(cfg.hidden);
    dims.push_back(1);
    m.head = Mlp::create(dims, rng);
    return m;
  }

  nd::Var forward(nd::Tape& t, const GraphBatch& batch, Mode mode,
                  nd::RngStream* drop_rng, std::vector<nd::Var>* bound) const {
    const nd::Var pooled = enc.forward(t, batch, mode, drop_rng, bound);
    return head.forward(t, pooled, enc.cfg.dropout, drop_rng, mode, bound);
  }
};

struct FpMlpConfig {
  int width = 1024;
  int hidden = 64;
  int fc_layers = 2;
  double dropout = 0.0;
};

// Cheap non-graph backbone: MLP over raw fingerprint bits.
struct FpMlpModel {
  FpMlpConfig cfg;
  Mlp net;

  static FpMlpModel create(const FpMlpConfig& cfg, nd::RngStream& rng) {
    FpMlpModel m;
    m.cfg = cfg;
    std::vector<int> dims{cfg.width};
    for (int i = 0; i < cfg.fc_layers; ++i) dims.push_back(cfg.hidden);
    dims.push_back(1);
    m.net = Mlp::create(dims, rng);
    return m;
  }

  nd::Var forward(nd::Tape& t, const GraphBatch& batch, Mode mode,
                  nd::RngStream* drop_rng, std::vector<nd::Var>* bound) const {
    const nd::Var x = t.constant(batch.fingerprints);
    return net.forward(t, x, cfg.dropout, drop_rng, mode, bound);
  }
};

// The target property model f. Output is one scalar per input graph:
// the predicted value for regression, a logit for classification.
struct TargetModel {
  std::variant<GinModel, FpMlpModel> net;

  static TargetModel gin(const GinConfig& cfg, nd::RngStream& rng) {
    TargetModel m;
    m.net = GinModel::create(cfg, rng);
    return m;
  }
  static TargetModel fingerprint_mlp(const FpMlpConfig& cfg, nd::RngStream& rng) {
    TargetModel m;
    m.net = FpMlpModel::create(cfg, rng);
    return m;
  }

  bool uses_graphs() const { return std::holds_alternative<GinModel>(net); }

  nd::Var forward(nd::Tape& t, const GraphBatch& batch, Mode mode,
                  nd::RngStream* drop_rng = nullptr,
                  std::vector<nd::Var>* bound = nullptr) const {
    return std::visit(
        [&](const auto& m) { return m.forward(t, batch, mode, drop_rng, bound); },
        net);
  }

  std::vector<nd::Tensor*> params() {
    std::vector<nd::Tensor*> out;
    if (auto* g = std::get_if<GinModel>(&net)) {
      g->enc.collect_params(out);
      g->head.collect_params(out);
    } else {
      std::get<FpMlpModel>(net).net.collect_params(out);
    }
    return out;
  }

  std::vector<const nd::Tensor*> params() const {
    auto mut = const_cast<TargetModel*>(this)->params();
    return {mut.begin(), mut.end()};
  }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto* p : params()) n += p->numel();
    return n;
  }

  std::string arch_descriptor() const {
    if (const auto* g = std::get_if<GinModel>(&net)) {
      const auto& c = g->enc.cfg;
      return "gin/node" + std::to_string(c.node_dim) + "/h" +
             std::to_string(c.hidden) + "/L" + std::to_string(c.layers) + "/fc" +
             std::to_string(c.fc_layers) + "/" + pooling_name(c.pooling);
    }
    const auto& c = std::get<FpMlpModel>(net).cfg;
    return "fpmlp/w" + std::to_string(c.width) + "/h" + std::to_string(c.hidden) +
           "/fc" + std::to_string(c.fc_layers);
  }
};

// Convenience single-molecule forward in eval mode.
inline double target_forward(const TargetModel& model, const chem::MolecularGraph& g,
                             const chem::FeatureMatrices& feats,
                             const chem::Fingerprint* fp = nullptr) {
  GraphBatch batch;
  if (model.uses_graphs()) {
    batch = make_graph_batch({&g}, {&feats});
  } else {
    if (!fp) throw InvalidSpec("fingerprint backbone needs a fingerprint");
    batch.num_graphs = 1;
    batch.fingerprints = fingerprint_matrix({fp});
  }
  nd::Tape t;
  return t.val(model.forward(t, batch, Mode::Eval)).item();
}

}  // namespace semimol::models
