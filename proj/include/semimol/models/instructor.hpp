#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "semimol/models/batch.hpp"
#include "semimol/models/mlp.hpp"
#include "semimol/models/target.hpp"

namespace semimol::models {

enum class InstructorEncoder { FingerprintMlp, Gin };

struct InstructorConfig {
  InstructorEncoder encoder = InstructorEncoder::FingerprintMlp;
  int fp_width = 1024;   // fingerprint encoder input width
  int embed_dim = 32;    // encoder output width
  GinConfig gin;         // used when encoder == Gin (hidden acts as embed dim)
  int fusion_hidden = 32;
  int fusion_layers = 2;
  double dropout = 0.0;
};

// Standardization of the label and loss inputs fed to the fusion head.
// Values are clamped before scaling so infinities cannot poison the net.
struct FeatureScaler {
  double y_mean = 0.0, y_std = 1.0;
  double hf_mean = 0.0, hf_std = 1.0;

  static constexpr double kClamp = 1e6;

  static double clamp_raw(double v) {
    if (std::isnan(v)) return 0.0;
    return std::clamp(v, -kClamp, kClamp);
  }

  double scale_y(double y) const { return (clamp_raw(y) - y_mean) / y_std; }
  double scale_hf(double h) const { return (clamp_raw(h) - hf_mean) / hf_std; }

  static FeatureScaler fit(const std::vector<double>& ys,
                           const std::vector<double>& hfs) {
    FeatureScaler s;
    auto moments = [](const std::vector<double>& v, double& mean, double& sd) {
      if (v.empty()) return;
      double m = 0.0;
      for (double x : v) m += clamp_raw(x);
      m /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) {
        const double d = clamp_raw(x) - m;
        var += d * d;
      }
      var /= static_cast<double>(v.size());
      mean = m;
      sd = std::max(std::sqrt(var), 1e-8);
    };
    moments(ys, s.y_mean, s.y_std);
    moments(hfs, s.hf_mean, s.hf_std);
    return s;
  }
};

// The instructor g. It scores (x, y', H_f(f(x), y')) triples and outputs the
// probability that y' is an observed (ground-truth) label. The encoded
// sample, the standardized label and the standardized loss value are fused
// by an MLP ending in a sigmoid, so outputs are strictly inside (0, 1).
struct InstructorModel {
  InstructorConfig cfg;
  Mlp fp_encoder;          // fingerprint variant
  GinEncoder gin_encoder;  // gin variant
  Mlp fusion;
  FeatureScaler scaler;

  static InstructorModel create(const InstructorConfig& cfg, nd::RngStream& rng) {
    InstructorModel m;
    m.cfg = cfg;
    int embed = cfg.embed_dim;
    if (cfg.encoder == InstructorEncoder::FingerprintMlp) {
      m.fp_encoder = Mlp::create({cfg.fp_width, cfg.embed_dim, cfg.embed_dim}, rng);
    } else {
      m.gin_encoder = GinEncoder::create(cfg.gin, rng);
      embed = cfg.gin.hidden;
    }
    std::vector<int> dims{embed + 2};
    for (int i = 0; i < cfg.fusion_layers - 1; ++i) dims.push_back(cfg.fusion_hidden);
    dims.push_back(1);
    m.fusion = Mlp::create(dims, rng);
    return m;
  }

  std::vector<nd::Tensor*> params() {
    std::vector<nd::Tensor*> out;
    if (cfg.encoder == InstructorEncoder::FingerprintMlp) {
      fp_encoder.collect_params(out);
    } else {
      gin_encoder.collect_params(out);
    }
    fusion.collect_params(out);
    return out;
  }
  std::vector<const nd::Tensor*> params() const {
    auto mut = const_cast<InstructorModel*>(this)->params();
    return {mut.begin(), mut.end()};
  }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto* p : params()) n += p->numel();
    return n;
  }

  std::string arch_descriptor() const {
    if (cfg.encoder == InstructorEncoder::FingerprintMlp) {
      return "instructor/fp" + std::to_string(cfg.fp_width) + "/e" +
             std::to_string(cfg.embed_dim) + "/fh" + std::to_string(cfg.fusion_hidden) +
             "/fl" + std::to_string(cfg.fusion_layers);
    }
    return "instructor/gin-h" + std::to_string(cfg.gin.hidden) + "/L" +
           std::to_string(cfg.gin.layers) + "/fh" + std::to_string(cfg.fusion_hidden) +
           "/fl" + std::to_string(cfg.fusion_layers);
  }

  // feats2 holds the already standardized (y', hf) pairs, one row per sample.
  nd::Var forward_scaled(nd::Tape& t, const GraphBatch& batch, const nd::Tensor& feats2,
                         Mode mode, nd::RngStream* drop_rng = nullptr,
                         std::vector<nd::Var>* bound = nullptr) const {
    nd::Var embed;
    if (cfg.encoder == InstructorEncoder::FingerprintMlp) {
      const nd::Var x = t.constant(batch.fingerprints);
      embed = nd::relu(t, fp_encoder.forward(t, x, cfg.dropout, drop_rng, mode, bound));
    } else {
      embed = gin_encoder.forward(t, batch, mode, drop_rng, bound);
    }
    const nd::Var z = nd::concat_cols(t, embed, t.constant(feats2));
    nd::Var logit = fusion.forward(t, z, cfg.dropout, drop_rng, mode, bound);
    // keep p strictly inside (0,1) in double precision
    logit = nd::clip(t, logit, -30.0, 30.0);
    return nd::sigmoid(t, logit);
  }

  // Raw-value overload: standardizes (y', hf) with the fitted scaler.
  nd::Var forward(nd::Tape& t, const GraphBatch& batch,
                  const std::vector<double>& y_raw, const std::vector<double>& hf_raw,
                  Mode mode, nd::RngStream* drop_rng = nullptr,
                  std::vector<nd::Var>* bound = nullptr) const {
    const auto n = static_cast<int64_t>(y_raw.size());
    nd::Tensor feats2 = nd::Tensor::zeros(n, 2);
    for (int64_t i = 0; i < n; ++i) {
      feats2.at(i, 0) = scaler.scale_y(y_raw[i]);
      feats2.at(i, 1) = scaler.scale_hf(hf_raw[i]);
    }
    return forward_scaled(t, batch, feats2, mode, drop_rng, bound);
  }
};

// Single-sample convenience: p = g(x, y', hf), eval mode.
inline double instructor_forward(const InstructorModel& g,
                                 const chem::MolecularGraph& graph,
                                 const chem::FeatureMatrices& feats,
                                 const chem::Fingerprint& fp, double y_prime,
                                 double hf) {
  GraphBatch batch;
  batch.num_graphs = 1;
  if (g.cfg.encoder == InstructorEncoder::FingerprintMlp) {
    batch.fingerprints = fingerprint_matrix({&fp});
  } else {
    batch = make_graph_batch({&graph}, {&feats});
  }
  nd::Tape t;
  return t.val(g.forward(t, batch, {y_prime}, {hf}, Mode::Eval)).item();
}

}  // namespace semimol::models
