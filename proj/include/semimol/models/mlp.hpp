#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "semimol/errors.hpp"
#include "semimol/nd/rng.hpp"
#include "semimol/nd/tape.hpp"

namespace semimol::models {

enum class Mode { Train, Eval };

struct LinearLayer {
  nd::Tensor w;  // in x out
  nd::Tensor b;  // 1 x out
};

// Plain fully connected stack with ReLU between layers (none after the last).
// Parameters are He-style uniform initialized from the given stream.
struct Mlp {
  std::vector<LinearLayer> layers;

  static Mlp create(const std::vector<int>& dims, nd::RngStream& rng) {
    if (dims.size() < 2) throw InvalidSpec("mlp needs at least input and output dims");
    for (int d : dims) {
      if (d <= 0) throw InvalidSpec("mlp dims must be positive");
    }
    Mlp m;
    for (size_t i = 0; i + 1 < dims.size(); ++i) {
      LinearLayer l;
      l.w = nd::Tensor::zeros(dims[i], dims[i + 1]);
      l.b = nd::Tensor::zeros(1, dims[i + 1]);
      const double bound = std::sqrt(6.0 / static_cast<double>(dims[i]));
      for (double& v : l.w.data) v = rng.uniform(-bound, bound);
      m.layers.push_back(std::move(l));
    }
    return m;
  }

  void collect_params(std::vector<nd::Tensor*>& out) {
    for (auto& l : layers) {
      out.push_back(&l.w);
      out.push_back(&l.b);
    }
  }
  void collect_params(std::vector<const nd::Tensor*>& out) const {
    for (const auto& l : layers) {
      out.push_back(&l.w);
      out.push_back(&l.b);
    }
  }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& l : layers) n += l.w.numel() + l.b.numel();
    return n;
  }

  // Binds parameters as tape leaves (appending their vars to `bound` when
  // given) and runs the forward pass. Dropout is applied after each hidden
  // activation in training mode.
  nd::Var forward(nd::Tape& t, nd::Var x, double dropout_rate,
                  nd::RngStream* drop_rng, Mode mode,
                  std::vector<nd::Var>* bound) const {
    nd::Var h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
      const nd::Var w = t.leaf(layers[i].w, true);
      const nd::Var b = t.leaf(layers[i].b, true);
      if (bound) {
        bound->push_back(w);
        bound->push_back(b);
      }
      h = nd::add(t, nd::matmul(t, h, w), b);
      if (i + 1 < layers.size()) {
        h = nd::relu(t, h);
        if (dropout_rate > 0.0 && drop_rng) {
          h = nd::dropout(t, h, dropout_rate, *drop_rng, mode == Mode::Train);
        }
      }
    }
    return h;
  }
};

}  // namespace semimol::models
