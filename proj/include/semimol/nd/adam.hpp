#pragma once

#include <cmath>
#include <vector>

#include "semimol/errors.hpp"
#include "semimol/nd/tensor.hpp"

namespace semimol::nd {

// Adam with bias correction. Moment buffers mirror the parameter list given
// at construction; updates are plain loops in a fixed order, so a step is
// bit-reproducible for identical inputs.
class Adam {
 public:
  Adam(const std::vector<Tensor*>& params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor* p : params) {
      m_.emplace_back(std::vector<double>(p->data.size(), 0.0));
      v_.emplace_back(std::vector<double>(p->data.size(), 0.0));
    }
  }

  void step(const std::vector<Tensor*>& params,
            const std::vector<const Tensor*>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
      throw ShapeMismatch("adam: parameter/gradient list size changed");
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, step_count_);
    const double bc2 = 1.0 - std::pow(beta2_, step_count_);
    for (size_t pi = 0; pi < params.size(); ++pi) {
      Tensor& p = *params[pi];
      const Tensor& g = *grads[pi];
      if (g.data.size() != p.data.size()) {
        throw ShapeMismatch("adam: gradient shape does not match parameter");
      }
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (size_t i = 0; i < p.data.size(); ++i) {
        const double gi = g.data[i];
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  long step_count() const { return step_count_; }
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long step_count_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace semimol::nd
