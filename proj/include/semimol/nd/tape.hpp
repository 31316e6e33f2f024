#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "semimol/errors.hpp"
#include "semimol/nd/rng.hpp"
#include "semimol/nd/tensor.hpp"

namespace semimol::nd {

using Var = int32_t;

// Compressed sparse neighbor lists, shared by all graphs in a batch.
struct Csr {
  std::vector<int32_t> offsets;  // size N+1
  std::vector<int32_t> nbrs;
};

// Recording tape for reverse-mode differentiation. Ops append nodes in
// evaluation order, so the node list is already topologically sorted;
// backward() walks it once in reverse.
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad) {
    nodes_.push_back({std::move(value), Tensor{}, nullptr, requires_grad});
    return static_cast<Var>(nodes_.size()) - 1;
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var record(Tensor value, bool needs_grad,
             std::function<void(Tape&, Var)> back) {
    nodes_.push_back({std::move(value), Tensor{}, std::move(back), needs_grad});
    return static_cast<Var>(nodes_.size()) - 1;
  }

  const Tensor& val(Var v) const { return nodes_[v].value; }
  const Tensor& grad(Var v) const { return nodes_[v].grad; }
  bool needs_grad(Var v) const { return nodes_[v].needs_grad; }

  Tensor& grad_mut(Var v) { return nodes_[v].grad; }

  void backward(Var loss) {
    if (val(loss).numel() != 1) {
      throw NotScalar("backward: loss must be a scalar, got " +
                      val(loss).shape_str());
    }
    for (auto& n : nodes_) {
      n.grad.shape = n.value.shape;
      n.grad.data.assign(n.value.data.size(), 0.0);
    }
    nodes_[loss].grad.data[0] = 1.0;
    for (auto i = static_cast<int64_t>(nodes_.size()) - 1; i >= 0; --i) {
      if (nodes_[i].back) nodes_[i].back(*this, static_cast<Var>(i));
    }
  }

  void reset() { nodes_.clear(); }
  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, Var)> back;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// elementwise / structural ops
// ---------------------------------------------------------------------------

// a + b with equal shapes, or row-broadcast when b is 1xM (bias add).
inline Var add(Tape& t, Var a, Var b) {
  const Tensor& A = t.val(a);
  const Tensor& B = t.val(b);
  const bool broadcast = B.rows() == 1 && A.rows() != 1 && A.cols() == B.cols();
  if (!broadcast) require_same_shape(A, B, "add");
  Tensor out = A;
  if (broadcast) {
    const int64_t m = A.cols();
    for (int64_t i = 0; i < A.rows(); ++i) {
      double* row = &out.data[i * m];
      for (int64_t j = 0; j < m; ++j) row[j] += B.data[j];
    }
  } else {
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i];
  }
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  return t.record(std::move(out), ng, [a, b, broadcast](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(a)) {
      auto& ga = t.grad_mut(a).data;
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.grad_mut(b).data;
      if (broadcast) {
        const int64_t m = t.val(b).cols();
        for (int64_t i = 0; i < g.rows(); ++i) {
          for (int64_t j = 0; j < m; ++j) gb[j] += g.data[i * m + j];
        }
      } else {
        for (size_t i = 0; i < gb.size(); ++i) gb[i] += g.data[i];
      }
    }
  });
}

inline Var sub(Tape& t, Var a, Var b) {
  const Tensor& A = t.val(a);
  const Tensor& B = t.val(b);
  require_same_shape(A, B, "sub");
  Tensor out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= B.data[i];
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  return t.record(std::move(out), ng, [a, b](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(a)) {
      auto& ga = t.grad_mut(a).data;
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.grad_mut(b).data;
      for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g.data[i];
    }
  });
}

inline Var mul(Tape& t, Var a, Var b) {
  const Tensor& A = t.val(a);
  const Tensor& B = t.val(b);
  require_same_shape(A, B, "mul");
  Tensor out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  return t.record(std::move(out), ng, [a, b](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(a)) {
      auto& ga = t.grad_mut(a).data;
      const auto& bv = t.val(b).data;
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i] * bv[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.grad_mut(b).data;
      const auto& av = t.val(a).data;
      for (size_t i = 0; i < gb.size(); ++i) gb[i] += g.data[i] * av[i];
    }
  });
}

// a * s where s is a 1x1 tape variable.
inline Var smul(Tape& t, Var a, Var s) {
  const Tensor& A = t.val(a);
  const double sv = t.val(s).item();
  Tensor out = A;
  for (double& v : out.data) v *= sv;
  const bool ng = t.needs_grad(a) || t.needs_grad(s);
  return t.record(std::move(out), ng, [a, s, sv](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(a)) {
      auto& ga = t.grad_mut(a).data;
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i] * sv;
    }
    if (t.needs_grad(s)) {
      const auto& av = t.val(a).data;
      double acc = 0.0;
      for (size_t i = 0; i < av.size(); ++i) acc += g.data[i] * av[i];
      t.grad_mut(s).data[0] += acc;
    }
  });
}

inline Var scale(Tape& t, Var a, double c) {
  Tensor out = t.val(a);
  for (double& v : out.data) v *= c;
  return t.record(std::move(out), t.needs_grad(a), [a, c](Tape& t, Var self) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(self);
    auto& ga = t.grad_mut(a).data;
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i] * c;
  });
}

inline Var matmul(Tape& t, Var a, Var b) {
  const Tensor& A = t.val(a);
  const Tensor& B = t.val(b);
  if (A.cols() != B.rows()) {
    throw ShapeMismatch("matmul: " + A.shape_str() + " x " + B.shape_str());
  }
  const int64_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor out = Tensor::zeros(n, m);
  for (int64_t i = 0; i < n; ++i) {
    const double* arow = &A.data[i * k];
    double* orow = &out.data[i * m];
    for (int64_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = &B.data[kk * m];
      for (int64_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  return t.record(std::move(out), ng, [a, b, n, k, m](Tape& t, Var self) {
    const Tensor& G = t.grad(self);
    if (t.needs_grad(a)) {
      auto& gA = t.grad_mut(a).data;
      const auto& Bv = t.val(b).data;
      for (int64_t i = 0; i < n; ++i) {
        const double* grow = &G.data[i * m];
        double* garow = &gA[i * k];
        for (int64_t kk = 0; kk < k; ++kk) {
          const double* brow = &Bv[kk * m];
          double acc = 0.0;
          for (int64_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          garow[kk] += acc;
        }
      }
    }
    if (t.needs_grad(b)) {
      auto& gB = t.grad_mut(b).data;
      const auto& Av = t.val(a).data;
      for (int64_t i = 0; i < n; ++i) {
        const double* arow = &Av[i * k];
        const double* grow = &G.data[i * m];
        for (int64_t kk = 0; kk < k; ++kk) {
          const double av = arow[kk];
          if (av == 0.0) continue;
          double* gbrow = &gB[kk * m];
          for (int64_t j = 0; j < m; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

inline Var relu(Tape& t, Var a) {
  Tensor out = t.val(a);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return t.record(std::move(out), t.needs_grad(a), [a](Tape& t, Var self) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(self);
    const auto& av = t.val(a).data;
    auto& ga = t.grad_mut(a).data;
    for (size_t i = 0; i < ga.size(); ++i) {
      if (av[i] > 0.0) ga[i] += g.data[i];
    }
  });
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(Tape& t, Var a) {
  Tensor out = t.val(a);
  for (double& v : out.data) v = stable_sigmoid(v);
  return t.record(std::move(out), t.needs_grad(a), [a](Tape& t, Var self) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(self);
    const auto& ov = t.val(self).data;
    auto& ga = t.grad_mut(a).data;
    for (size_t i = 0; i < ga.size(); ++i) {
      ga[i] += g.data[i] * ov[i] * (1.0 - ov[i]);
    }
  });
}

inline Var sum(Tape& t, Var a) {
  double acc = 0.0;
  for (double v : t.val(a).data) acc += v;
  return t.record(Tensor::scalar(acc), t.needs_grad(a), [a](Tape& t, Var self) {
    if (!t.needs_grad(a)) return;
    const double g = t.grad(self).data[0];
    for (double& v : t.grad_mut(a).data) v += g;
  });
}

inline Var mean(Tape& t, Var a) {
  const int64_t n = t.val(a).numel();
  double acc = 0.0;
  for (double v : t.val(a).data) acc += v;
  return t.record(Tensor::scalar(acc / static_cast<double>(n)), t.needs_grad(a),
                  [a, n](Tape& t, Var self) {
                    if (!t.needs_grad(a)) return;
                    const double g = t.grad(self).data[0] / static_cast<double>(n);
                    for (double& v : t.grad_mut(a).data) v += g;
                  });
}

inline Var concat_cols(Tape& t, Var a, Var b) {
  const Tensor& A = t.val(a);
  const Tensor& B = t.val(b);
  if (A.rows() != B.rows()) {
    throw ShapeMismatch("concat_cols: " + A.shape_str() + " vs " + B.shape_str());
  }
  const int64_t n = A.rows(), p = A.cols(), q = B.cols();
  Tensor out = Tensor::zeros(n, p + q);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < p; ++j) out.data[i * (p + q) + j] = A.data[i * p + j];
    for (int64_t j = 0; j < q; ++j) out.data[i * (p + q) + p + j] = B.data[i * q + j];
  }
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  return t.record(std::move(out), ng, [a, b, n, p, q](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(a)) {
      auto& ga = t.grad_mut(a).data;
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < p; ++j) ga[i * p + j] += g.data[i * (p + q) + j];
      }
    }
    if (t.needs_grad(b)) {
      auto& gb = t.grad_mut(b).data;
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < q; ++j) gb[i * q + j] += g.data[i * (p + q) + p + j];
      }
    }
  });
}

// Inverted dropout. Training mode scales surviving entries by 1/(1-rate) and
// consumes one uniform per entry; eval mode is the identity and draws nothing.
inline Var dropout(Tape& t, Var a, double rate, RngStream& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) return a;
  const Tensor& A = t.val(a);
  const double keep = 1.0 - rate;
  const double inv = 1.0 / keep;
  auto mask = std::make_shared<std::vector<double>>(A.data.size());
  Tensor out = A;
  for (size_t i = 0; i < out.data.size(); ++i) {
    const double m = rng.uniform() < keep ? inv : 0.0;
    (*mask)[i] = m;
    out.data[i] *= m;
  }
  return t.record(std::move(out), t.needs_grad(a), [a, mask](Tape& t, Var self) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(self);
    auto& ga = t.grad_mut(a).data;
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i] * (*mask)[i];
  });
}

// Per-segment row sums: out[s] = sum of rows i with segments[i] == s.
inline Var segment_sum(Tape& t, Var a,
                       std::shared_ptr<const std::vector<int32_t>> segments,
                       int64_t num_segments) {
  const Tensor& A = t.val(a);
  const int64_t n = A.rows(), d = A.cols();
  Tensor out = Tensor::zeros(num_segments, d);
  for (int64_t i = 0; i < n; ++i) {
    const int64_t s = (*segments)[i];
    double* orow = &out.data[s * d];
    const double* arow = &A.data[i * d];
    for (int64_t j = 0; j < d; ++j) orow[j] += arow[j];
  }
  return t.record(std::move(out), t.needs_grad(a),
                  [a, segments, d](Tape& t, Var self) {
                    if (!t.needs_grad(a)) return;
                    const Tensor& g = t.grad(self);
                    auto& ga = t.grad_mut(a).data;
                    const int64_t n = t.val(a).rows();
                    for (int64_t i = 0; i < n; ++i) {
                      const int64_t s = (*segments)[i];
                      const double* grow = &g.data[s * d];
                      double* garow = &ga[i * d];
                      for (int64_t j = 0; j < d; ++j) garow[j] += grow[j];
                    }
                  });
}

// Per-segment row means; segment sizes are taken from the segment id vector.
inline Var segment_mean(Tape& t, Var a,
                        std::shared_ptr<const std::vector<int32_t>> segments,
                        int64_t num_segments) {
  const Tensor& A = t.val(a);
  const int64_t n = A.rows(), d = A.cols();
  auto counts = std::make_shared<std::vector<double>>(num_segments, 0.0);
  for (int64_t i = 0; i < n; ++i) (*counts)[(*segments)[i]] += 1.0;
  Tensor out = Tensor::zeros(num_segments, d);
  for (int64_t i = 0; i < n; ++i) {
    const int64_t s = (*segments)[i];
    const double inv = 1.0 / (*counts)[s];
    double* orow = &out.data[s * d];
    const double* arow = &A.data[i * d];
    for (int64_t j = 0; j < d; ++j) orow[j] += arow[j] * inv;
  }
  return t.record(std::move(out), t.needs_grad(a),
                  [a, segments, counts, d](Tape& t, Var self) {
                    if (!t.needs_grad(a)) return;
                    const Tensor& g = t.grad(self);
                    auto& ga = t.grad_mut(a).data;
                    const int64_t n = t.val(a).rows();
                    for (int64_t i = 0; i < n; ++i) {
                      const int64_t s = (*segments)[i];
                      const double inv = 1.0 / (*counts)[s];
                      const double* grow = &g.data[s * d];
                      double* garow = &ga[i * d];
                      for (int64_t j = 0; j < d; ++j) garow[j] += grow[j] * inv;
                    }
                  });
}

// out[i] = sum over neighbors j of a[j]. The adjacency must be symmetric,
// which makes the op self-adjoint.
inline Var neighbor_sum(Tape& t, Var a, std::shared_ptr<const Csr> adj) {
  const Tensor& A = t.val(a);
  const int64_t n = A.rows(), d = A.cols();
  Tensor out = Tensor::zeros(n, d);
  for (int64_t i = 0; i < n; ++i) {
    double* orow = &out.data[i * d];
    for (int32_t e = adj->offsets[i]; e < adj->offsets[i + 1]; ++e) {
      const double* arow = &A.data[static_cast<int64_t>(adj->nbrs[e]) * d];
      for (int64_t j = 0; j < d; ++j) orow[j] += arow[j];
    }
  }
  return t.record(std::move(out), t.needs_grad(a), [a, adj, d](Tape& t, Var self) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(self);
    auto& ga = t.grad_mut(a).data;
    const int64_t n = t.val(a).rows();
    for (int64_t i = 0; i < n; ++i) {
      double* garow = &ga[i * d];
      for (int32_t e = adj->offsets[i]; e < adj->offsets[i + 1]; ++e) {
        const double* grow = &g.data[static_cast<int64_t>(adj->nbrs[e]) * d];
        for (int64_t j = 0; j < d; ++j) garow[j] += grow[j];
      }
    }
  });
}

// Row scaling: out[i,:] = a[i,:] * w[i], w is Nx1.
inline Var colmul(Tape& t, Var a, Var w) {
  const Tensor& A = t.val(a);
  const Tensor& W = t.val(w);
  if (W.rows() != A.rows() || W.cols() != 1) {
    throw ShapeMismatch("colmul: " + A.shape_str() + " with " + W.shape_str());
  }
  const int64_t n = A.rows(), d = A.cols();
  Tensor out = A;
  for (int64_t i = 0; i < n; ++i) {
    const double wv = W.data[i];
    double* row = &out.data[i * d];
    for (int64_t j = 0; j < d; ++j) row[j] *= wv;
  }
  const bool ng = t.needs_grad(a) || t.needs_grad(w);
  return t.record(std::move(out), ng, [a, w, n, d](Tape& t, Var self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(a)) {
      auto& ga = t.grad_mut(a).data;
      const auto& wv = t.val(w).data;
      for (int64_t i = 0; i < n; ++i) {
        const double s = wv[i];
        for (int64_t j = 0; j < d; ++j) ga[i * d + j] += g.data[i * d + j] * s;
      }
    }
    if (t.needs_grad(w)) {
      auto& gw = t.grad_mut(w).data;
      const auto& av = t.val(a).data;
      for (int64_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < d; ++j) acc += g.data[i * d + j] * av[i * d + j];
        gw[i] += acc;
      }
    }
  });
}

// Softmax over each segment of an Nx1 score column (max-shifted).
inline Var segment_softmax(Tape& t, Var z,
                           std::shared_ptr<const std::vector<int32_t>> segments,
                           int64_t num_segments) {
  const Tensor& Z = t.val(z);
  if (Z.cols() != 1) throw ShapeMismatch("segment_softmax expects Nx1 scores");
  const int64_t n = Z.rows();
  std::vector<double> seg_max(num_segments, -1e300), seg_sum(num_segments, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    const int32_t s = (*segments)[i];
    seg_max[s] = std::max(seg_max[s], Z.data[i]);
  }
  Tensor out = Tensor::zeros(n, 1);
  for (int64_t i = 0; i < n; ++i) {
    const int32_t s = (*segments)[i];
    out.data[i] = std::exp(Z.data[i] - seg_max[s]);
    seg_sum[s] += out.data[i];
  }
  for (int64_t i = 0; i < n; ++i) out.data[i] /= seg_sum[(*segments)[i]];
  return t.record(std::move(out), t.needs_grad(z),
                  [z, segments, num_segments](Tape& t, Var self) {
                    if (!t.needs_grad(z)) return;
                    const Tensor& g = t.grad(self);
                    const Tensor& w = t.val(self);
                    auto& gz = t.grad_mut(z).data;
                    const int64_t n = w.rows();
                    std::vector<double> dot(num_segments, 0.0);
                    for (int64_t i = 0; i < n; ++i) {
                      dot[(*segments)[i]] += w.data[i] * g.data[i];
                    }
                    for (int64_t i = 0; i < n; ++i) {
                      gz[i] += w.data[i] * (g.data[i] - dot[(*segments)[i]]);
                    }
                  });
}

// ---------------------------------------------------------------------------
// elementwise transforms used by losses
// ---------------------------------------------------------------------------

// Elementwise clamp; gradient passes through strictly inside the interval.
inline Var clip(Tape& t, Var a, double lo, double hi) {
  Tensor out = t.val(a);
  for (double& v : out.data) v = std::clamp(v, lo, hi);
  return t.record(std::move(out), t.needs_grad(a), [a, lo, hi](Tape& t, Var self) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(self);
    const auto& av = t.val(a).data;
    auto& ga = t.grad_mut(a).data;
    for (size_t i = 0; i < ga.size(); ++i) {
      if (av[i] > lo && av[i] < hi) ga[i] += g.data[i];
    }
  });
}

// sqrt(x + eps), elementwise; differentiable at x = 0 for eps > 0.
inline Var sqrt_eps(Tape& t, Var a, double eps) {
  Tensor out = t.val(a);
  for (double& v : out.data) v = std::sqrt(v + eps);
  return t.record(std::move(out), t.needs_grad(a), [a](Tape& t, Var self) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(self);
    const auto& ov = t.val(self).data;
    auto& ga = t.grad_mut(a).data;
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i] * 0.5 / ov[i];
  });
}

// smooth |x| = sqrt(x^2 + eps)
inline Var abs_smooth(Tape& t, Var a, double eps) {
  const Tensor& A = t.val(a);
  Tensor out = A;
  for (double& v : out.data) v = std::sqrt(v * v + eps);
  return t.record(std::move(out), t.needs_grad(a), [a](Tape& t, Var self) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(self);
    const auto& av = t.val(a).data;
    const auto& ov = t.val(self).data;
    auto& ga = t.grad_mut(a).data;
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i] * av[i] / ov[i];
  });
}

inline Var abs_val(Tape& t, Var a) {
  Tensor out = t.val(a);
  for (double& v : out.data) v = std::fabs(v);
  return t.record(std::move(out), t.needs_grad(a), [a](Tape& t, Var self) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(self);
    const auto& av = t.val(a).data;
    auto& ga = t.grad_mut(a).data;
    for (size_t i = 0; i < ga.size(); ++i) {
      const double s = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
      ga[i] += g.data[i] * s;
    }
  });
}

// (sum_i w_i * a_i) / denom with constant weights.
inline Var weighted_sum(Tape& t, Var a, Tensor weights, double denom) {
  const Tensor& A = t.val(a);
  require_same_shape(A, weights, "weighted_sum");
  double acc = 0.0;
  for (size_t i = 0; i < A.data.size(); ++i) acc += A.data[i] * weights.data[i];
  auto w = std::make_shared<Tensor>(std::move(weights));
  return t.record(Tensor::scalar(acc / denom), t.needs_grad(a),
                  [a, w, denom](Tape& t, Var self) {
                    if (!t.needs_grad(a)) return;
                    const double g = t.grad(self).data[0] / denom;
                    auto& ga = t.grad_mut(a).data;
                    for (size_t i = 0; i < ga.size(); ++i) {
                      ga[i] += g * w->data[i];
                    }
                  });
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

inline constexpr double kBceEps = 1e-7;
inline constexpr double kRmseEps = 1e-12;

// mean squared error against a constant target
inline Var mse(Tape& t, Var pred, Tensor target) {
  const Tensor& P = t.val(pred);
  require_same_shape(P, target, "mse");
  const auto n = static_cast<double>(P.numel());
  double acc = 0.0;
  for (size_t i = 0; i < P.data.size(); ++i) {
    const double d = P.data[i] - target.data[i];
    acc += d * d;
  }
  auto tc = std::make_shared<Tensor>(std::move(target));
  return t.record(Tensor::scalar(acc / n), t.needs_grad(pred),
                  [pred, tc, n](Tape& t, Var self) {
                    if (!t.needs_grad(pred)) return;
                    const double g = t.grad(self).data[0];
                    const auto& pv = t.val(pred).data;
                    auto& gp = t.grad_mut(pred).data;
                    for (size_t i = 0; i < gp.size(); ++i) {
                      gp[i] += g * 2.0 * (pv[i] - tc->data[i]) / n;
                    }
                  });
}

// sqrt(mse + eps); the epsilon keeps the loss differentiable at zero error.
// Reported RMSE metrics use the exact sqrt instead (see data/metrics.hpp).
inline Var rmse_loss(Tape& t, Var pred, Tensor target) {
  return sqrt_eps(t, mse(t, pred, std::move(target)), kRmseEps);
}

inline Var mae(Tape& t, Var pred, Tensor target) {
  const Tensor& P = t.val(pred);
  require_same_shape(P, target, "mae");
  const auto n = static_cast<double>(P.numel());
  double acc = 0.0;
  for (size_t i = 0; i < P.data.size(); ++i) {
    acc += std::fabs(P.data[i] - target.data[i]);
  }
  auto tc = std::make_shared<Tensor>(std::move(target));
  return t.record(Tensor::scalar(acc / n), t.needs_grad(pred),
                  [pred, tc, n](Tape& t, Var self) {
                    if (!t.needs_grad(pred)) return;
                    const double g = t.grad(self).data[0];
                    const auto& pv = t.val(pred).data;
                    auto& gp = t.grad_mut(pred).data;
                    for (size_t i = 0; i < gp.size(); ++i) {
                      const double d = pv[i] - tc->data[i];
                      const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                      gp[i] += g * s / n;
                    }
                  });
}

// Weighted mean binary cross entropy of probabilities p against constant
// 0/1 targets: (sum_i w_i * bce_i) / denom. p is clamped to [eps, 1-eps].
inline Var bce_weighted(Tape& t, Var p, Tensor targets, Tensor weights,
                        double denom) {
  const Tensor& P = t.val(p);
  require_same_shape(P, targets, "bce");
  require_same_shape(P, weights, "bce weights");
  double acc = 0.0;
  for (size_t i = 0; i < P.data.size(); ++i) {
    const double pc = std::clamp(P.data[i], kBceEps, 1.0 - kBceEps);
    const double c = targets.data[i];
    acc += weights.data[i] * -(c * std::log(pc) + (1.0 - c) * std::log(1.0 - pc));
  }
  auto tc = std::make_shared<Tensor>(std::move(targets));
  auto wc = std::make_shared<Tensor>(std::move(weights));
  return t.record(Tensor::scalar(acc / denom), t.needs_grad(p),
                  [p, tc, wc, denom](Tape& t, Var self) {
                    if (!t.needs_grad(p)) return;
                    const double g = t.grad(self).data[0] / denom;
                    const auto& pv = t.val(p).data;
                    auto& gp = t.grad_mut(p).data;
                    for (size_t i = 0; i < gp.size(); ++i) {
                      const double pc = std::clamp(pv[i], kBceEps, 1.0 - kBceEps);
                      gp[i] += g * wc->data[i] * (pc - tc->data[i]) /
                               (pc * (1.0 - pc));
                    }
                  });
}

// plain mean BCE
inline Var bce(Tape& t, Var p, Tensor targets) {
  const auto n = static_cast<double>(t.val(p).numel());
  Tensor w = targets;
  for (double& v : w.data) v = 1.0;
  return bce_weighted(t, p, std::move(targets), std::move(w), n);
}

// Elementwise cross entropy on logits: softplus(z) - z*y. Stable for any z.
inline Var bce_logits_elem(Tape& t, Var z, Tensor targets) {
  const Tensor& Z = t.val(z);
  require_same_shape(Z, targets, "bce_logits");
  Tensor out = Z;
  for (size_t i = 0; i < out.data.size(); ++i) {
    const double zv = Z.data[i];
    const double sp = zv > 0.0 ? zv + std::log1p(std::exp(-zv))
                               : std::log1p(std::exp(zv));
    out.data[i] = sp - zv * targets.data[i];
  }
  auto tc = std::make_shared<Tensor>(std::move(targets));
  return t.record(std::move(out), t.needs_grad(z), [z, tc](Tape& t, Var self) {
    if (!t.needs_grad(z)) return;
    const Tensor& g = t.grad(self);
    const auto& zv = t.val(z).data;
    auto& gz = t.grad_mut(z).data;
    for (size_t i = 0; i < gz.size(); ++i) {
      gz[i] += g.data[i] * (stable_sigmoid(zv[i]) - tc->data[i]);
    }
  });
}

}  // namespace semimol::nd
