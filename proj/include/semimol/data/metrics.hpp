#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "semimol/errors.hpp"

namespace semimol::data {

inline void require_equal_lengths(size_t a, size_t b, const char* what) {
  if (a != b) throw ShapeMismatch(std::string(what) + ": length mismatch");
}

// exact root mean squared error (reporting metric; training uses the
// eps-smoothed loss in nd/tape.hpp)
inline double rmse(const std::vector<double>& pred, const std::vector<double>& target) {
  require_equal_lengths(pred.size(), target.size(), "rmse");
  if (pred.empty()) throw EmptyStratum("rmse over empty set");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

inline double mae(const std::vector<double>& pred, const std::vector<double>& target) {
  require_equal_lengths(pred.size(), target.size(), "mae");
  if (pred.empty()) throw EmptyStratum("mae over empty set");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) acc += std::fabs(pred[i] - target[i]);
  return acc / static_cast<double>(pred.size());
}

namespace detail {

inline std::vector<size_t> flagged_indices(const std::vector<bool>& flags) {
  std::vector<size_t> idx;
  for (size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) idx.push_back(i);
  }
  return idx;
}

}  // namespace detail

// metric restricted to cliff-flagged records
inline double cliff_rmse(const std::vector<double>& pred,
                         const std::vector<double>& target,
                         const std::vector<bool>& flags) {
  require_equal_lengths(pred.size(), flags.size(), "cliff_rmse flags");
  const auto idx = detail::flagged_indices(flags);
  if (idx.empty()) throw EmptyStratum("no cliff-flagged records");
  std::vector<double> p, t;
  for (size_t i : idx) {
    p.push_back(pred[i]);
    t.push_back(target[i]);
  }
  return rmse(p, t);
}

inline double cliff_mae(const std::vector<double>& pred,
                        const std::vector<double>& target,
                        const std::vector<bool>& flags) {
  require_equal_lengths(pred.size(), flags.size(), "cliff_mae flags");
  const auto idx = detail::flagged_indices(flags);
  if (idx.empty()) throw EmptyStratum("no cliff-flagged records");
  std::vector<double> p, t;
  for (size_t i : idx) {
    p.push_back(pred[i]);
    t.push_back(target[i]);
  }
  return mae(p, t);
}

// ROC-AUC as the Mann-Whitney rank statistic with midranks for ties.
inline double roc_auc(const std::vector<double>& scores,
                      const std::vector<int>& labels) {
  require_equal_lengths(scores.size(), labels.size(), "roc_auc");
  size_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l != 0 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) {
    throw SingleClass("roc_auc needs both classes present");
  }
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>((i + 1) + (j + 1));
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]] != 0) rank_sum_pos += midrank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

inline double cliff_roc_auc(const std::vector<double>& scores,
                            const std::vector<int>& labels,
                            const std::vector<bool>& flags) {
  require_equal_lengths(scores.size(), flags.size(), "cliff_roc_auc flags");
  const auto idx = detail::flagged_indices(flags);
  if (idx.empty()) throw EmptyStratum("no cliff-flagged records");
  std::vector<double> s;
  std::vector<int> l;
  for (size_t i : idx) {
    s.push_back(scores[i]);
    l.push_back(labels[i]);
  }
  return roc_auc(s, l);
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw EmptyStratum("median of empty set");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace semimol::data
