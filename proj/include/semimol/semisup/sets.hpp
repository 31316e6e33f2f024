#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "semimol/errors.hpp"

namespace semimol::semisup {

// One unlabeled sample carrying its current proxy label and confidence.
// The observability mask is 0 for every member of the pseudo pool by
// construction; labeled examples carry c = 1 and never appear here.
struct PseudoSample {
  int mol = -1;          // molecule id in the store
  double y_hat = 0.0;    // proxy label from the target model
  double p = 0.5;        // instructor confidence
  int epoch_assigned = -1;
};

// Indices of pool members admitted into the hybrid training set D'' by the
// confidence threshold; ties at p == gamma are admitted.
inline std::vector<int> admit_by_threshold(const std::vector<PseudoSample>& pool,
                                           double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw Error("admission threshold must be in [0,1]");
  std::vector<int> admitted;
  for (size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].p >= gamma) admitted.push_back(static_cast<int>(i));
  }
  return admitted;
}

// Top-fraction admission by confidence rank (percentile-scores baseline).
// Ties resolve by ascending pool index; the result is in ascending index
// order like admit_by_threshold.
inline std::vector<int> admit_top_fraction(const std::vector<PseudoSample>& pool,
                                           double fraction) {
  if (fraction < 0.0 || fraction > 1.0) throw Error("admission fraction must be in [0,1]");
  const auto count = static_cast<size_t>(
      std::llround(fraction * static_cast<double>(pool.size())));
  std::vector<int> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (pool[a].p != pool[b].p) return pool[a].p > pool[b].p;
    return a < b;
  });
  order.resize(std::min(count, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace semimol::semisup
