#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "semimol/data/records.hpp"
#include "semimol/errors.hpp"
#include "semimol/nd/rng.hpp"

namespace semimol::data {

struct SplitIndices {
  std::vector<int> train, val, test;
};

// Stratified train/val/test split. If every record carries a split_tag the
// tags are honored verbatim; otherwise records are binned (label quantiles
// for regression, classes for classification), shuffled within bins, and
// assigned by a largest-deficit walk so the global sizes match the ratios
// exactly (largest-remainder rounding).
inline SplitIndices split(const std::vector<LabeledRecord>& records,
                          const std::array<double, 3>& ratios, nd::RngStream& rng,
                          bool classification = false) {
  const double rsum = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(rsum - 1.0) > 1e-9) {
    throw RatioError("split ratios must sum to 1, got " + std::to_string(rsum));
  }
  for (double r : ratios) {
    if (r < 0.0) throw RatioError("split ratios must be non-negative");
  }
  const int n = static_cast<int>(records.size());
  SplitIndices out;

  bool all_tagged = n > 0;
  for (const auto& r : records) {
    if (!r.split_tag) {
      all_tagged = false;
      break;
    }
  }
  if (all_tagged) {
    for (int i = 0; i < n; ++i) {
      switch (*records[i].split_tag) {
        case SplitTag::Train: out.train.push_back(i); break;
        case SplitTag::Val: out.val.push_back(i); break;
        case SplitTag::Test: out.test.push_back(i); break;
      }
    }
    return out;
  }

  // global target sizes by largest remainder
  std::array<int, 3> target{};
  std::array<double, 3> frac{};
  int assigned_total = 0;
  for (int s = 0; s < 3; ++s) {
    const double want = ratios[s] * n;
    target[s] = static_cast<int>(std::floor(want));
    frac[s] = want - target[s];
    assigned_total += target[s];
  }
  while (assigned_total < n) {
    int best = 0;
    for (int s = 1; s < 3; ++s) {
      if (frac[s] > frac[best]) best = s;
    }
    target[best]++;
    frac[best] = -1.0;
    assigned_total++;
  }

  // build strata
  std::vector<std::vector<int>> bins;
  if (classification) {
    std::vector<int> pos, neg;
    for (int i = 0; i < n; ++i) (records[i].y != 0.0 ? pos : neg).push_back(i);
    if (!neg.empty()) bins.push_back(std::move(neg));
    if (!pos.empty()) bins.push_back(std::move(pos));
  } else {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return records[a].y < records[b].y;
    });
    const int nbins = std::max(1, std::min(10, n / 10));
    const int per = (n + nbins - 1) / nbins;
    for (int b = 0; b < nbins; ++b) {
      std::vector<int> bin;
      for (int i = b * per; i < std::min(n, (b + 1) * per); ++i) bin.push_back(order[i]);
      if (!bin.empty()) bins.push_back(std::move(bin));
    }
  }
  for (auto& bin : bins) rng.shuffle(bin);

  std::array<int, 3> taken{0, 0, 0};
  std::array<std::vector<int>*, 3> dest{&out.train, &out.val, &out.test};
  for (const auto& bin : bins) {
    for (int idx : bin) {
      int best = -1;
      double best_deficit = -1.0;
      for (int s = 0; s < 3; ++s) {
        if (taken[s] >= target[s]) continue;
        const double deficit =
            static_cast<double>(target[s] - taken[s]) / static_cast<double>(target[s]);
        if (deficit > best_deficit) {
          best_deficit = deficit;
          best = s;
        }
      }
      if (best < 0) best = 0;  // all targets met (rounding edge)
      dest[best]->push_back(idx);
      taken[best]++;
    }
  }
  for (auto* d : dest) std::sort(d->begin(), d->end());
  return out;
}

}  // namespace semimol::data
