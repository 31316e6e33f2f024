#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "semimol/chem/fingerprint.hpp"
#include "semimol/data/records.hpp"
#include "semimol/errors.hpp"

namespace semimol::data {

// A pair of structurally similar molecules with a large potency gap.
struct CliffPair {
  int i = -1;  // record indices, i < j
  int j = -1;
  double similarity = 0.0;
  double delta_potency = 0.0;
};

struct CliffResult {
  std::vector<CliffPair> pairs;       // ascending (i, j)
  std::vector<bool> flags;            // one per record
  int flagged_count = 0;
};

// Flags all record pairs whose structural similarity reaches sim_threshold
// and whose label gap reaches potency_threshold. Similarity is the max of
// fingerprint Tanimoto and SMILES string similarity.
inline CliffResult detect_cliffs(const std::vector<LabeledRecord>& records,
                                 double sim_threshold, double potency_threshold,
                                 int fp_radius = 2, int fp_width = 1024) {
  if (!(sim_threshold > 0.0 && sim_threshold <= 1.0)) {
    throw Error("cliff similarity threshold must be in (0, 1]");
  }
  if (!(potency_threshold > 0.0)) {
    throw Error("cliff potency threshold must be > 0");
  }
  const int n = static_cast<int>(records.size());
  std::vector<chem::Fingerprint> fps;
  fps.reserve(n);
  for (const auto& r : records) {
    fps.push_back(chem::morgan_fingerprint(chem::parse_smiles(r.smiles), fp_radius,
                                           fp_width));
  }
  CliffResult out;
  out.flags.assign(n, false);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dy = std::fabs(records[i].y - records[j].y);
      if (dy < potency_threshold) continue;
      double sim = chem::tanimoto(fps[i], fps[j]);
      if (sim < sim_threshold) {
        // string similarity can only rescue the pair; strings are already
        // validated, so skip the re-parse the public op performs
        const auto& a = records[i].smiles;
        const auto& b = records[j].smiles;
        const size_t maxlen = std::max(a.size(), b.size());
        const double ssim =
            maxlen == 0
                ? 1.0
                : 1.0 - static_cast<double>(chem::levenshtein(a, b)) / maxlen;
        sim = std::max(sim, ssim);
      }
      if (sim >= sim_threshold) {
        out.pairs.push_back({i, j, sim, dy});
        out.flags[i] = true;
        out.flags[j] = true;
      }
    }
  }
  for (bool f : out.flags) out.flagged_count += f;
  return out;
}

}  // namespace semimol::data
