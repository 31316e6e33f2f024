#pragma once

#include <array>
#include <string>
#include <vector>

#include "semimol/data/records.hpp"
#include "semimol/data/split.hpp"
#include "semimol/semisup/engine.hpp"

namespace semimol::data {

// Assembles the trainer's view of a dataset: parsed molecule store, split
// labeled examples (cliff flags carried over), and the unlabeled pool.
// Records must already be validated by the loaders.
inline semisup::TaskData build_task_data(const std::vector<LabeledRecord>& records,
                                         const std::vector<UnlabeledRecord>& pool,
                                         const std::array<double, 3>& ratios,
                                         uint64_t seed, bool classification,
                                         int fp_radius, int fp_width) {
  semisup::TaskData data{semisup::MoleculeStore(fp_radius, fp_width), {}, {}, {}, {}};
  std::vector<int> mol_of_record(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    mol_of_record[i] = data.store.add(records[i].smiles);
  }
  auto split_rng = nd::named_stream(seed, "split");
  const auto idx = split(records, ratios, split_rng, classification);
  auto fill = [&](const std::vector<int>& part, std::vector<semisup::LabeledExample>& out) {
    for (int i : part) {
      out.push_back({mol_of_record[i], records[i].y, records[i].cliff_flag});
    }
  };
  fill(idx.train, data.train);
  fill(idx.val, data.val);
  fill(idx.test, data.test);
  for (const auto& u : pool) data.pool.push_back(data.store.add(u.smiles));
  return data;
}

}  // namespace semimol::data
