#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "semimol/data/synthetic.hpp"
#include "semimol/data/task_builder.hpp"
#include "semimol/semisup/engine.hpp"

namespace testutil {

template <typename PtrVec>
uint64_t hash_params(const PtrVec& ps) {
  uint64_t h = 1469598103934665603ull;
  for (const auto* p : ps) {
    for (double v : p->data) {
      uint64_t bits;
      std::memcpy(&bits, &v, 8);
      h = (h ^ bits) * 1099511628211ull;
    }
  }
  return h;
}

// Small motif-count task wired into the trainer's data layout. The labeled
// set is split 80/20 into train/val; the generator's own test set is used
// as the test split.
inline semimol::semisup::TaskData synthetic_task_data(uint64_t seed, int n_labeled,
                                                      int n_pool, int n_test,
                                                      double noise_sd = 0.2,
                                                      int fp_width = 256) {
  using namespace semimol;
  const auto task = data::make_motif_task(seed, n_labeled, n_pool, n_test, noise_sd);
  std::vector<data::LabeledRecord> records;
  for (size_t i = 0; i < task.labeled_smiles.size(); ++i) {
    records.push_back({task.labeled_smiles[i], task.labeled_y[i], std::nullopt, false});
  }
  std::vector<data::UnlabeledRecord> pool;
  for (const auto& s : task.pool_smiles) pool.push_back({s});
  auto td = data::build_task_data(records, pool, {0.8, 0.2, 0.0}, seed,
                                  /*classification=*/false, 2, fp_width);
  for (size_t i = 0; i < task.test_smiles.size(); ++i) {
    td.test.push_back({td.store.add(task.test_smiles[i]), task.test_y[i], false});
  }
  return td;
}

// compact trainer config for fast unit tests
inline semimol::semisup::TrainerConfig tiny_config(uint64_t seed) {
  using namespace semimol;
  semisup::TrainerConfig cfg;
  cfg.seed = seed;
  cfg.lr = 3e-3;
  cfg.batch_size = 16;
  cfg.epochs = 4;
  cfg.warmup_epochs_f = 3;
  cfg.warmup_epochs_g = 3;
  cfg.k = 2;
  cfg.gin.hidden = 8;
  cfg.gin.layers = 2;
  cfg.gin.fc_layers = 2;
  cfg.gin.dropout = 0.1;
  cfg.gin.pooling = models::Pooling::Sum;
  cfg.instructor.fp_width = 256;
  cfg.instructor.embed_dim = 8;
  cfg.instructor.fusion_hidden = 8;
  return cfg;
}

}  // namespace testutil
