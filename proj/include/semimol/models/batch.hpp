#pragma once

#include <memory>
#include <vector>

#include "semimol/chem/featurize.hpp"
#include "semimol/chem/fingerprint.hpp"
#include "semimol/chem/molecule.hpp"
#include "semimol/nd/tape.hpp"

namespace semimol::models {

// A batch of molecules in the two forms the models consume: stacked node
// features with a shared symmetric adjacency, and a fingerprint matrix.
// Either view may be empty if no consumer asked for it.
struct GraphBatch {
  nd::Tensor node_features;  // N_total x d_node
  std::shared_ptr<nd::Csr> adj;
  std::shared_ptr<std::vector<int32_t>> segments;  // node -> graph index
  int64_t num_graphs = 0;

  nd::Tensor fingerprints;  // num_graphs x width
};

// Stacks per-molecule feature matrices and adjacency into one batch.
inline GraphBatch make_graph_batch(
    const std::vector<const chem::MolecularGraph*>& graphs,
    const std::vector<const chem::FeatureMatrices*>& feats) {
  GraphBatch b;
  b.num_graphs = static_cast<int64_t>(graphs.size());
  int64_t total_nodes = 0;
  for (const auto* g : graphs) total_nodes += g->num_atoms();

  b.node_features = nd::Tensor::zeros(total_nodes, chem::kNodeFeatureDim);
  b.segments = std::make_shared<std::vector<int32_t>>();
  b.segments->reserve(total_nodes);
  b.adj = std::make_shared<nd::Csr>();
  b.adj->offsets.assign(total_nodes + 1, 0);

  int64_t base = 0;
  for (size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto& g = *graphs[gi];
    const auto& f = *feats[gi];
    const int n = g.num_atoms();
    std::copy(f.node_features.data.begin(), f.node_features.data.end(),
              b.node_features.data.begin() + base * chem::kNodeFeatureDim);
    for (int i = 0; i < n; ++i) b.segments->push_back(static_cast<int32_t>(gi));
    for (const auto& bond : g.bonds) {
      b.adj->offsets[base + bond.a + 1]++;
      b.adj->offsets[base + bond.b + 1]++;
    }
    base += n;
  }
  for (int64_t i = 0; i < total_nodes; ++i) b.adj->offsets[i + 1] += b.adj->offsets[i];
  std::vector<int32_t> cursor(b.adj->offsets.begin(), b.adj->offsets.end() - 1);
  b.adj->nbrs.assign(b.adj->offsets.back(), 0);
  base = 0;
  for (const auto* gp : graphs) {
    for (const auto& bond : gp->bonds) {
      const auto u = static_cast<int32_t>(base + bond.a);
      const auto v = static_cast<int32_t>(base + bond.b);
      b.adj->nbrs[cursor[u]++] = v;
      b.adj->nbrs[cursor[v]++] = u;
    }
    base += gp->num_atoms();
  }
  return b;
}

inline nd::Tensor fingerprint_matrix(const std::vector<const chem::Fingerprint*>& fps) {
  if (fps.empty()) return nd::Tensor::zeros(0, 0);
  const int width = fps[0]->width;
  nd::Tensor out = nd::Tensor::zeros(static_cast<int64_t>(fps.size()), width);
  for (size_t i = 0; i < fps.size(); ++i) {
    for (int bit = 0; bit < width; ++bit) {
      if (fps[i]->test(bit)) out.at(static_cast<int64_t>(i), bit) = 1.0;
    }
  }
  return out;
}

}  // namespace semimol::models
