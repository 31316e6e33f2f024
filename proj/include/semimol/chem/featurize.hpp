#pragma once

#include <algorithm>

#include "semimol/chem/molecule.hpp"
#include "semimol/nd/tensor.hpp"

namespace semimol::chem {

// Node row layout: element one-hot (12) | degree one-hot 0..6 (7) |
// formal charge * 0.25 (1) | aromatic flag (1) | implicit-H one-hot 0..4 (5).
// Edge row layout: bond-order one-hot (4) | in-ring flag (1).
inline constexpr int kFeaturizerVersion = 1;
inline constexpr int kNodeFeatureDim = kNumElements + 7 + 1 + 1 + 5;  // 26
inline constexpr int kEdgeFeatureDim = 4 + 1;
inline constexpr int kNodeOneHotBlocks = 3;

struct FeatureMatrices {
  nd::Tensor node_features;  // |atoms| x kNodeFeatureDim
  nd::Tensor edge_features;  // |bonds| x kEdgeFeatureDim
};

inline FeatureMatrices featurize(const MolecularGraph& g) {
  FeatureMatrices out;
  out.node_features = nd::Tensor::zeros(g.num_atoms(), kNodeFeatureDim);
  out.edge_features = nd::Tensor::zeros(g.num_bonds(), kEdgeFeatureDim);

  for (int i = 0; i < g.num_atoms(); ++i) {
    const Atom& a = g.atoms[i];
    double* row = &out.node_features.at(i, 0);
    row[static_cast<int>(a.element)] = 1.0;
    const int deg = std::clamp(a.degree, 0, 6);
    row[kNumElements + deg] = 1.0;
    row[kNumElements + 7] = 0.25 * static_cast<double>(a.formal_charge);
    row[kNumElements + 8] = a.aromatic ? 1.0 : 0.0;
    const int h = std::clamp(a.implicit_h, 0, 4);
    row[kNumElements + 9 + h] = 1.0;
  }
  for (int bi = 0; bi < g.num_bonds(); ++bi) {
    const Bond& b = g.bonds[bi];
    double* row = &out.edge_features.at(bi, 0);
    row[static_cast<int>(b.order) - 1] = 1.0;
    row[4] = b.in_ring ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace semimol::chem
