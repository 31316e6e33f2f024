#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <string>
#include <string_view>
#include <vector>

#include "semimol/errors.hpp"

namespace semimol::chem {

// Supported element set. Covers typical drug-like organic molecules;
// anything else is rejected at parse time.
enum class Element : uint8_t { B, C, N, O, F, Si, P, S, Cl, Br, I, H };

inline constexpr int kNumElements = 12;

inline constexpr std::array<std::string_view, kNumElements> kElementSymbols = {
    "B", "C", "N", "O", "F", "Si", "P", "S", "Cl", "Br", "I", "H"};

inline constexpr std::array<int, kNumElements> kAtomicNumbers = {
    5, 6, 7, 8, 9, 14, 15, 16, 17, 35, 53, 1};

// Allowed valence states per element (sorted ascending). Implicit hydrogens
// fill up to the smallest state that accommodates the explicit bonds.
inline const std::array<std::vector<int>, kNumElements>& element_valences() {
  static const std::array<std::vector<int>, kNumElements> table = {{
      {3},        // B
      {4},        // C
      {3, 5},     // N
      {2},        // O
      {1},        // F
      {4},        // Si
      {3, 5},     // P
      {2, 4, 6},  // S
      {1},        // Cl
      {1},        // Br
      {1},        // I
      {1},        // H
  }};
  return table;
}

inline std::string_view element_symbol(Element e) {
  return kElementSymbols[static_cast<int>(e)];
}

inline int atomic_number(Element e) { return kAtomicNumbers[static_cast<int>(e)]; }

inline int max_valence(Element e) {
  return element_valences()[static_cast<int>(e)].back();
}

enum class BondOrder : uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

// Order contribution used for valence accounting. Aromatic bonds count as 1;
// the pi system is handled separately during implicit-H assignment.
inline int bond_order_sum_contribution(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 1;
    case BondOrder::Double: return 2;
    case BondOrder::Triple: return 3;
    case BondOrder::Aromatic: return 1;
  }
  return 1;
}

struct Atom {
  Element element = Element::C;
  int formal_charge = 0;
  bool aromatic = false;
  int implicit_h = 0;
  int degree = 0;  // number of incident explicit bonds
};

struct Bond {
  int a = -1;
  int b = -1;
  BondOrder order = BondOrder::Single;
  bool in_ring = false;
};

// Parsed 2D molecule. Bonds are stored once; adjacency queries go through
// neighbors(), which is symmetric by construction.
struct MolecularGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  int ring_count = 0;

  struct Neighbor {
    int atom;
    int bond;
  };

  int num_atoms() const { return static_cast<int>(atoms.size()); }
  int num_bonds() const { return static_cast<int>(bonds.size()); }

  std::vector<std::vector<Neighbor>> adjacency() const {
    std::vector<std::vector<Neighbor>> adj(atoms.size());
    for (int bi = 0; bi < num_bonds(); ++bi) {
      const Bond& b = bonds[bi];
      adj[b.a].push_back({b.b, bi});
      adj[b.b].push_back({b.a, bi});
    }
    return adj;
  }

  bool atom_in_ring(int idx) const {
    for (const Bond& b : bonds) {
      if (b.in_ring && (b.a == idx || b.b == idx)) return true;
    }
    return false;
  }
};

namespace detail {

// Marks bonds that lie on some cycle (i.e. are not bridges) and returns the
// cyclomatic number E - V + components. Iterative DFS so long chains cannot
// overflow the stack.
inline int mark_ring_bonds(MolecularGraph& g) {
  const int n = g.num_atoms();
  auto adj = g.adjacency();
  std::vector<int> disc(n, -1), low(n, 0), parent_bond(n, -1);
  int timer = 0;
  int components = 0;

  struct Frame {
    int atom;
    std::size_t next_edge;
  };

  for (int start = 0; start < n; ++start) {
    if (disc[start] != -1) continue;
    components++;
    std::vector<Frame> stack{{start, 0}};
    disc[start] = low[start] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_edge < adj[f.atom].size()) {
        const auto [nbr, bond] = adj[f.atom][f.next_edge++];
        if (bond == parent_bond[f.atom]) continue;
        if (disc[nbr] == -1) {
          disc[nbr] = low[nbr] = timer++;
          parent_bond[nbr] = bond;
          stack.push_back({nbr, 0});
        } else {
          g.bonds[bond].in_ring = true;  // non-tree edge closes a cycle
          low[f.atom] = std::min(low[f.atom], disc[nbr]);
        }
      } else {
        stack.pop_back();
        if (!stack.empty()) {
          int p = stack.back().atom;
          low[p] = std::min(low[p], low[f.atom]);
          // bridge iff low[child] > disc[parent]; everything else is cyclic
          if (low[f.atom] <= disc[p]) g.bonds[parent_bond[f.atom]].in_ring = true;
        }
      }
    }
  }
  return g.num_bonds() - n + components;
}

}  // namespace detail

// Hydrogen count a bare (non-bracket) SMILES atom receives given its bond
// context, or nullopt when the context exceeds every allowed valence.
// Lowercase heteroatoms never get implicit hydrogens; aromatic carbon (and
// boron) reserves one pi bond unless an explicit double/triple is present.
inline std::optional<int> implicit_h_for_bare(Element el, bool aromatic,
                                              int order_sum, bool has_multiple) {
  const auto& valences = element_valences()[static_cast<int>(el)];
  if (aromatic) {
    if (el == Element::C || el == Element::B) {
      const int ds = order_sum + (has_multiple ? 0 : 1);
      const int dv = el == Element::C ? 4 : 3;
      if (ds > dv) return std::nullopt;
      return dv - ds;
    }
    if (order_sum > valences.back()) return std::nullopt;
    return 0;
  }
  for (int v : valences) {
    if (v >= order_sum) return v - order_sum;
  }
  return std::nullopt;
}
inline std::vector<std::string> check_graph_invariants(const MolecularGraph& g) {
  std::vector<std::string> issues;
  const int n = g.num_atoms();
  std::vector<int> degree(n, 0);
  for (int bi = 0; bi < g.num_bonds(); ++bi) {
    const Bond& b = g.bonds[bi];
    if (b.a < 0 || b.a >= n || b.b < 0 || b.b >= n) {
      issues.push_back("bond " + std::to_string(bi) + " endpoint out of range");
      continue;
    }
    if (b.a == b.b) {
      issues.push_back("bond " + std::to_string(bi) + " is a self-loop");
      continue;
    }
    degree[b.a]++;
    degree[b.b]++;
    if (b.order == BondOrder::Aromatic &&
        (!g.atoms[b.a].aromatic || !g.atoms[b.b].aromatic)) {
      issues.push_back("aromatic bond " + std::to_string(bi) +
                       " touches a non-aromatic atom");
    }
  }
  // stored-once check: no duplicate atom pair
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(g.bonds.size());
  for (const Bond& b : g.bonds) {
    pairs.emplace_back(std::min(b.a, b.b), std::max(b.a, b.b));
  }
  std::sort(pairs.begin(), pairs.end());
  for (size_t i = 1; i < pairs.size(); ++i) {
    if (pairs[i] == pairs[i - 1]) {
      issues.push_back("duplicate bond between atoms " +
                       std::to_string(pairs[i].first) + " and " +
                       std::to_string(pairs[i].second));
    }
  }
  for (int i = 0; i < n; ++i) {
    if (g.atoms[i].degree != degree[i]) {
      issues.push_back("atom " + std::to_string(i) +
                       " degree field does not match incident bond count");
    }
    if (g.atoms[i].implicit_h < 0) {
      issues.push_back("atom " + std::to_string(i) + " negative hydrogen count");
    }
  }
  if (g.ring_count < 0) issues.push_back("negative ring_count");
  return issues;
}

}  // namespace semimol::chem
