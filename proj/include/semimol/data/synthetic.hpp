#pragma once

#include <algorithm>
#include <queue>
#include <string>
#include <vector>

#include "semimol/chem/molecule.hpp"
#include "semimol/chem/smiles.hpp"
#include "semimol/errors.hpp"
#include "semimol/nd/rng.hpp"

namespace semimol::data {

// ---------------------------------------------------------------------------
// SMILES writer (non-canonical)
// ---------------------------------------------------------------------------

namespace detail {

inline bool bare_token_ok(const chem::MolecularGraph& g, int idx) {
  const chem::Atom& a = g.atoms[idx];
  if (a.formal_charge != 0) return false;
  if (a.element == chem::Element::H || a.element == chem::Element::Si) return false;
  if (a.aromatic) {
    switch (a.element) {
      case chem::Element::B:
      case chem::Element::C:
      case chem::Element::N:
      case chem::Element::O:
      case chem::Element::P:
      case chem::Element::S:
        break;
      default:
        return false;
    }
  }
  int order_sum = 0;
  bool has_multiple = false;
  for (const chem::Bond& b : g.bonds) {
    if (b.a != idx && b.b != idx) continue;
    order_sum += chem::bond_order_sum_contribution(b.order);
    if (b.order == chem::BondOrder::Double || b.order == chem::BondOrder::Triple) {
      has_multiple = true;
    }
  }
  const auto h = chem::implicit_h_for_bare(a.element, a.aromatic, order_sum, has_multiple);
  return h && *h == a.implicit_h;
}

inline std::string atom_token(const chem::MolecularGraph& g, int idx) {
  const chem::Atom& a = g.atoms[idx];
  std::string sym(chem::element_symbol(a.element));
  if (a.aromatic) {
    for (char& c : sym) c = static_cast<char>(std::tolower(c));
  }
  if (bare_token_ok(g, idx)) return sym;
  std::string tok = "[" + sym;
  if (a.implicit_h == 1) {
    tok += "H";
  } else if (a.implicit_h > 1) {
    tok += "H" + std::to_string(a.implicit_h);
  }
  if (a.formal_charge == 1) {
    tok += "+";
  } else if (a.formal_charge == -1) {
    tok += "-";
  } else if (a.formal_charge > 1) {
    tok += "+" + std::to_string(a.formal_charge);
  } else if (a.formal_charge < -1) {
    tok += "-" + std::to_string(-a.formal_charge);
  }
  return tok + "]";
}

inline std::string bond_token(const chem::MolecularGraph& g, const chem::Bond& b) {
  switch (b.order) {
    case chem::BondOrder::Double: return "=";
    case chem::BondOrder::Triple: return "#";
    case chem::BondOrder::Aromatic: return "";
    case chem::BondOrder::Single:
      // explicit single between two aromatic atoms, so a reparse cannot
      // promote an in-ring default bond to aromatic
      if (g.atoms[b.a].aromatic && g.atoms[b.b].aromatic) return "-";
      return "";
  }
  return "";
}

}  // namespace detail

// Writes a connected molecular graph as SMILES. When a stream is given, the
// DFS root and neighbor visit order are randomized, producing a relabeled
// but equivalent string; deterministic atom-0 root otherwise.
inline std::string write_smiles(const chem::MolecularGraph& g,
                                nd::RngStream* order_rng = nullptr) {
  const int n = g.num_atoms();
  if (n == 0) throw Error("write_smiles: empty graph");
  auto adj = g.adjacency();
  int root = 0;
  if (order_rng) {
    root = static_cast<int>(order_rng->uniform_int(n));
    for (auto& nbrs : adj) {
      for (size_t i = nbrs.size(); i > 1; --i) {
        const size_t j = order_rng->uniform_int(i);
        std::swap(nbrs[i - 1], nbrs[j]);
      }
    }
  }

  // classify edges from the chosen root/order
  std::vector<int> parent_bond(n, -1), visit_order;
  std::vector<bool> visited(n, false);
  std::vector<std::vector<int>> children(n);        // tree child atoms
  std::vector<std::vector<int>> ring_bonds_at(n);   // non-tree bonds per atom
  {
    struct Frame {
      int atom;
      size_t next;
    };
    std::vector<Frame> stack{{root, 0}};
    visited[root] = true;
    std::vector<bool> edge_seen(g.num_bonds(), false);
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < adj[f.atom].size()) {
        const auto [nbr, bond] = adj[f.atom][f.next++];
        if (edge_seen[bond]) continue;
        edge_seen[bond] = true;
        if (!visited[nbr]) {
          visited[nbr] = true;
          parent_bond[nbr] = bond;
          children[f.atom].push_back(nbr);
          stack.push_back({nbr, 0});
        } else {
          ring_bonds_at[f.atom].push_back(bond);
          ring_bonds_at[nbr].push_back(bond);
        }
      } else {
        stack.pop_back();
      }
    }
  }
  for (bool v : visited) {
    if (!v) throw Error("write_smiles: graph is disconnected");
  }

  // assign ring-closure digits in preorder, reusing freed digits
  std::vector<int> digit_of_bond(g.num_bonds(), 0);
  std::vector<bool> digit_used(100, false);
  std::string out;
  struct WFrame {
    int atom;
    size_t child;
    bool entered;
  };
  std::vector<WFrame> wstack{{root, 0, false}};
  while (!wstack.empty()) {
    WFrame& f = wstack.back();
    if (!f.entered) {
      f.entered = true;
      out += detail::atom_token(g, f.atom);
      for (int bond : ring_bonds_at[f.atom]) {
        if (digit_of_bond[bond] == 0) {
          int d = 1;
          while (d < 100 && digit_used[d]) ++d;
          if (d == 100) throw Error("write_smiles: out of ring-closure digits");
          digit_used[d] = true;
          digit_of_bond[bond] = d;
          out += detail::bond_token(g, g.bonds[bond]);
        } else {
          digit_used[digit_of_bond[bond]] = false;  // second endpoint frees it
        }
        const int d = digit_of_bond[bond];
        out += d < 10 ? std::to_string(d) : "%" + std::to_string(d);
      }
    }
    if (f.child < children[f.atom].size()) {
      const int c = children[f.atom][f.child++];
      const bool last = f.child == children[f.atom].size();
      const std::string btok = detail::bond_token(g, g.bonds[parent_bond[c]]);
      if (!last) out += "(";
      out += btok;
      // the matching ")" is emitted when this child's subtree pops
      wstack.push_back({c, 0, false});
    } else {
      wstack.pop_back();
      if (!wstack.empty()) {
        WFrame& p = wstack.back();
        // if the child we just finished was not the last, close its branch
        if (p.child < children[p.atom].size()) out += ")";
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// random molecule generation
// ---------------------------------------------------------------------------

struct GeneratorConfig {
  int min_heavy = 6;
  int max_heavy = 16;
  double p_benzene = 0.35;
  double p_ring = 0.25;
  double p_double_cc = 0.05;
  int max_amides = 3;        // amide motifs attempted per molecule
  int max_carbonyls = 2;     // plain carbonyls attempted
  int max_amines = 2;        // lone amines attempted (near-miss distractor)
};

namespace detail {

struct Builder {
  chem::MolecularGraph g;
  std::vector<int> used_valence;
  std::vector<int> cap;  // max total bond order per atom

  int add_atom(chem::Element el, bool aromatic, int capacity) {
    chem::Atom a;
    a.element = el;
    a.aromatic = aromatic;
    g.atoms.push_back(a);
    used_valence.push_back(0);
    cap.push_back(capacity);
    return g.num_atoms() - 1;
  }

  bool bonded(int a, int b) const {
    for (const auto& bd : g.bonds) {
      if ((bd.a == a && bd.b == b) || (bd.a == b && bd.b == a)) return true;
    }
    return false;
  }

  void add_bond(int a, int b, chem::BondOrder order) {
    chem::Bond bd;
    bd.a = a;
    bd.b = b;
    bd.order = order;
    g.bonds.push_back(bd);
    const int ow = order == chem::BondOrder::Double   ? 2
                   : order == chem::BondOrder::Triple ? 3
                                                      : 1;
    used_valence[a] += ow;
    used_valence[b] += ow;
  }

  int free_valence(int i) const { return cap[i] - used_valence[i]; }

  std::vector<int> open_atoms(int need, bool carbon_only = false) const {
    std::vector<int> out;
    for (int i = 0; i < g.num_atoms(); ++i) {
      if (free_valence(i) < need) continue;
      if (carbon_only && g.atoms[i].element != chem::Element::C) continue;
      out.push_back(i);
    }
    return out;
  }
};

}  // namespace detail

// Random drug-like molecule over {C,N,O,S,F,Cl} with optional benzene rings,
// aliphatic ring closures, and independently sprinkled amide / carbonyl /
// amine motifs. All valences are respected by construction.
inline chem::MolecularGraph random_molecule(nd::RngStream& rng,
                                            const GeneratorConfig& cfg = {}) {
  detail::Builder b;
  const int target =
      cfg.min_heavy +
      static_cast<int>(rng.uniform_int(cfg.max_heavy - cfg.min_heavy + 1));
  b.add_atom(chem::Element::C, false, 4);

  auto add_benzene = [&](int attach_to) {
    std::vector<int> ring;
    for (int i = 0; i < 6; ++i) {
      // two aromatic ring bonds plus the reserved pi bond leave one slot
      ring.push_back(b.add_atom(chem::Element::C, true, 4));
      b.used_valence.back() = 3;  // 2 sigma ring bonds + pi reservation
    }
    for (int i = 0; i < 6; ++i) {
      b.g.bonds.push_back({ring[i], ring[(i + 1) % 6], chem::BondOrder::Aromatic, false});
    }
    if (attach_to >= 0) b.add_bond(attach_to, ring[0], chem::BondOrder::Single);
  };

  // skeleton growth
  while (b.g.num_atoms() < target) {
    auto open = b.open_atoms(1);
    if (open.empty()) break;
    const int at = open[rng.uniform_int(open.size())];
    const double roll = rng.uniform();
    if (roll < cfg.p_benzene && b.g.num_atoms() + 6 <= cfg.max_heavy + 4 &&
        b.free_valence(at) >= 1) {
      add_benzene(at);
      continue;
    }
    chem::Element el = chem::Element::C;
    const double e = rng.uniform();
    if (e < 0.08) {
      el = chem::Element::N;
    } else if (e < 0.16) {
      el = chem::Element::O;
    } else if (e < 0.19) {
      el = chem::Element::S;
    } else if (e < 0.22) {
      el = chem::Element::F;
    } else if (e < 0.24) {
      el = chem::Element::Cl;
    }
    const int capac = el == chem::Element::C   ? 4
                      : el == chem::Element::N ? 3
                      : el == chem::Element::O ? 2
                      : el == chem::Element::S ? 2
                                               : 1;
    const int nu = b.add_atom(el, false, capac);
    chem::BondOrder order = chem::BondOrder::Single;
    if (el == chem::Element::C && b.g.atoms[at].element == chem::Element::C &&
        !b.g.atoms[at].aromatic && b.free_valence(at) >= 2 &&
        rng.uniform() < cfg.p_double_cc) {
      order = chem::BondOrder::Double;
    }
    b.add_bond(at, nu, order);
  }

  // motifs: amides (the learning target), plain carbonyls and lone amines as
  // distractors, in independent random counts
  const int n_amide = static_cast<int>(rng.uniform_int(cfg.max_amides + 1));
  const int n_carbonyl = static_cast<int>(rng.uniform_int(cfg.max_carbonyls + 1));
  const int n_amine = static_cast<int>(rng.uniform_int(cfg.max_amines + 1));
  for (int m = 0; m < n_amide; ++m) {
    const auto open = b.open_atoms(1);
    if (open.empty()) break;
    const int at = open[rng.uniform_int(open.size())];
    const int c = b.add_atom(chem::Element::C, false, 4);
    b.add_bond(at, c, chem::BondOrder::Single);
    const int o = b.add_atom(chem::Element::O, false, 2);
    b.add_bond(c, o, chem::BondOrder::Double);
    const int nn = b.add_atom(chem::Element::N, false, 3);
    b.add_bond(c, nn, chem::BondOrder::Single);
  }
  for (int m = 0; m < n_carbonyl; ++m) {
    const auto open = b.open_atoms(2, /*carbon_only=*/true);
    std::vector<int> safe;
    for (int i : open) {
      if (b.g.atoms[i].aromatic) continue;
      // avoid accidental amides from this inserter: skip carbons bonded to N
      bool near_n = false;
      for (const auto& bd : b.g.bonds) {
        const int other = bd.a == i ? bd.b : bd.b == i ? bd.a : -1;
        if (other >= 0 && b.g.atoms[other].element == chem::Element::N) near_n = true;
      }
      if (!near_n) safe.push_back(i);
    }
    if (safe.empty()) break;
    const int at = safe[rng.uniform_int(safe.size())];
    const int o = b.add_atom(chem::Element::O, false, 2);
    b.add_bond(at, o, chem::BondOrder::Double);
  }
  for (int m = 0; m < n_amine; ++m) {
    const auto open = b.open_atoms(1);
    std::vector<int> safe;
    for (int i : open) {
      if (b.g.atoms[i].element == chem::Element::C && !b.g.atoms[i].aromatic) {
        safe.push_back(i);
      }
    }
    if (safe.empty()) break;
    const int at = safe[rng.uniform_int(safe.size())];
    const int nn = b.add_atom(chem::Element::N, false, 3);
    b.add_bond(at, nn, chem::BondOrder::Single);
  }

  // optional aliphatic ring closure between nearby open atoms
  if (rng.uniform() < cfg.p_ring) {
    const auto open = b.open_atoms(1);
    std::vector<std::pair<int, int>> candidates;
    for (size_t x = 0; x < open.size(); ++x) {
      for (size_t y = x + 1; y < open.size(); ++y) {
        const int u = open[x], v = open[y];
        if (b.g.atoms[u].aromatic || b.g.atoms[v].aromatic) continue;
        if (b.bonded(u, v)) continue;
        candidates.push_back({u, v});
      }
    }
    // keep only pairs at graph distance 2..5 (rings of size 3..6)
    if (!candidates.empty()) {
      auto adj = b.g.adjacency();
      auto distance = [&](int s, int t) {
        std::vector<int> dist(b.g.num_atoms(), -1);
        std::queue<int> q;
        q.push(s);
        dist[s] = 0;
        while (!q.empty()) {
          const int u = q.front();
          q.pop();
          if (u == t) return dist[u];
          for (const auto& nb : adj[u]) {
            if (dist[nb.atom] < 0) {
              dist[nb.atom] = dist[u] + 1;
              q.push(nb.atom);
            }
          }
        }
        return -1;
      };
      std::vector<std::pair<int, int>> good;
      for (const auto& [u, v] : candidates) {
        const int d = distance(u, v);
        if (d >= 2 && d <= 5) good.push_back({u, v});
      }
      if (!good.empty()) {
        const auto& [u, v] = good[rng.uniform_int(good.size())];
        b.add_bond(u, v, chem::BondOrder::Single);
      }
    }
  }

  // finalize: ring perception, hydrogens, degrees
  chem::MolecularGraph& g = b.g;
  g.ring_count = chem::detail::mark_ring_bonds(g);
  auto adj = g.adjacency();
  for (int i = 0; i < g.num_atoms(); ++i) {
    chem::Atom& a = g.atoms[i];
    a.degree = static_cast<int>(adj[i].size());
    int order_sum = 0;
    bool has_multiple = false;
    for (const auto& nb : adj[i]) {
      order_sum += chem::bond_order_sum_contribution(g.bonds[nb.bond].order);
      const auto o = g.bonds[nb.bond].order;
      if (o == chem::BondOrder::Double || o == chem::BondOrder::Triple) {
        has_multiple = true;
      }
    }
    const auto h = chem::implicit_h_for_bare(a.element, a.aromatic, order_sum, has_multiple);
    if (!h) throw Error("generator produced a valence violation");
    a.implicit_h = *h;
  }
  return g;
}

// Number of carbonyl carbons (C=O) that also carry a single bond to nitrogen.
inline int count_amide_carbonyls(const chem::MolecularGraph& g) {
  int count = 0;
  for (int i = 0; i < g.num_atoms(); ++i) {
    if (g.atoms[i].element != chem::Element::C) continue;
    bool has_carbonyl_o = false, has_single_n = false;
    for (const auto& b : g.bonds) {
      const int other = b.a == i ? b.b : b.b == i ? b.a : -1;
      if (other < 0) continue;
      if (b.order == chem::BondOrder::Double &&
          g.atoms[other].element == chem::Element::O) {
        has_carbonyl_o = true;
      }
      if (b.order == chem::BondOrder::Single &&
          g.atoms[other].element == chem::Element::N) {
        has_single_n = true;
      }
    }
    if (has_carbonyl_o && has_single_n) count++;
  }
  return count;
}

// ---------------------------------------------------------------------------
// benchmark task
// ---------------------------------------------------------------------------

struct SyntheticTask {
  std::vector<std::string> labeled_smiles;
  std::vector<double> labeled_y;
  std::vector<std::string> test_smiles;
  std::vector<double> test_y;
  std::vector<std::string> pool_smiles;
};

// Regression task: y = amide-carbonyl count + N(0, noise_sd). Labeled, test
// and pool sets are drawn iid from the same generator.
inline SyntheticTask make_motif_task(uint64_t seed, int n_labeled, int n_pool,
                                     int n_test, double noise_sd,
                                     const GeneratorConfig& cfg = {}) {
  auto mol_rng = nd::named_stream(seed, "synthetic-mols");
  auto noise_rng = nd::named_stream(seed, "synthetic-noise");
  SyntheticTask task;
  auto gen = [&](std::vector<std::string>& smiles, std::vector<double>* ys, int n) {
    for (int i = 0; i < n; ++i) {
      const auto g = random_molecule(mol_rng, cfg);
      smiles.push_back(write_smiles(g));
      if (ys) {
        ys->push_back(static_cast<double>(count_amide_carbonyls(g)) +
                      noise_rng.normal(0.0, noise_sd));
      }
    }
  };
  gen(task.labeled_smiles, &task.labeled_y, n_labeled);
  gen(task.test_smiles, &task.test_y, n_test);
  gen(task.pool_smiles, nullptr, n_pool);
  return task;
}

}  // namespace semimol::data
