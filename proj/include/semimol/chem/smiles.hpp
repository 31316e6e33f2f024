#pragma once

#include <cctype>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "semimol/chem/molecule.hpp"
#include "semimol/errors.hpp"

namespace semimol::chem {

inline constexpr std::size_t kMaxSmilesLength = 400;

// Non-fatal issues encountered while parsing. Stereo markers are accepted
// and dropped; callers that care can inspect the counters.
struct ParseWarnings {
  int stereo_ignored = 0;
};

namespace detail {

inline std::optional<Element> lookup_element(std::string_view sym) {
  for (int i = 0; i < kNumElements; ++i) {
    if (kElementSymbols[i] == sym) return static_cast<Element>(i);
  }
  return std::nullopt;
}

// Aromatic lowercase forms admitted outside and inside brackets.
inline std::optional<Element> lookup_aromatic(char c) {
  switch (c) {
    case 'b': return Element::B;
    case 'c': return Element::C;
    case 'n': return Element::N;
    case 'o': return Element::O;
    case 'p': return Element::P;
    case 's': return Element::S;
    default: return std::nullopt;
  }
}

struct PendingBond {
  std::optional<BondOrder> order;  // explicit symbol, if any
  std::size_t offset = 0;
};

struct RingBookmark {
  int atom = -1;
  std::optional<BondOrder> order;
  std::size_t offset = 0;
};

inline void assign_hydrogens_and_validate(MolecularGraph& g,
                                          const std::vector<int>& bracket_h,
                                          const std::vector<std::size_t>& atom_offsets) {
  auto adj = g.adjacency();
  for (int i = 0; i < g.num_atoms(); ++i) {
    Atom& a = g.atoms[i];
    a.degree = static_cast<int>(adj[i].size());
    int order_sum = 0;
    bool has_multiple = false;
    for (const auto& nb : adj[i]) {
      const BondOrder o = g.bonds[nb.bond].order;
      order_sum += bond_order_sum_contribution(o);
      if (o == BondOrder::Double || o == BondOrder::Triple) has_multiple = true;
    }
    const auto& valences = element_valences()[static_cast<int>(a.element)];

    if (bracket_h[i] >= 0) {
      // bracket atoms trust the written hydrogen count
      a.implicit_h = bracket_h[i];
      const int total = order_sum + a.implicit_h + (a.aromatic && !has_multiple ? 1 : 0);
      const int allowed = valences.back() + std::abs(a.formal_charge);
      if (total > allowed) {
        throw ParseError("valence violation on bracket atom " +
                             std::string(element_symbol(a.element)),
                         atom_offsets[i]);
      }
      continue;
    }

    const auto h = implicit_h_for_bare(a.element, a.aromatic, order_sum, has_multiple);
    if (!h) {
      throw ParseError("valence violation on atom " +
                           std::string(element_symbol(a.element)),
                       atom_offsets[i]);
    }
    a.implicit_h = *h;
  }
}

}  // namespace detail

// Parses a SMILES subset: organic-subset atoms, bracket atoms with hydrogen
// counts and charges, bonds - = # :, branches, ring closures 1-9 and %nn,
// aromatic lowercase forms. Stereo markers (/ \ @) are accepted and ignored.
// Isotopes and dot-disconnected components are rejected.
inline MolecularGraph parse_smiles(std::string_view smiles,
                                   ParseWarnings* warnings = nullptr) {
  if (smiles.empty()) throw ParseError("empty SMILES", 0);
  if (smiles.size() > kMaxSmilesLength) {
    throw ParseError("SMILES longer than " + std::to_string(kMaxSmilesLength) +
                         " characters",
                     kMaxSmilesLength);
  }

  MolecularGraph g;
  std::vector<int> bracket_h;                 // -1 when not a bracket atom
  std::vector<std::size_t> atom_offsets;
  std::vector<std::pair<int, std::size_t>> branch_stack;  // (prev atom, offset of '(')
  std::map<int, detail::RingBookmark> open_rings;
  std::set<std::pair<int, int>> seen_pairs;
  int prev_atom = -1;
  detail::PendingBond pending;
  ParseWarnings local_warn;
  ParseWarnings& warn = warnings ? *warnings : local_warn;

  auto add_bond = [&](int a, int b, std::optional<BondOrder> order, std::size_t off) {
    if (a == b) throw ParseError("ring closure bonds an atom to itself", off);
    auto key = std::minmax(a, b);
    if (!seen_pairs.insert({key.first, key.second}).second) {
      throw ParseError("duplicate bond between the same atom pair", off);
    }
    Bond bond;
    bond.a = a;
    bond.b = b;
    // Default order is resolved after ring perception: single, or aromatic
    // when both endpoints are aromatic and the bond sits in a ring.
    bond.order = order.value_or(BondOrder::Single);
    g.bonds.push_back(bond);
    return static_cast<int>(g.bonds.size()) - 1;
  };

  std::vector<std::pair<int, bool>> default_order_bonds;  // (bond idx, was-default)

  auto attach_atom = [&](Atom atom, int h_spec, std::size_t off) {
    g.atoms.push_back(atom);
    bracket_h.push_back(h_spec);
    atom_offsets.push_back(off);
    const int idx = g.num_atoms() - 1;
    if (prev_atom >= 0) {
      const bool was_default = !pending.order.has_value();
      const int bi = add_bond(prev_atom, idx, pending.order, off);
      default_order_bonds.push_back({bi, was_default});
    } else if (pending.order.has_value()) {
      throw ParseError("bond symbol with no preceding atom", pending.offset);
    }
    pending = {};
    prev_atom = idx;
  };

  std::size_t i = 0;
  const auto n = smiles.size();
  while (i < n) {
    const char c = smiles[i];
    if (c == '(') {
      if (prev_atom < 0) throw ParseError("branch opens before any atom", i);
      branch_stack.push_back({prev_atom, i});
      ++i;
    } else if (c == ')') {
      if (branch_stack.empty()) throw ParseError("unopened branch", i);
      if (pending.order.has_value()) {
        throw ParseError("dangling bond symbol before ')'", pending.offset);
      }
      prev_atom = branch_stack.back().first;
      branch_stack.pop_back();
      ++i;
    } else if (c == '-' || c == '=' || c == '#' || c == ':') {
      if (pending.order.has_value()) throw ParseError("two bond symbols in a row", i);
      switch (c) {
        case '-': pending.order = BondOrder::Single; break;
        case '=': pending.order = BondOrder::Double; break;
        case '#': pending.order = BondOrder::Triple; break;
        case ':': pending.order = BondOrder::Aromatic; break;
      }
      pending.offset = i;
      ++i;
    } else if (c == '/' || c == '\\') {
      // up/down stereo bond: treated as a plain single bond
      warn.stereo_ignored++;
      if (!pending.order.has_value()) {
        pending.order = BondOrder::Single;
        pending.offset = i;
      }
      ++i;
    } else if (c == '.') {
      throw ParseError("dot-disconnected components are not supported", i);
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
      int digit;
      std::size_t off = i;
      if (c == '%') {
        if (i + 2 >= n || !std::isdigit(static_cast<unsigned char>(smiles[i + 1])) ||
            !std::isdigit(static_cast<unsigned char>(smiles[i + 2]))) {
          throw ParseError("'%' ring closure needs two digits", i);
        }
        digit = (smiles[i + 1] - '0') * 10 + (smiles[i + 2] - '0');
        i += 3;
      } else {
        digit = c - '0';
        ++i;
      }
      if (prev_atom < 0) throw ParseError("ring closure before any atom", off);
      auto it = open_rings.find(digit);
      if (it == open_rings.end()) {
        open_rings[digit] = {prev_atom, pending.order, off};
        pending = {};
      } else {
        detail::RingBookmark mark = it->second;
        open_rings.erase(it);
        std::optional<BondOrder> order = pending.order;
        if (mark.order.has_value()) {
          if (order.has_value() && *order != *mark.order) {
            throw ParseError("conflicting bond orders on ring closure", off);
          }
          order = mark.order;
        }
        const bool was_default = !order.has_value();
        const int bi = add_bond(mark.atom, prev_atom, order, off);
        default_order_bonds.push_back({bi, was_default});
        pending = {};
      }
    } else if (c == '[') {
      const std::size_t open_off = i;
      ++i;
      if (i < n && std::isdigit(static_cast<unsigned char>(smiles[i]))) {
        throw ParseError("isotope specifications are not supported", i);
      }
      Atom atom;
      // element symbol: uppercase(+lowercase) or aromatic lowercase
      if (i >= n) throw ParseError("unterminated bracket atom", open_off);
      if (std::islower(static_cast<unsigned char>(smiles[i]))) {
        auto el = detail::lookup_aromatic(smiles[i]);
        // two-letter lowercase (e.g. "si") is not a valid aromatic form
        if (!el || (i + 1 < n && std::islower(static_cast<unsigned char>(smiles[i + 1])) &&
                    smiles[i + 1] != 'h')) {
          throw ParseError("unknown element symbol", i);
        }
        atom.element = *el;
        atom.aromatic = true;
        ++i;
      } else if (std::isupper(static_cast<unsigned char>(smiles[i]))) {
        std::string sym(1, smiles[i]);
        if (i + 1 < n && std::islower(static_cast<unsigned char>(smiles[i + 1]))) {
          auto two = detail::lookup_element(sym + smiles[i + 1]);
          if (!two) throw ParseError("unknown element symbol", i);
          atom.element = *two;
          i += 2;
        } else {
          auto one = detail::lookup_element(sym);
          if (!one) throw ParseError("unknown element symbol", i);
          atom.element = *one;
          ++i;
        }
      } else {
        throw ParseError("expected element symbol in bracket atom", i);
      }
      // chirality markers: ignored
      while (i < n && smiles[i] == '@') {
        warn.stereo_ignored++;
        ++i;
      }
      int h_count = 0;
      if (i < n && smiles[i] == 'H') {
        h_count = 1;
        ++i;
        if (i < n && std::isdigit(static_cast<unsigned char>(smiles[i]))) {
          h_count = smiles[i] - '0';
          ++i;
        }
      }
      int charge = 0;
      if (i < n && (smiles[i] == '+' || smiles[i] == '-')) {
        const int sign = smiles[i] == '+' ? 1 : -1;
        const char sym = smiles[i];
        ++i;
        if (i < n && std::isdigit(static_cast<unsigned char>(smiles[i]))) {
          charge = sign * (smiles[i] - '0');
          ++i;
        } else {
          charge = sign;
          while (i < n && smiles[i] == sym) {
            charge += sign;
            ++i;
          }
        }
      }
      if (i >= n || smiles[i] != ']') {
        throw ParseError("unterminated bracket atom", open_off);
      }
      ++i;
      atom.formal_charge = charge;
      attach_atom(atom, h_count, open_off);
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      // organic subset, two-letter symbols first
      Atom atom;
      std::size_t off = i;
      std::string sym(1, c);
      if (i + 1 < n && std::islower(static_cast<unsigned char>(smiles[i + 1]))) {
        const std::string two = sym + smiles[i + 1];
        if (two == "Cl" || two == "Br") {
          atom.element = *detail::lookup_element(two);
          i += 2;
          attach_atom(atom, -1, off);
          continue;
        }
      }
      if (sym == "B" || sym == "C" || sym == "N" || sym == "O" || sym == "F" ||
          sym == "P" || sym == "S" || sym == "I") {
        atom.element = *detail::lookup_element(sym);
        ++i;
        attach_atom(atom, -1, off);
      } else {
        throw ParseError("unknown element symbol", i);
      }
    } else if (std::islower(static_cast<unsigned char>(c))) {
      auto el = detail::lookup_aromatic(c);
      if (!el) throw ParseError("unknown element symbol", i);
      Atom atom;
      atom.element = *el;
      atom.aromatic = true;
      attach_atom(atom, -1, i);
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      throw ParseError("whitespace inside SMILES", i);
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", i);
    }
  }

  if (!branch_stack.empty()) {
    throw ParseError("unclosed branch", branch_stack.back().second);
  }
  if (pending.order.has_value()) {
    throw ParseError("dangling bond symbol at end of input", pending.offset);
  }
  if (!open_rings.empty()) {
    throw ParseError("unmatched ring-closure digit", open_rings.begin()->second.offset);
  }
  if (g.atoms.empty()) throw ParseError("no atoms in SMILES", 0);

  g.ring_count = detail::mark_ring_bonds(g);

  // Resolve default bond orders: aromatic when both ends are aromatic and
  // the bond is in a ring, single otherwise.
  for (const auto& [bi, was_default] : default_order_bonds) {
    Bond& b = g.bonds[bi];
    if (was_default && b.in_ring && g.atoms[b.a].aromatic && g.atoms[b.b].aromatic) {
      b.order = BondOrder::Aromatic;
    }
  }
  for (std::size_t bi = 0; bi < g.bonds.size(); ++bi) {
    const Bond& b = g.bonds[bi];
    if (b.order == BondOrder::Aromatic) {
      if (!g.atoms[b.a].aromatic || !g.atoms[b.b].aromatic) {
        throw ParseError("aromatic bond between non-aromatic atoms", 0);
      }
      if (!b.in_ring) {
        throw ParseError("aromatic bond outside a ring", 0);
      }
    }
  }
  for (int ai = 0; ai < g.num_atoms(); ++ai) {
    if (g.atoms[ai].aromatic && !g.atom_in_ring(ai)) {
      throw ParseError("aromatic atom outside a ring", atom_offsets[ai]);
    }
  }

  detail::assign_hydrogens_and_validate(g, bracket_h, atom_offsets);
  return g;
}

}  // namespace semimol::chem
