#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "semimol/chem/molecule.hpp"
#include "semimol/chem/smiles.hpp"
#include "semimol/errors.hpp"

namespace semimol::chem {

// Fixed-width bitset of hashed atom-centered radial substructures.
struct Fingerprint {
  std::vector<uint64_t> words;
  int width = 0;
  int radius = 0;

  void set(uint64_t bit) { words[bit >> 6] |= (uint64_t{1} << (bit & 63)); }
  bool test(uint64_t bit) const {
    return (words[bit >> 6] >> (bit & 63)) & 1u;
  }
  int popcount() const {
    int n = 0;
    for (uint64_t w : words) n += std::popcount(w);
    return n;
  }
};

namespace detail {

// Seedless 64-bit mixing (splitmix64 finalizer). Fixed constants keep
// fingerprints identical across platforms and runs.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t h, uint64_t v) {
  return mix64(h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
}

}  // namespace detail

// All environment hashes for radii 0..radius, in (radius, atom index) order.
// Exposed so tests can compare environment multisets directly.
inline std::vector<uint64_t> morgan_environment_hashes(const MolecularGraph& g,
                                                       int radius) {
  const int n = g.num_atoms();
  const auto adj = g.adjacency();
  std::vector<uint64_t> inv(n), next(n);
  std::vector<uint64_t> out;
  out.reserve(static_cast<size_t>(n) * (radius + 1));

  for (int i = 0; i < n; ++i) {
    const Atom& a = g.atoms[i];
    uint64_t h = detail::mix64(0x5eed);
    h = detail::hash_combine(h, static_cast<uint64_t>(atomic_number(a.element)));
    h = detail::hash_combine(h, static_cast<uint64_t>(a.degree));
    h = detail::hash_combine(h, static_cast<uint64_t>(a.implicit_h));
    h = detail::hash_combine(h, static_cast<uint64_t>(a.formal_charge + 16));
    h = detail::hash_combine(h, a.aromatic ? 1u : 0u);
    h = detail::hash_combine(h, g.atom_in_ring(i) ? 1u : 0u);
    inv[i] = h;
    out.push_back(h);
  }

  for (int r = 1; r <= radius; ++r) {
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<uint64_t, uint64_t>> nbrs;  // (bond code, invariant)
      nbrs.reserve(adj[i].size());
      for (const auto& nb : adj[i]) {
        nbrs.emplace_back(static_cast<uint64_t>(g.bonds[nb.bond].order),
                          inv[nb.atom]);
      }
      std::sort(nbrs.begin(), nbrs.end());
      uint64_t h = detail::hash_combine(detail::mix64(r), inv[i]);
      for (const auto& [code, v] : nbrs) {
        h = detail::hash_combine(h, code);
        h = detail::hash_combine(h, v);
      }
      next[i] = h;
      out.push_back(h);
    }
    inv.swap(next);
  }
  return out;
}

inline Fingerprint morgan_fingerprint(const MolecularGraph& g, int radius = 2,
                                      int width = 1024) {
  if (radius < 0) throw Error("fingerprint radius must be >= 0");
  if (width < 64 || (width & (width - 1)) != 0) {
    throw Error("fingerprint width must be a power of two >= 64");
  }
  Fingerprint fp;
  fp.width = width;
  fp.radius = radius;
  fp.words.assign(static_cast<size_t>(width) / 64, 0);
  for (uint64_t h : morgan_environment_hashes(g, radius)) {
    fp.set(h & static_cast<uint64_t>(width - 1));
  }
  return fp;
}

// |a AND b| / |a OR b|; 1.0 when both fingerprints are empty.
inline double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.width != b.width) {
    throw WidthMismatch("tanimoto: fingerprint widths differ (" +
                        std::to_string(a.width) + " vs " +
                        std::to_string(b.width) + ")");
  }
  int inter = 0, uni = 0;
  for (size_t i = 0; i < a.words.size(); ++i) {
    inter += std::popcount(a.words[i] & b.words[i]);
    uni += std::popcount(a.words[i] | b.words[i]);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  const std::size_t m = a.size(), n = b.size();
  std::vector<std::size_t> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    prev.swap(cur);
  }
  return prev[n];
}

// 1 - edit_distance / max_length over the raw strings. Both inputs must be
// parseable; errors from the parser propagate.
inline double smiles_similarity(std::string_view a, std::string_view b) {
  parse_smiles(a);
  parse_smiles(b);
  const std::size_t maxlen = std::max(a.size(), b.size());
  if (maxlen == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(maxlen);
}

}  // namespace semimol::chem
