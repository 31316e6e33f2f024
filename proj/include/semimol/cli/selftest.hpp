#pragma once

#include <cmath>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "semimol/chem/fingerprint.hpp"
#include "semimol/chem/smiles.hpp"
#include "semimol/data/metrics.hpp"
#include "semimol/data/synthetic.hpp"
#include "semimol/nd/adam.hpp"
#include "semimol/nd/grad_check.hpp"
#include "semimol/semisup/curriculum.hpp"
#include "semimol/semisup/sets.hpp"

namespace semimol::cli {

// Fast invariant sweep runnable from the command line. Prints one PASS/FAIL
// line per suite and returns true when everything held.
inline bool run_selftest(std::ostream& out = std::cout) {
  int failed = 0;
  auto report = [&](const char* name, bool ok) {
    out << "selftest " << name << ": " << (ok ? "PASS" : "FAIL") << "\n";
    if (!ok) failed++;
  };

  {
    bool ok = true;
    nd::RngStream rng(101);
    for (int t = 0; t < 100 && ok; ++t) {
      chem::Fingerprint a, b;
      a.width = b.width = 128;
      a.words.assign(2, 0);
      b.words.assign(2, 0);
      for (int i = 0; i < 128; ++i) {
        if (rng.uniform() < 0.25) a.set(i);
        if (rng.uniform() < 0.25) b.set(i);
      }
      const double s = chem::tanimoto(a, b);
      ok = ok && s >= 0.0 && s <= 1.0 && s == chem::tanimoto(b, a) &&
           chem::tanimoto(a, a) == 1.0;
    }
    report("tanimoto-properties", ok);
  }

  {
    bool ok = true;
    nd::RngStream rng(102);
    nd::RngStream order(103);
    for (int t = 0; t < 25 && ok; ++t) {
      const auto g = data::random_molecule(rng);
      ok = ok && chem::check_graph_invariants(g).empty();
      const auto base = chem::morgan_fingerprint(g, 2, 512);
      const auto re = chem::parse_smiles(data::write_smiles(g, &order));
      ok = ok && chem::morgan_fingerprint(re, 2, 512).words == base.words;
    }
    report("fingerprint-relabeling-invariance", ok);
  }

  {
    bool ok = true;
    const auto g1 = chem::parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
    const auto g2 = chem::parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
    ok = ok && g1.num_atoms() == g2.num_atoms() && g1.num_bonds() == g2.num_bonds() &&
         g1.ring_count == 1;
    try {
      chem::parse_smiles("C(");
      ok = false;
    } catch (const ParseError& e) {
      ok = ok && e.offset() == 1;
    }
    report("parser-basics", ok);
  }

  {
    bool ok = true;
    nd::RngStream rng(104);
    for (int t = 0; t < 50 && ok; ++t) {
      const int n = 1 + static_cast<int>(rng.uniform_int(8));
      std::vector<semisup::PseudoSample> pool(n);
      for (auto& ps : pool) ps.p = std::floor(rng.uniform() * 10.0) / 10.0;
      const double gamma = std::floor(rng.uniform() * 10.0) / 10.0;
      std::vector<int> oracle;
      for (int i = 0; i < n; ++i) {
        if (pool[i].p >= gamma) oracle.push_back(i);
      }
      ok = ok && semisup::admit_by_threshold(pool, gamma) == oracle;
    }
    report("hybrid-set-enumeration", ok);
  }

  {
    semisup::CurriculumState st;
    st.gamma = 0.90;
    st.delta_gamma = 0.05;
    st.epoch = 1;
    st.s_prev = 0.85;
    semisup::curriculum_step(st, 0.80, true);
    bool ok = st.gamma == 0.85;
    semisup::curriculum_step(st, 0.88, true);
    ok = ok && st.gamma == 0.85;
    semisup::CurriculumState fresh;
    semisup::curriculum_step(fresh, 0.1, true);
    ok = ok && fresh.gamma == 0.9;
    report("curriculum-replay", ok);
  }

  {
    nd::RngStream rng(105);
    nd::Tensor w1 = nd::Tensor::zeros(3, 4), b1 = nd::Tensor::zeros(1, 4);
    nd::Tensor w2 = nd::Tensor::zeros(4, 1);
    nd::Tensor x = nd::Tensor::zeros(2, 3), y = nd::Tensor::zeros(2, 1);
    for (auto* m : {&w1, &b1, &w2, &x, &y}) {
      for (double& v : m->data) v = rng.uniform(-1.0, 1.0);
    }
    auto fn = [&](nd::Tape& t, const std::vector<nd::Var>& vs) {
      const nd::Var xin = t.constant(x);
      const nd::Var h = nd::relu(t, nd::add(t, nd::matmul(t, xin, vs[0]), vs[1]));
      return nd::mse(t, nd::matmul(t, h, vs[2]), y);
    };
    report("gradient-check", nd::grad_check(fn, {w1, b1, w2}) < 1e-4);
  }

  {
    auto run = [] {
      nd::Tensor p = nd::Tensor::from_rows(3, 1, {0.5, -0.5, 0.25});
      nd::Adam opt({&p}, 0.05);
      nd::RngStream r(106);
      for (int i = 0; i < 10; ++i) {
        nd::Tensor g = nd::Tensor::zeros(3, 1);
        for (double& v : g.data) v = r.uniform(-1.0, 1.0);
        opt.step({&p}, {&g});
      }
      return p.data;
    };
    report("adam-reproducibility", run() == run());
  }

  {
    bool ok = true;
    nd::RngStream rng(107);
    for (int t = 0; t < 5 && ok; ++t) {
      const int n = 80;
      std::vector<double> scores(n);
      std::vector<int> labels(n);
      for (int i = 0; i < n; ++i) {
        scores[i] = std::floor(rng.uniform() * 10.0) / 10.0;
        labels[i] = rng.uniform() < 0.5 ? 1 : 0;
      }
      labels[0] = 1;
      labels[1] = 0;
      double wins = 0.0;
      int64_t pairs = 0;
      for (int i = 0; i < n; ++i) {
        if (labels[i] != 1) continue;
        for (int j = 0; j < n; ++j) {
          if (labels[j] != 0) continue;
          pairs++;
          wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
        }
      }
      ok = ok && std::fabs(data::roc_auc(scores, labels) -
                           wins / static_cast<double>(pairs)) < 1e-12;
    }
    report("roc-auc-oracle", ok);
  }

  return failed == 0;
}

}  // namespace semimol::cli
