#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <vector>

#include "semimol/nd/adam.hpp"
#include "semimol/nd/grad_check.hpp"
#include "semimol/nd/rng.hpp"
#include "semimol/nd/tape.hpp"
#include "semimol/nd/tensor.hpp"

using namespace semimol;
using namespace semimol::nd;

TEST_CASE("elementwise op values") {
  Tape t;
  const Var x = t.leaf(Tensor::from_rows(1, 3, {-1.0, 0.0, 2.0}), true);
  const Var r = relu(t, x);
  CHECK(t.val(r).data == std::vector<double>{0.0, 0.0, 2.0});

  const Var s = sigmoid(t, t.constant(Tensor::scalar(0.0)));
  CHECK(t.val(s).item() == 0.5);
}

TEST_CASE("matmul hand arithmetic") {
  Tape t;
  const Var a = t.leaf(Tensor::from_rows(1, 2, {1.0, 2.0}), true);
  const Var b = t.leaf(Tensor::from_rows(2, 1, {3.0, 4.0}), true);
  const Var c = matmul(t, a, b);
  CHECK(t.val(c).item() == 11.0);

  CHECK_THROWS_AS(matmul(t, a, a), ShapeMismatch);
}

TEST_CASE("bce closed forms") {
  const double ln2 = std::log(2.0);
  {
    Tape t;
    const Var p = t.leaf(Tensor::scalar(0.5), true);
    CHECK(t.val(bce(t, p, Tensor::scalar(1.0))).item() == Catch::Approx(ln2));
  }
  {
    Tape t;
    const Var p = t.leaf(Tensor::from_rows(2, 1, {0.5, 0.5}), true);
    const Var l = bce(t, p, Tensor::from_rows(2, 1, {0.0, 1.0}));
    CHECK(t.val(l).item() == Catch::Approx(ln2));
  }
  {
    // clamped correct-label limit
    Tape t;
    const Var p = t.leaf(Tensor::scalar(1.0), true);
    const double v = t.val(bce(t, p, Tensor::scalar(1.0))).item();
    CHECK(v >= 0.0);
    CHECK(v <= 1.19e-7);
  }
}

TEST_CASE("mse rmse mae hand arithmetic") {
  Tape t;
  const Var p0 = t.leaf(Tensor::from_rows(2, 1, {0.0, 0.0}), true);
  CHECK(t.val(mse(t, p0, Tensor::from_rows(2, 1, {3.0, 4.0}))).item() == 12.5);
  const Var r = rmse_loss(t, p0, Tensor::from_rows(2, 1, {3.0, 4.0}));
  CHECK(t.val(r).item() == Catch::Approx(3.5355339059327378).epsilon(1e-9));

  const Var p1 = t.leaf(Tensor::scalar(1.0), true);
  CHECK(t.val(mae(t, p1, Tensor::scalar(0.0))).item() == 1.0);

  const Var same = t.leaf(Tensor::from_rows(2, 1, {1.5, -2.0}), true);
  CHECK(t.val(mse(t, same, Tensor::from_rows(2, 1, {1.5, -2.0}))).item() == 0.0);
  CHECK(t.val(mae(t, same, Tensor::from_rows(2, 1, {1.5, -2.0}))).item() == 0.0);
}

TEST_CASE("backward basics") {
  SECTION("sum gives all-ones") {
    Tape t;
    const Var w = t.leaf(Tensor::from_rows(2, 2, {1.0, -2.0, 0.5, 3.0}), true);
    t.backward(sum(t, w));
    CHECK(t.grad(w).data == std::vector<double>(4, 1.0));
  }
  SECTION("mse of w*x closed form") {
    Tape t;
    const Var w = t.leaf(Tensor::scalar(1.0), true);
    const Var x = t.constant(Tensor::scalar(2.0));
    const Var pred = mul(t, w, x);
    t.backward(mse(t, pred, Tensor::scalar(0.0)));
    CHECK(t.grad(w).item() == 8.0);  // 2*(wx - y)*x
  }
  SECTION("disconnected leaf gets zero grad") {
    Tape t;
    const Var w = t.leaf(Tensor::scalar(5.0), true);
    const Var o = t.leaf(Tensor::scalar(1.0), true);
    t.backward(sum(t, w));
    CHECK(t.grad(o).item() == 0.0);
  }
  SECTION("shared input accumulates") {
    Tape t;
    const Var x = t.leaf(Tensor::scalar(3.0), true);
    t.backward(sum(t, add(t, x, x)));
    CHECK(t.grad(x).item() == 2.0);
  }
  SECTION("non-scalar loss rejected") {
    Tape t;
    const Var w = t.leaf(Tensor::from_rows(2, 1, {1.0, 2.0}), true);
    CHECK_THROWS_AS(t.backward(w), NotScalar);
  }
}

TEST_CASE("grad_check on composites") {
  RngStream rng(7);

  SECTION("linear function is exact") {
    std::vector<Tensor> params{Tensor::from_rows(3, 1, {0.3, -0.7, 1.1})};
    const double err = grad_check(
        [](Tape& t, const std::vector<Var>& vs) { return sum(t, vs[0]); }, params);
    CHECK(err < 1e-10);
  }

  SECTION("two-layer MLP with losses") {
    for (int seed = 0; seed < 5; ++seed) {
      RngStream r(100 + seed);
      Tensor w1 = Tensor::zeros(3, 4);
      Tensor b1 = Tensor::zeros(1, 4);
      Tensor w2 = Tensor::zeros(4, 1);
      Tensor x = Tensor::zeros(2, 3);
      Tensor y = Tensor::zeros(2, 1);
      for (auto* m : {&w1, &b1, &w2, &x, &y}) {
        for (double& v : m->data) v = r.uniform(-1.0, 1.0);
      }
      auto fn = [&x, &y](Tape& t, const std::vector<Var>& vs) {
        const Var xin = t.constant(x);
        const Var h = relu(t, add(t, matmul(t, xin, vs[0]), vs[1]));
        const Var out = matmul(t, h, vs[2]);
        return rmse_loss(t, out, y);
      };
      CHECK(grad_check(fn, {w1, b1, w2}) < 1e-4);
    }
  }

  SECTION("sigmoid + weighted bce") {
    RngStream r(55);
    Tensor z = Tensor::zeros(5, 1);
    Tensor c = Tensor::zeros(5, 1);
    Tensor w = Tensor::zeros(5, 1);
    for (int i = 0; i < 5; ++i) {
      z.data[i] = r.uniform(-2.0, 2.0);
      c.data[i] = r.uniform() < 0.5 ? 0.0 : 1.0;
      w.data[i] = r.uniform(0.5, 1.5);
    }
    auto fn = [&](Tape& t, const std::vector<Var>& vs) {
      return bce_weighted(t, sigmoid(t, vs[0]), c, w, 5.0);
    };
    CHECK(grad_check(fn, {z}) < 1e-4);
  }

  SECTION("segment and neighbor ops") {
    auto segments = std::make_shared<std::vector<int32_t>>(
        std::vector<int32_t>{0, 0, 1, 1, 1});
    auto adj = std::make_shared<Csr>();
    adj->offsets = {0, 1, 2, 4, 6, 8};
    adj->nbrs = {1, 0, 3, 4, 2, 4, 2, 3};
    Tensor x = Tensor::zeros(5, 3);
    Tensor sc = Tensor::zeros(5, 1);
    RngStream r(9);
    for (double& v : x.data) v = r.uniform(-1.0, 1.0);
    for (double& v : sc.data) v = r.uniform(-1.0, 1.0);
    auto fn = [&](Tape& t, const std::vector<Var>& vs) {
      const Var ns = neighbor_sum(t, vs[0], adj);
      const Var w = segment_softmax(t, vs[1], segments, 2);
      const Var pooled = segment_sum(t, colmul(t, ns, w), segments, 2);
      const Var pooled2 = segment_mean(t, vs[0], segments, 2);
      return mean(t, mul(t, pooled, pooled2));
    };
    CHECK(grad_check(fn, {x, sc}) < 1e-4);
  }

  SECTION("smul concat abs ops") {
    Tensor a = Tensor::from_rows(2, 2, {0.4, -0.3, 0.9, 0.1});
    Tensor b = Tensor::from_rows(2, 1, {-0.6, 0.8});
    Tensor s = Tensor::scalar(0.7);
    auto fn = [](Tape& t, const std::vector<Var>& vs) {
      const Var c = concat_cols(t, vs[0], smul(t, vs[1], vs[2]));
      const Var u = abs_smooth(t, c, 1e-12);
      return weighted_sum(t, u, Tensor::from_rows(2, 3, {1, 2, 3, 4, 5, 6}), 6.0);
    };
    CHECK(grad_check(fn, {a, b, s}) < 1e-4);
  }

  SECTION("bce on logits") {
    Tensor z = Tensor::from_rows(3, 1, {1.5, -0.4, 0.2});
    Tensor y = Tensor::from_rows(3, 1, {1.0, 0.0, 1.0});
    auto fn = [&](Tape& t, const std::vector<Var>& vs) {
      return mean(t, bce_logits_elem(t, vs[0], y));
    };
    CHECK(grad_check(fn, {z}) < 1e-4);
  }
}

TEST_CASE("adam behavior") {
  SECTION("zero grads leave params unchanged from fresh state") {
    Tensor p = Tensor::from_rows(2, 1, {1.0, -2.0});
    Tensor g = Tensor::zeros(2, 1);
    Adam opt({&p}, 0.1);
    opt.step({&p}, {&g});
    CHECK(p.data == std::vector<double>{1.0, -2.0});
    CHECK(opt.step_count() == 1);
  }
  SECTION("first step magnitude is about lr") {
    Tensor p = Tensor::scalar(0.0);
    Tensor g = Tensor::scalar(2.0);
    Adam opt({&p}, 0.01);
    opt.step({&p}, {&g});
    CHECK(p.item() == Catch::Approx(-0.01).epsilon(1e-6));
  }
  SECTION("bit-reproducible") {
    auto run = [] {
      Tensor p = Tensor::from_rows(3, 1, {0.5, -0.5, 0.25});
      Adam opt({&p}, 0.05);
      RngStream r(77);
      for (int i = 0; i < 20; ++i) {
        Tensor g = Tensor::zeros(3, 1);
        for (double& v : g.data) v = r.uniform(-1.0, 1.0);
        opt.step({&p}, {&g});
      }
      return p.data;
    };
    CHECK(run() == run());
  }
}

TEST_CASE("dropout") {
  SECTION("eval mode is the identity and draws nothing") {
    Tape t;
    RngStream rng(3);
    const uint64_t probe_before = RngStream(3).next_u64();
    const Var x = t.leaf(Tensor::from_rows(1, 4, {1, 2, 3, 4}), true);
    const Var y = dropout(t, x, 0.5, rng, false);
    CHECK(y == x);
    CHECK(rng.next_u64() == probe_before);
  }
  SECTION("training mode preserves the mean") {
    const double rate = 0.3;
    const int n = 100000;
    RngStream rng(11);
    Tape t;
    const Var x = t.leaf(Tensor::from_rows(n, 1, std::vector<double>(n, 1.0)), true);
    const Var y = dropout(t, x, rate, rng, true);
    double m = 0.0;
    for (double v : t.val(y).data) m += v;
    m /= n;
    const double q = 1.0 - rate;
    const double sigma = std::sqrt((1.0 - q) / q / n);
    CHECK(std::fabs(m - 1.0) <= 3.0 * sigma);
  }
  SECTION("invalid rate") {
    Tape t;
    RngStream rng(1);
    const Var x = t.leaf(Tensor::scalar(1.0), true);
    CHECK_THROWS(dropout(t, x, 1.0, rng, true));
  }
}

TEST_CASE("rng streams are independent and deterministic") {
  auto a1 = named_stream(42, "init");
  auto a2 = named_stream(42, "init");
  auto b = named_stream(42, "dropout");
  CHECK(a1.next_u64() == a2.next_u64());
  CHECK(named_stream(42, "init").next_u64() != b.next_u64());

  RngStream s(5);
  std::vector<int> v{1, 2, 3, 4, 5, 6};
  s.shuffle(v);
  std::vector<int> v2{1, 2, 3, 4, 5, 6};
  RngStream s2(5);
  s2.shuffle(v2);
  CHECK(v == v2);
}
