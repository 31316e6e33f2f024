#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "semimol/nd/tape.hpp"

namespace semimol::nd {

// Scalar function of a parameter list, expressed as a tape program. The
// callable receives a fresh tape plus the parameters inserted as leaves and
// returns the loss variable.
using TapeFn =
    std::function<Var(Tape&, const std::vector<Var>&)>;

namespace detail {
inline double rel_err(double analytic, double numeric) {
  const double denom =
      std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}
}  // namespace detail

// Central finite differences against tape gradients. Returns the maximum
// over all coordinates of |analytic - numeric| / max(|analytic|, |numeric|,
// 1e-8). The function must be deterministic (run stochastic parts in eval
// mode).
inline double grad_check(const TapeFn& fn, std::vector<Tensor> params,
                         double h = 1e-5) {
  auto eval = [&](const std::vector<Tensor>& ps) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(ps.size());
    for (const Tensor& p : ps) vars.push_back(tape.leaf(p, true));
    return tape.val(fn(tape, vars)).item();
  };

  // analytic gradients
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& p : params) vars.push_back(tape.leaf(p, true));
  const Var loss = fn(tape, vars);
  tape.backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(vars.size());
  for (Var v : vars) analytic.push_back(tape.grad(v));

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    for (size_t i = 0; i < params[pi].data.size(); ++i) {
      const double orig = params[pi].data[i];
      params[pi].data[i] = orig + h;
      const double fp = eval(params);
      params[pi].data[i] = orig - h;
      const double fm = eval(params);
      params[pi].data[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      worst = std::max(worst, detail::rel_err(analytic[pi].data[i], numeric));
    }
  }
  return worst;
}

// Variant for code that binds its own leaves (the model forwards). `run`
// builds the loss on the given tape and reports the leaf vars it bound for
// each tensor in `params`, in the same order. Numeric differences perturb the
// tensors in place, so `params` must point at the storage `run` reads.
struct BoundLoss {
  Var loss;
  std::vector<Var> params;
};

inline double grad_check_bound(const std::function<BoundLoss(Tape&)>& run,
                               const std::vector<Tensor*>& params,
                               double h = 1e-5) {
  Tape tape;
  const BoundLoss first = run(tape);
  if (first.params.size() != params.size()) {
    throw ShapeMismatch("grad_check_bound: bound var count != param count");
  }
  tape.backward(first.loss);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Var v : first.params) analytic.push_back(tape.grad(v));

  auto eval = [&run]() {
    Tape t;
    return t.val(run(t).loss).item();
  };

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    for (size_t i = 0; i < params[pi]->data.size(); ++i) {
      const double orig = params[pi]->data[i];
      params[pi]->data[i] = orig + h;
      const double fp = eval();
      params[pi]->data[i] = orig - h;
      const double fm = eval();
      params[pi]->data[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      worst = std::max(worst, detail::rel_err(analytic[pi].data[i], numeric));
    }
  }
  return worst;
}

}  // namespace semimol::nd
