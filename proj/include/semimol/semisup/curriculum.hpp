#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "semimol/errors.hpp"

namespace semimol::semisup {

// Self-adaptive curriculum threshold. gamma never increases over a run and
// is clamped at gamma_min from below.
struct CurriculumState {
  double gamma = 0.9;
  double delta_gamma = 0.05;
  int k = 5;
  std::optional<double> s_prev;  // previous validation metric, normalized
  int epoch = 0;
  double gamma_min = 0.0;
};

// One controller update after a validation measurement. The metric is
// normalized so that smaller is better (negated for score-like metrics);
// gamma drops by delta_gamma exactly when validation improved, never on the
// first epoch, and never below gamma_min.
inline void curriculum_step(CurriculumState& state, double s, bool lower_is_better) {
  if (!std::isfinite(s)) throw Error("curriculum_step: non-finite validation metric");
  const double sn = lower_is_better ? s : -s;
  if (state.epoch > 0 && state.s_prev.has_value() && sn < *state.s_prev) {
    state.gamma = std::max(state.gamma - state.delta_gamma, state.gamma_min);
  }
  state.s_prev = sn;
  state.epoch += 1;
}

}  // namespace semimol::semisup
