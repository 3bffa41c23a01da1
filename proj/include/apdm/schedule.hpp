#pragma once

#include "apdm/common.hpp"

namespace apdm {

// Discrete noise schedule: betas[t-1] is the per-step variance at step t,
// alphas[t-1] = 1 - beta_t, alpha_bars[t-1] = prod_{i<=t} alpha_i.
struct NoiseSchedule {
  int T = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  Vec betas;
  Vec alphas;
  Vec alpha_bars;
};

// Linear schedule inclusive of both endpoints (single value when T == 1).
// Requires T >= 1 and 0 < beta_start <= beta_end < 1.
NoiseSchedule build_schedule(int T, double beta_start, double beta_end);

// x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps, 1 <= t <= T.
Sample forward_noise(const NoiseSchedule& sched, const Sample& x0, int t,
                     const Sample& eps);

}  // namespace apdm
