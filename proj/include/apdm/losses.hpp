#pragma once

#include "apdm/common.hpp"
#include "apdm/denoiser.hpp"
#include "apdm/schedule.hpp"

namespace apdm {

// One (t, eps) draw for a batch element. Draw order from a stream is t first,
// then the eps coordinates, so a recorded set replays exactly.
struct Draw {
  int t = 1;
  Sample eps;
};
using DrawSet = std::vector<Draw>;

DrawSet make_draws(const NoiseSchedule& sched, std::size_t n, int dim,
                   Rng& rng);

struct LossReport {
  double value = 0.0;
  Vec grad;       // d(value)/d(params)
  DrawSet draws;  // the (t, eps) this evaluation used
};

// Mean over the batch of |eps_hat(x_t, t, c) - eps|^2 with x_t from
// forward_noise; the gradient is exact. Batch terms are reduced left to
// right so results are bit-deterministic.
LossReport simple_loss(const ConditionalDenoiser& model,
                       const NoiseSchedule& sched,
                       const std::vector<Sample>& batch,
                       const ConditioningEmbedding& c, Rng& rng);
LossReport simple_loss(const ConditionalDenoiser& model,
                       const NoiseSchedule& sched,
                       const std::vector<Sample>& batch,
                       const ConditioningEmbedding& c, const DrawSet& draws);

// Ancestral reverse recursion from x_T ~ N(0, I): n independent samples.
// Per sample the stream is consumed as x_T coords, then the step noise for
// t = T..2 (no noise is added at the final t = 1 step).
std::vector<Sample> sample(const ConditionalDenoiser& model,
                           const NoiseSchedule& sched,
                           const ConditioningEmbedding& c, std::size_t n,
                           Rng& rng);

}  // namespace apdm
