#pragma once

#include "apdm/concepts.hpp"
#include "apdm/losses.hpp"
#include "apdm/trace.hpp"

namespace apdm {

// Denoising loss on the subject set under the identifier embedding.
LossReport per_simple_loss(const ConditionalDenoiser& model,
                           const NoiseSchedule& sched, const ConceptDataset& ds,
                           Rng& rng);
LossReport per_simple_loss(const ConditionalDenoiser& model,
                           const NoiseSchedule& sched, const ConceptDataset& ds,
                           const DrawSet& draws);

// Denoising loss on the generated prior set under the class embedding.
LossReport ppl_loss(const ConditionalDenoiser& model, const NoiseSchedule& sched,
                    const ConceptDataset& ds, Rng& rng);
LossReport ppl_loss(const ConditionalDenoiser& model, const NoiseSchedule& sched,
                    const ConceptDataset& ds, const DrawSet& draws);

struct ObjectiveReport {
  double value = 0.0;
  Vec grad;
  double per_simple_value = 0.0;
  double ppl_value = 0.0;
  DrawSet per_draws;
  DrawSet ppl_draws;
};

// Personalization objective: per_simple_loss + ppl_loss with unit weights.
// Draw order is the subject term first, then the prior term.
ObjectiveReport per_objective(const ConditionalDenoiser& model,
                              const NoiseSchedule& sched,
                              const ConceptDataset& ds, Rng& rng);
ObjectiveReport per_objective(const ConditionalDenoiser& model,
                              const NoiseSchedule& sched,
                              const ConceptDataset& ds, const DrawSet& per_draws,
                              const DrawSet& ppl_draws);

struct TrainResult {
  ConditionalDenoiser model;
  ExperimentTrace trace;  // columns: step, L_per_simple, L_ppl, L_per
};

// Full-batch gradient descent on the personalization objective. The input
// model is left untouched; losses are recorded at the pre-update parameters.
TrainResult personalize(const ConditionalDenoiser& model,
                        const NoiseSchedule& sched, const ConceptDataset& ds,
                        std::size_t steps, double lr, Rng& rng);

}  // namespace apdm
