#include "apdm/personalization.hpp"

#include <cmath>

namespace apdm {

LossReport per_simple_loss(const ConditionalDenoiser& model,
                           const NoiseSchedule& sched, const ConceptDataset& ds,
                           Rng& rng) {
  if (ds.negatives.empty()) throw UsageError("per_simple_loss: no subject samples");
  return simple_loss(model, sched, ds.negatives, ds.c_per, rng);
}

LossReport per_simple_loss(const ConditionalDenoiser& model,
                           const NoiseSchedule& sched, const ConceptDataset& ds,
                           const DrawSet& draws) {
  if (ds.negatives.empty()) throw UsageError("per_simple_loss: no subject samples");
  return simple_loss(model, sched, ds.negatives, ds.c_per, draws);
}

LossReport ppl_loss(const ConditionalDenoiser& model, const NoiseSchedule& sched,
                    const ConceptDataset& ds, Rng& rng) {
  if (ds.priors.empty()) throw UsageError("ppl_loss: no prior samples");
  return simple_loss(model, sched, ds.priors, ds.c_pr, rng);
}

LossReport ppl_loss(const ConditionalDenoiser& model, const NoiseSchedule& sched,
                    const ConceptDataset& ds, const DrawSet& draws) {
  if (ds.priors.empty()) throw UsageError("ppl_loss: no prior samples");
  return simple_loss(model, sched, ds.priors, ds.c_pr, draws);
}

namespace {

ObjectiveReport combine(LossReport per, LossReport ppl) {
  ObjectiveReport rep;
  rep.value = per.value + ppl.value;
  rep.grad = sum(per.grad, ppl.grad);
  rep.per_simple_value = per.value;
  rep.ppl_value = ppl.value;
  rep.per_draws = std::move(per.draws);
  rep.ppl_draws = std::move(ppl.draws);
  return rep;
}

}  // namespace

ObjectiveReport per_objective(const ConditionalDenoiser& model,
                              const NoiseSchedule& sched,
                              const ConceptDataset& ds, Rng& rng) {
  LossReport per = per_simple_loss(model, sched, ds, rng);
  LossReport ppl = ppl_loss(model, sched, ds, rng);
  return combine(std::move(per), std::move(ppl));
}

ObjectiveReport per_objective(const ConditionalDenoiser& model,
                              const NoiseSchedule& sched,
                              const ConceptDataset& ds, const DrawSet& per_draws,
                              const DrawSet& ppl_draws) {
  LossReport per = per_simple_loss(model, sched, ds, per_draws);
  LossReport ppl = ppl_loss(model, sched, ds, ppl_draws);
  return combine(std::move(per), std::move(ppl));
}

TrainResult personalize(const ConditionalDenoiser& model,
                        const NoiseSchedule& sched, const ConceptDataset& ds,
                        std::size_t steps, double lr, Rng& rng) {
  if (!(lr > 0.0)) throw ConfigError("personalize: lr must be > 0");
  TrainResult result;
  result.model = model;
  result.trace.stage = "personalize";
  result.trace.set_columns({"step", "L_per_simple", "L_ppl", "L_per"});
  for (std::size_t step = 0; step < steps; ++step) {
    const ObjectiveReport rep = per_objective(result.model, sched, ds, rng);
    if (!std::isfinite(rep.value) || !all_finite(rep.grad))
      throw NumericError("personalize: non-finite loss at step " +
                         std::to_string(step));
    result.trace.add_row({static_cast<double>(step), rep.per_simple_value,
                          rep.ppl_value, rep.value});
    axpy(-lr, rep.grad, result.model.params);
  }
  return result;
}

}  // namespace apdm
