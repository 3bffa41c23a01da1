#include "apdm/l2p.hpp"

#include <cmath>
#include <string>

namespace apdm {

void L2PConfig::validate() const {
  if (n_per < 1) throw ConfigError("l2p: n_per must be >= 1");
  if (!(gamma_per > 0.0)) throw ConfigError("l2p: gamma_per must be > 0");
  if (!(gamma_protect > 0.0)) throw ConfigError("l2p: gamma_protect must be > 0");
  if (!(beta > 0.0)) throw ConfigError("l2p: beta must be > 0");
}

Vec accumulate(const std::vector<Vec>& grads) {
  if (grads.empty()) throw UsageError("accumulate: empty gradient list");
  Vec total = grads.front();
  for (std::size_t k = 1; k < grads.size(); ++k) {
    if (grads[k].size() != total.size())
      throw UsageError("accumulate: gradient length mismatch");
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += grads[k][i];
  }
  return total;
}

L2PResult l2p_protect(const ConditionalDenoiser& theta0,
                      const ConditionalDenoiser& phi, const NoiseSchedule& sched,
                      const ConceptDataset& ds, const L2PConfig& cfg, Rng& rng,
                      const CheckpointHook& hook) {
  cfg.validate();
  if (!all_finite(theta0.params))
    throw NumericError("l2p: non-finite initial parameters");
  ds.validate();

  L2PResult result;
  result.model = theta0;
  result.trace.stage = "l2p";
  result.trace.set_columns({"j", "L_protect", "mean_inner_L_per", "diag_cosine",
                            "g_count", "inner_descent_viol"});

  for (std::size_t j = 0; j < cfg.n_protect; ++j) {
    const ProtectReport outer_eval =
        protect_loss(result.model, phi, sched, ds, cfg.beta, rng);
    const DiagnoseReport diag = diagnose(result.model, sched, ds,
                                         cfg.gamma_protect, rng);

    ConditionalDenoiser inner = result.model;  // theta'_1 <- theta_j (copy)
    std::vector<Vec> grads;
    grads.reserve(cfg.n_per);
    std::vector<L2PInnerRecord> inner_records;
    double inner_lper_sum = 0.0;
    double descent_viol = 0.0;

    for (std::size_t i = 0; i < cfg.n_per; ++i) {
      const ObjectiveReport per = per_objective(inner, sched, ds, rng);
      if (!std::isfinite(per.value) || !all_finite(per.grad))
        throw NumericError("l2p: non-finite personalization loss at (j=" +
                           std::to_string(j) + ", i=" + std::to_string(i) + ")");
      inner_lper_sum += per.value;
      axpy(-cfg.gamma_per, per.grad, inner.params);
      if (i == 0) {
        // Same-draw re-evaluation after the update; a genuine descent step
        // should not increase the objective.
        const ObjectiveReport replay =
            per_objective(inner, sched, ds, per.per_draws, per.ppl_draws);
        if (replay.value > per.value) descent_viol = 1.0;
      }

      const ProtectReport prot =
          protect_loss(inner, phi, sched, ds, cfg.beta, rng);
      if (!std::isfinite(prot.value) || !all_finite(prot.grad))
        throw NumericError("l2p: non-finite protection loss at (j=" +
                           std::to_string(j) + ", i=" + std::to_string(i) + ")");
      grads.push_back(prot.grad);
      if (cfg.record_draws) {
        L2PInnerRecord rec;
        rec.per_neg_draws = per.per_draws;
        rec.per_ppl_draws = per.ppl_draws;
        rec.protect_pairs = prot.pair_batch;
        rec.protect_ppl_draws = prot.ppl_draws;
        inner_records.push_back(std::move(rec));
      }
    }

    const Vec protect_grad = accumulate(grads);
    result.trace.add_row({static_cast<double>(j + 1), outer_eval.value,
                          inner_lper_sum / static_cast<double>(cfg.n_per),
                          diag.diag.cosine, static_cast<double>(grads.size()),
                          descent_viol});
    axpy(-cfg.gamma_protect, protect_grad, result.model.params);
    if (cfg.record_draws) result.recorded.push_back(std::move(inner_records));
    if (hook && cfg.checkpoint_every > 0 && (j + 1) % cfg.checkpoint_every == 0)
      hook(j + 1, result.model);
  }
  return result;
}

}  // namespace apdm
