#pragma once

#include <functional>

#include "apdm/protection.hpp"

namespace apdm {

struct L2PConfig {
  std::size_t n_per = 20;      // simulated personalization steps per outer step
  std::size_t n_protect = 800; // outer protection steps
  double gamma_per = 1e-3;
  double gamma_protect = 1e-3;
  double beta = 1.0;
  std::size_t checkpoint_every = 0;  // 0 disables the hook
  bool record_draws = false;         // keep per-step draws for exact replay

  void validate() const;
};

// Elementwise sum of equal-length gradients, in list order.
Vec accumulate(const std::vector<Vec>& grads);

// Draws consumed by one inner step, in stream order: the personalization
// objective at theta'_i, then the protection loss at theta'_{i+1}.
struct L2PInnerRecord {
  DrawSet per_neg_draws;
  DrawSet per_ppl_draws;
  PairBatch protect_pairs;
  DrawSet protect_ppl_draws;
};

struct L2PResult {
  ConditionalDenoiser model;
  ExperimentTrace trace;  // j, L_protect, mean_inner_L_per, diag_cosine,
                          // g_count, inner_descent_viol
  std::vector<std::vector<L2PInnerRecord>> recorded;  // [outer][inner]
};

using CheckpointHook =
    std::function<void(std::size_t outer_step, const ConditionalDenoiser&)>;

// Dual-path protection. Each outer step j copies theta_j, runs n_per
// personalization descent steps on the copy, appends the protection gradient
// evaluated after every inner update, and applies the summed gradients to
// theta_j itself. First-order scheme: inner updates are not differentiated
// through.
//
// All draws come from the single master stream; per outer step the order is
//   protection loss at theta_j (traced value),
//   gradient diagnostics at theta_j,
//   then per inner step the order documented on L2PInnerRecord.
// The first inner step's objective is re-evaluated after the update on the
// same draws; an increase counts as an inner-descent violation in the trace.
L2PResult l2p_protect(const ConditionalDenoiser& theta0,
                      const ConditionalDenoiser& phi, const NoiseSchedule& sched,
                      const ConceptDataset& ds, const L2PConfig& cfg, Rng& rng,
                      const CheckpointHook& hook = {});

}  // namespace apdm
