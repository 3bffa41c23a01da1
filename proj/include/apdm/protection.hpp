#pragma once

#include "apdm/concepts.hpp"
#include "apdm/personalization.hpp"

namespace apdm {

// One preference pair with its shared noising draw: both members are noised
// with the same (t, eps), and so are the trainable and reference predictions.
struct NoisedPair {
  Sample positive;
  Sample negative;
  int t = 1;
  Sample eps;
};

struct PairBatch {
  std::vector<NoisedPair> pairs;
};

// Pairs (positives[pairing[i]], negatives[i]) in i order, each with a fresh
// shared draw.
PairBatch make_pair_batch(const ConceptDataset& ds, const NoiseSchedule& sched,
                          Rng& rng);

struct AdvReport {
  double value = 0.0;
  Vec grad;
  double per_simple_value = 0.0;
  double ppl_value = 0.0;
  DrawSet per_draws;
  DrawSet ppl_draws;
};

// Naive adversarial objective: -per_simple_loss + lambda * ppl_loss.
AdvReport adv_loss(const ConditionalDenoiser& model, const NoiseSchedule& sched,
                   const ConceptDataset& ds, double lambda, Rng& rng);
AdvReport adv_loss(const ConditionalDenoiser& model, const NoiseSchedule& sched,
                   const ConceptDataset& ds, double lambda,
                   const DrawSet& per_draws, const DrawSet& ppl_draws);

// Per-pair preference loss -log sigmoid(-beta * (r_plus - r_minus)),
// evaluated stably for large arguments.
double dpo_pair_loss(double r_plus, double r_minus, double beta);

struct DpoReport {
  double value = 0.0;
  Vec grad;  // with respect to the trainable model only
};

// Pairwise protective loss. Per pair, r = |eps_theta - eps|^2 - |eps_phi -
// eps|^2 at the shared noising of each member; the loss is the mean of
// -log sigmoid(-beta (r+ - r-)). phi is never touched.
DpoReport dpo_loss(const ConditionalDenoiser& theta,
                   const ConditionalDenoiser& phi, const NoiseSchedule& sched,
                   const PairBatch& batch, const ConditioningEmbedding& c,
                   double beta);

struct ProtectReport {
  double value = 0.0;
  Vec grad;
  double dpo_value = 0.0;
  double ppl_value = 0.0;
  PairBatch pair_batch;
  DrawSet ppl_draws;
};

// Protection objective: dpo_loss (under the identifier embedding, pairs from
// the dataset pairing) + ppl_loss.
ProtectReport protect_loss(const ConditionalDenoiser& theta,
                           const ConditionalDenoiser& phi,
                           const NoiseSchedule& sched, const ConceptDataset& ds,
                           double beta, Rng& rng);
ProtectReport protect_loss(const ConditionalDenoiser& theta,
                           const ConditionalDenoiser& phi,
                           const NoiseSchedule& sched, const ConceptDataset& ds,
                           double beta, const PairBatch& batch,
                           const DrawSet& ppl_draws);

// Gradient interaction of the two naive-objective components, plus the
// first-order predicted loss changes under a step of size eta on the naive
// objective:
//   taylor_per = eta * (|g_per|^2 - g_per.g_ppl)   predicted rise of the
//                                                   subject loss
//   taylor_ppl = eta * (g_per.g_ppl - |g_ppl|^2)   predicted change of the
//                                                   preservation loss
struct GradientDiagnostics {
  double norm_per = 0.0;
  double norm_ppl = 0.0;
  double inner = 0.0;
  double cosine = 0.0;  // NaN when degenerate
  double taylor_per = 0.0;
  double taylor_ppl = 0.0;
  double eta = 0.0;
  bool degenerate = false;  // a zero-norm gradient leaves cosine undefined
};

GradientDiagnostics diagnostics_from_gradients(const Vec& g_per,
                                               const Vec& g_ppl, double eta);

struct DiagnoseReport {
  GradientDiagnostics diag;
  Vec g_per;
  Vec g_ppl;
  DrawSet per_draws;
  DrawSet ppl_draws;
};

DiagnoseReport diagnose(const ConditionalDenoiser& model,
                        const NoiseSchedule& sched, const ConceptDataset& ds,
                        double eta, Rng& rng);

}  // namespace apdm
