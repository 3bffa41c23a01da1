#include "apdm/protection.hpp"

#include <cmath>
#include <limits>

namespace apdm {

PairBatch make_pair_batch(const ConceptDataset& ds, const NoiseSchedule& sched,
                          Rng& rng) {
  ds.validate();
  PairBatch batch;
  batch.pairs.reserve(ds.negatives.size());
  const int d = static_cast<int>(ds.negatives.front().size());
  for (std::size_t i = 0; i < ds.negatives.size(); ++i) {
    NoisedPair p;
    p.positive = ds.positives[ds.pairing[i]];
    p.negative = ds.negatives[i];
    p.t = rng.uniform_int(1, sched.T);
    p.eps = normal_vec(rng, static_cast<std::size_t>(d));
    batch.pairs.push_back(std::move(p));
  }
  return batch;
}

AdvReport adv_loss(const ConditionalDenoiser& model, const NoiseSchedule& sched,
                   const ConceptDataset& ds, double lambda,
                   const DrawSet& per_draws, const DrawSet& ppl_draws) {
  if (!(lambda > 0.0)) throw ConfigError("adv_loss: lambda must be > 0");
  LossReport per = per_simple_loss(model, sched, ds, per_draws);
  LossReport ppl = ppl_loss(model, sched, ds, ppl_draws);
  AdvReport rep;
  rep.value = -per.value + lambda * ppl.value;
  rep.grad.resize(per.grad.size());
  for (std::size_t i = 0; i < rep.grad.size(); ++i)
    rep.grad[i] = -per.grad[i] + lambda * ppl.grad[i];
  rep.per_simple_value = per.value;
  rep.ppl_value = ppl.value;
  rep.per_draws = std::move(per.draws);
  rep.ppl_draws = std::move(ppl.draws);
  return rep;
}

AdvReport adv_loss(const ConditionalDenoiser& model, const NoiseSchedule& sched,
                   const ConceptDataset& ds, double lambda, Rng& rng) {
  if (!(lambda > 0.0)) throw ConfigError("adv_loss: lambda must be > 0");
  const DrawSet per_draws =
      make_draws(sched, ds.negatives.size(), model.arch.sample_dim, rng);
  const DrawSet ppl_draws =
      make_draws(sched, ds.priors.size(), model.arch.sample_dim, rng);
  return adv_loss(model, sched, ds, lambda, per_draws, ppl_draws);
}

namespace {

// log(1 + exp(u)) without overflow.
double softplus(double u) {
  if (u > 40.0) return u;
  if (u < -40.0) return std::exp(u);
  return std::log1p(std::exp(u));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// |pred - eps|^2 for one noised input; optionally keeps activations.
double mse_term(const ConditionalDenoiser& model, const NoiseSchedule& sched,
                const Sample& x0, int t, const Sample& eps,
                const ConditioningEmbedding& c, Activations& acts,
                Sample& pred) {
  const Sample x_t = forward_noise(sched, x0, t, eps);
  pred = model.forward(x_t, t, sched.T, c, acts);
  double s = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double diff = pred[k] - eps[k];
    s += diff * diff;
  }
  return s;
}

}  // namespace

double dpo_pair_loss(double r_plus, double r_minus, double beta) {
  // -log sigmoid(-beta (r+ - r-)) = softplus(beta (r+ - r-))
  return softplus(beta * (r_plus - r_minus));
}

DpoReport dpo_loss(const ConditionalDenoiser& theta,
                   const ConditionalDenoiser& phi, const NoiseSchedule& sched,
                   const PairBatch& batch, const ConditioningEmbedding& c,
                   double beta) {
  if (!(beta > 0.0)) throw ConfigError("dpo_loss: beta must be > 0");
  if (batch.pairs.empty()) throw UsageError("dpo_loss: empty pair batch");

  DpoReport rep;
  rep.grad.assign(theta.params.size(), 0.0);
  const double w = 1.0 / static_cast<double>(batch.pairs.size());

  Activations acts_pos, acts_neg, acts_phi;
  Sample pred_pos, pred_neg, pred_phi;
  Vec upstream;
  double total = 0.0;
  for (const NoisedPair& p : batch.pairs) {
    const double a_pos =
        mse_term(theta, sched, p.positive, p.t, p.eps, c, acts_pos, pred_pos);
    const double a_neg =
        mse_term(theta, sched, p.negative, p.t, p.eps, c, acts_neg, pred_neg);
    const double a_pos_ref =
        mse_term(phi, sched, p.positive, p.t, p.eps, c, acts_phi, pred_phi);
    const double a_neg_ref =
        mse_term(phi, sched, p.negative, p.t, p.eps, c, acts_phi, pred_phi);
    const double r_plus = a_pos - a_pos_ref;
    const double r_minus = a_neg - a_neg_ref;
    const double z = -beta * (r_plus - r_minus);
    if (!std::isfinite(z))
      throw NumericError("dpo_loss: non-finite sigmoid argument");
    total += softplus(-z);

    // d(pair loss)/dr+ = beta * sigmoid(-z), dr+/dtheta via the theta branch
    // of the positive term; the reference terms are constants.
    const double coeff = w * beta * sigmoid(-z);
    upstream.resize(pred_pos.size());
    for (std::size_t k = 0; k < pred_pos.size(); ++k)
      upstream[k] = coeff * 2.0 * (pred_pos[k] - p.eps[k]);
    theta.backward(acts_pos, upstream, rep.grad);
    for (std::size_t k = 0; k < pred_neg.size(); ++k)
      upstream[k] = -coeff * 2.0 * (pred_neg[k] - p.eps[k]);
    theta.backward(acts_neg, upstream, rep.grad);
  }
  rep.value = total * w;
  return rep;
}

ProtectReport protect_loss(const ConditionalDenoiser& theta,
                           const ConditionalDenoiser& phi,
                           const NoiseSchedule& sched, const ConceptDataset& ds,
                           double beta, const PairBatch& batch,
                           const DrawSet& ppl_draws) {
  DpoReport dpo = dpo_loss(theta, phi, sched, batch, ds.c_per, beta);
  LossReport ppl = ppl_loss(theta, sched, ds, ppl_draws);
  ProtectReport rep;
  rep.value = dpo.value + ppl.value;
  rep.grad = sum(dpo.grad, ppl.grad);
  rep.dpo_value = dpo.value;
  rep.ppl_value = ppl.value;
  rep.pair_batch = batch;
  rep.ppl_draws = std::move(ppl.draws);
  return rep;
}

ProtectReport protect_loss(const ConditionalDenoiser& theta,
                           const ConditionalDenoiser& phi,
                           const NoiseSchedule& sched, const ConceptDataset& ds,
                           double beta, Rng& rng) {
  const PairBatch batch = make_pair_batch(ds, sched, rng);
  const DrawSet ppl_draws =
      make_draws(sched, ds.priors.size(), theta.arch.sample_dim, rng);
  return protect_loss(theta, phi, sched, ds, beta, batch, ppl_draws);
}

GradientDiagnostics diagnostics_from_gradients(const Vec& g_per,
                                               const Vec& g_ppl, double eta) {
  if (!(eta > 0.0)) throw ConfigError("diagnostics: eta must be > 0");
  GradientDiagnostics d;
  d.eta = eta;
  // Squared norms feed the Taylor fields directly; squaring the rounded
  // norms back would inject avoidable rounding into their signs.
  const double sq_per = squared_norm(g_per);
  const double sq_ppl = squared_norm(g_ppl);
  d.norm_per = std::sqrt(sq_per);
  d.norm_ppl = std::sqrt(sq_ppl);
  d.inner = dot(g_per, g_ppl);
  if (d.norm_per == 0.0 || d.norm_ppl == 0.0) {
    d.degenerate = true;
    d.cosine = std::numeric_limits<double>::quiet_NaN();
  } else {
    d.cosine = d.inner / (d.norm_per * d.norm_ppl);
  }
  d.taylor_per = eta * (sq_per - d.inner);
  d.taylor_ppl = eta * (d.inner - sq_ppl);
  return d;
}

DiagnoseReport diagnose(const ConditionalDenoiser& model,
                        const NoiseSchedule& sched, const ConceptDataset& ds,
                        double eta, Rng& rng) {
  if (!(eta > 0.0)) throw ConfigError("diagnose: eta must be > 0");
  LossReport per = per_simple_loss(model, sched, ds, rng);
  LossReport ppl = ppl_loss(model, sched, ds, rng);
  DiagnoseReport rep;
  rep.diag = diagnostics_from_gradients(per.grad, ppl.grad, eta);
  rep.g_per = std::move(per.grad);
  rep.g_ppl = std::move(ppl.grad);
  rep.per_draws = std::move(per.draws);
  rep.ppl_draws = std::move(ppl.draws);
  return rep;
}

}  // namespace apdm
