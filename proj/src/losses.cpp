#include "apdm/losses.hpp"

#include <cmath>

namespace apdm {

DrawSet make_draws(const NoiseSchedule& sched, std::size_t n, int dim,
                   Rng& rng) {
  DrawSet draws(n);
  for (auto& d : draws) {
    d.t = rng.uniform_int(1, sched.T);
    d.eps = normal_vec(rng, static_cast<std::size_t>(dim));
  }
  return draws;
}

LossReport simple_loss(const ConditionalDenoiser& model,
                       const NoiseSchedule& sched,
                       const std::vector<Sample>& batch,
                       const ConditioningEmbedding& c, const DrawSet& draws) {
  if (batch.empty()) throw UsageError("simple_loss: empty batch");
  if (draws.size() != batch.size())
    throw UsageError("simple_loss: draw count must match batch size");

  LossReport rep;
  rep.grad.assign(model.params.size(), 0.0);
  rep.draws = draws;
  const double w = 1.0 / static_cast<double>(batch.size());
  Activations acts;
  Vec upstream;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Draw& d = draws[i];
    const Sample x_t = forward_noise(sched, batch[i], d.t, d.eps);
    const Sample pred = model.forward(x_t, d.t, sched.T, c, acts);
    upstream.resize(pred.size());
    double term = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double diff = pred[k] - d.eps[k];
      term += diff * diff;
      upstream[k] = 2.0 * w * diff;
    }
    total += term;
    model.backward(acts, upstream, rep.grad);
  }
  rep.value = total * w;
  return rep;
}

LossReport simple_loss(const ConditionalDenoiser& model,
                       const NoiseSchedule& sched,
                       const std::vector<Sample>& batch,
                       const ConditioningEmbedding& c, Rng& rng) {
  if (batch.empty()) throw UsageError("simple_loss: empty batch");
  const DrawSet draws =
      make_draws(sched, batch.size(), model.arch.sample_dim, rng);
  return simple_loss(model, sched, batch, c, draws);
}

std::vector<Sample> sample(const ConditionalDenoiser& model,
                           const NoiseSchedule& sched,
                           const ConditioningEmbedding& c, std::size_t n,
                           Rng& rng) {
  if (n < 1) throw UsageError("sample: n must be >= 1");
  const int d = model.arch.sample_dim;
  std::vector<Sample> out;
  out.reserve(n);
  Activations acts;
  for (std::size_t k = 0; k < n; ++k) {
    Sample x = normal_vec(rng, static_cast<std::size_t>(d));
    for (int t = sched.T; t >= 1; --t) {
      const double beta = sched.betas[t - 1];
      const double alpha = sched.alphas[t - 1];
      const double abar = sched.alpha_bars[t - 1];
      const Sample pred = model.forward(x, t, sched.T, c, acts);
      const double coef = beta / std::sqrt(1.0 - abar);
      const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
      for (int i = 0; i < d; ++i) x[i] = (x[i] - coef * pred[i]) * inv_sqrt_alpha;
      if (t > 1) {
        const double sigma = std::sqrt(beta);
        for (int i = 0; i < d; ++i) x[i] += sigma * rng.normal();
      }
    }
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace apdm
