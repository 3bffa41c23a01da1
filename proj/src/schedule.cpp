#include "apdm/schedule.hpp"

#include <cmath>

namespace apdm {

NoiseSchedule build_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw ConfigError("build_schedule: T must be >= 1");
  if (!(beta_start > 0.0))
    throw ConfigError("build_schedule: beta_start must be > 0");
  if (!(beta_end < 1.0))
    throw ConfigError("build_schedule: beta_end must be < 1");
  if (!(beta_start <= beta_end))
    throw ConfigError("build_schedule: beta_start must be <= beta_end");

  NoiseSchedule s;
  s.T = T;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.betas.resize(T);
  s.alphas.resize(T);
  s.alpha_bars.resize(T);

  double prod = 1.0;
  for (int i = 0; i < T; ++i) {
    const double frac = (T == 1) ? 0.0 : static_cast<double>(i) / (T - 1);
    s.betas[i] = beta_start + frac * (beta_end - beta_start);
    s.alphas[i] = 1.0 - s.betas[i];
    prod *= s.alphas[i];
    s.alpha_bars[i] = prod;
  }
  return s;
}

Sample forward_noise(const NoiseSchedule& sched, const Sample& x0, int t,
                     const Sample& eps) {
  if (t < 1 || t > sched.T)
    throw IndexError("forward_noise: t out of range [1, T]");
  if (x0.size() != eps.size())
    throw UsageError("forward_noise: x0/eps dimension mismatch");
  const double abar = sched.alpha_bars[t - 1];
  const double a = std::sqrt(abar);
  const double b = std::sqrt(1.0 - abar);
  Sample out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

}  // namespace apdm
