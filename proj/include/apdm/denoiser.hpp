#pragma once

#include <functional>
#include <string>
#include <vector>

#include "apdm/common.hpp"
#include "apdm/schedule.hpp"

namespace apdm {

// Fully-connected layout of the conditional noise predictor. The input is the
// concatenation of the noisy sample, a 2-d (sin, cos) time feature and the
// conditioning vector; every layer carries weights and a bias.
struct Arch {
  int sample_dim = 2;
  int cond_dim = 4;
  std::vector<int> hidden{32, 32};

  static constexpr int kTimeDim = 2;

  int input_dim() const { return sample_dim + kTimeDim + cond_dim; }
  // {input_dim, hidden..., sample_dim}
  std::vector<int> layer_dims() const;
  std::size_t param_count() const;
  void validate() const;

  bool operator==(const Arch&) const = default;
};

struct ConditioningEmbedding {
  Vec vector;
  std::string tag;  // "identifier", "prior" or "other"
};

ConditioningEmbedding identifier_embedding(Vec v);
ConditioningEmbedding prior_embedding(Vec v);
ConditioningEmbedding other_embedding(Vec v);

// Per-layer post-activation values kept around for the backward pass.
// act[0] is the assembled input, act[L] the network output.
struct Activations {
  std::vector<Vec> act;
};

// Time feature for step t of a T-step schedule: (sin(pi t/T), cos(pi t/T)).
// cos is strictly monotone on (0, 1], so distinct steps map to distinct
// features.
void time_feature(int t, int T, double& f_sin, double& f_cos);

struct ConditionalDenoiser {
  Arch arch;
  ParamVector params;

  // Forward pass; hidden activations are tanh, the output layer is linear.
  Sample forward(const Sample& x_t, int t, int T,
                 const ConditioningEmbedding& c, Activations& acts) const;
  Sample forward(const Sample& x_t, int t, int T,
                 const ConditioningEmbedding& c) const;

  // Accumulates d(loss)/d(params) into grad given dL/dy at the output.
  // acts must come from a forward call with the current params.
  void backward(const Activations& acts, const Vec& dL_dy, Vec& grad) const;
};

// Parameters drawn uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], layer by
// layer, weights before biases, in storage order.
ConditionalDenoiser init_denoiser(const Arch& arch, Rng& rng);

// Range-checked forward pass against a schedule.
Sample predict_eps(const ConditionalDenoiser& model, const NoiseSchedule& sched,
                   const Sample& x_t, int t, const ConditioningEmbedding& c);

struct ValueGrad {
  double value = 0.0;
  Vec grad;
};
using DifferentiableLoss = std::function<ValueGrad(const ParamVector&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  double tol = 0.0;
  bool pass = false;
};

// Central-difference check of f's analytic gradient. The per-coordinate
// relative error is |g - fd| / max(|g|, |fd|, 1e-6); the floor keeps
// coordinates whose true derivative is below measurement noise from
// dominating the report.
GradCheckReport grad_check(const DifferentiableLoss& f,
                           const ParamVector& params, double h, double tol);

}  // namespace apdm
