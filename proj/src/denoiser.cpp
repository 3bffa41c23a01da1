#include "apdm/denoiser.hpp"

#include <cmath>
#include <numbers>

namespace apdm {

std::vector<int> Arch::layer_dims() const {
  std::vector<int> dims;
  dims.push_back(input_dim());
  for (int h : hidden) dims.push_back(h);
  dims.push_back(sample_dim);
  return dims;
}

std::size_t Arch::param_count() const {
  const auto dims = layer_dims();
  std::size_t n = 0;
  for (std::size_t l = 1; l < dims.size(); ++l)
    n += static_cast<std::size_t>(dims[l - 1]) * dims[l] + dims[l];
  return n;
}

void Arch::validate() const {
  if (sample_dim < 1) throw ConfigError("arch: sample_dim must be >= 1");
  if (cond_dim < 0) throw ConfigError("arch: cond_dim must be >= 0");
  if (hidden.empty()) throw ConfigError("arch: at least one hidden layer");
  for (int h : hidden)
    if (h < 1) throw ConfigError("arch: hidden layer width must be >= 1");
}

ConditioningEmbedding identifier_embedding(Vec v) {
  return {std::move(v), "identifier"};
}
ConditioningEmbedding prior_embedding(Vec v) { return {std::move(v), "prior"}; }
ConditioningEmbedding other_embedding(Vec v) { return {std::move(v), "other"}; }

void time_feature(int t, int T, double& f_sin, double& f_cos) {
  const double phase = std::numbers::pi * static_cast<double>(t) / T;
  f_sin = std::sin(phase);
  f_cos = std::cos(phase);
}

namespace {

void assemble_input(const Arch& arch, const Sample& x_t, int t, int T,
                    const ConditioningEmbedding& c, Vec& in) {
  if (static_cast<int>(x_t.size()) != arch.sample_dim)
    throw UsageError("denoiser: sample dimension mismatch");
  if (static_cast<int>(c.vector.size()) != arch.cond_dim)
    throw UsageError("denoiser: conditioning dimension mismatch");
  in.resize(arch.input_dim());
  std::size_t k = 0;
  for (double v : x_t) in[k++] = v;
  double fs, fc;
  time_feature(t, T, fs, fc);
  in[k++] = fs;
  in[k++] = fc;
  for (double v : c.vector) in[k++] = v;
}

}  // namespace

Sample ConditionalDenoiser::forward(const Sample& x_t, int t, int T,
                                    const ConditioningEmbedding& c,
                                    Activations& acts) const {
  const auto dims = arch.layer_dims();
  const std::size_t L = dims.size() - 1;
  if (params.size() != arch.param_count())
    throw UsageError("denoiser: parameter vector length mismatch");

  acts.act.resize(L + 1);
  assemble_input(arch, x_t, t, T, c, acts.act[0]);

  std::size_t off = 0;
  for (std::size_t l = 1; l <= L; ++l) {
    const int in_dim = dims[l - 1];
    const int out_dim = dims[l];
    const Vec& a_prev = acts.act[l - 1];
    Vec& a = acts.act[l];
    a.resize(out_dim);
    const double* W = params.data() + off;
    const double* b = params.data() + off + static_cast<std::size_t>(out_dim) * in_dim;
    for (int o = 0; o < out_dim; ++o) {
      double z = b[o];
      const double* w_row = W + static_cast<std::size_t>(o) * in_dim;
      for (int i = 0; i < in_dim; ++i) z += w_row[i] * a_prev[i];
      a[o] = (l < L) ? std::tanh(z) : z;
    }
    off += static_cast<std::size_t>(out_dim) * in_dim + out_dim;
  }
  return acts.act[L];
}

Sample ConditionalDenoiser::forward(const Sample& x_t, int t, int T,
                                    const ConditioningEmbedding& c) const {
  Activations acts;
  return forward(x_t, t, T, c, acts);
}

void ConditionalDenoiser::backward(const Activations& acts, const Vec& dL_dy,
                                   Vec& grad) const {
  const auto dims = arch.layer_dims();
  const std::size_t L = dims.size() - 1;
  if (grad.size() != params.size())
    throw UsageError("denoiser: gradient vector length mismatch");
  if (dL_dy.size() != static_cast<std::size_t>(dims[L]))
    throw UsageError("denoiser: upstream gradient dimension mismatch");

  // offs[l-1] is where layer l's parameters start.
  std::vector<std::size_t> offs(L + 1, 0);
  for (std::size_t l = 1; l <= L; ++l)
    offs[l] = offs[l - 1] +
              static_cast<std::size_t>(dims[l - 1]) * dims[l] + dims[l];

  Vec delta = dL_dy;  // dL/dz at the output layer (linear output)
  Vec delta_prev;
  for (std::size_t l = L; l >= 1; --l) {
    const int in_dim = dims[l - 1];
    const int out_dim = dims[l];
    const std::size_t off = offs[l - 1];
    const double* W = params.data() + off;
    double* gW = grad.data() + off;
    double* gb = grad.data() + off + static_cast<std::size_t>(out_dim) * in_dim;
    const Vec& a_prev = acts.act[l - 1];

    for (int o = 0; o < out_dim; ++o) {
      const double d = delta[o];
      double* gw_row = gW + static_cast<std::size_t>(o) * in_dim;
      for (int i = 0; i < in_dim; ++i) gw_row[i] += d * a_prev[i];
      gb[o] += d;
    }
    if (l > 1) {
      delta_prev.assign(in_dim, 0.0);
      for (int o = 0; o < out_dim; ++o) {
        const double d = delta[o];
        const double* w_row = W + static_cast<std::size_t>(o) * in_dim;
        for (int i = 0; i < in_dim; ++i) delta_prev[i] += w_row[i] * d;
      }
      // tanh' = 1 - a^2 at the pre-layer activation
      for (int i = 0; i < in_dim; ++i)
        delta_prev[i] *= 1.0 - a_prev[i] * a_prev[i];
      delta.swap(delta_prev);
    }
  }
}

ConditionalDenoiser init_denoiser(const Arch& arch, Rng& rng) {
  arch.validate();
  ConditionalDenoiser m;
  m.arch = arch;
  m.params.resize(arch.param_count());
  const auto dims = arch.layer_dims();
  std::size_t off = 0;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    const int in_dim = dims[l - 1];
    const int out_dim = dims[l];
    const double s = 1.0 / std::sqrt(static_cast<double>(in_dim));
    const std::size_t n = static_cast<std::size_t>(out_dim) * in_dim + out_dim;
    for (std::size_t k = 0; k < n; ++k)
      m.params[off + k] = (2.0 * rng.uniform() - 1.0) * s;
    off += n;
  }
  return m;
}

Sample predict_eps(const ConditionalDenoiser& model, const NoiseSchedule& sched,
                   const Sample& x_t, int t, const ConditioningEmbedding& c) {
  if (t < 1 || t > sched.T)
    throw IndexError("predict_eps: t out of range [1, T]");
  return model.forward(x_t, t, sched.T, c);
}

GradCheckReport grad_check(const DifferentiableLoss& f,
                           const ParamVector& params, double h, double tol) {
  if (!(h > 0.0)) throw UsageError("grad_check: h must be > 0");
  const ValueGrad base = f(params);
  if (!std::isfinite(base.value) || !all_finite(base.grad))
    throw NumericError("grad_check: non-finite loss or gradient");
  if (base.grad.size() != params.size())
    throw UsageError("grad_check: gradient length mismatch");

  GradCheckReport rep;
  rep.tol = tol;
  ParamVector p = params;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double fp = f(p).value;
    p[i] = saved - h;
    const double fm = f(p).value;
    p[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("grad_check: non-finite loss during differencing");
    const double fd = (fp - fm) / (2.0 * h);
    const double g = base.grad[i];
    const double denom = std::max({std::fabs(g), std::fabs(fd), 1e-6});
    const double rel = std::fabs(g - fd) / denom;
    if (rel >= rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_coord = i;
      rep.worst_analytic = g;
      rep.worst_numeric = fd;
    }
  }
  rep.pass = rep.max_rel_error <= tol;
  return rep;
}

}  // namespace apdm
