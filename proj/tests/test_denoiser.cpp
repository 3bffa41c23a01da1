#include <doctest.h>

#include <cmath>

#include "apdm/denoiser.hpp"
#include "apdm/losses.hpp"

using namespace apdm;

TEST_CASE("init is deterministic given the seed") {
  Arch arch;
  Rng a(7), b(7);
  const ConditionalDenoiser m1 = init_denoiser(arch, a);
  const ConditionalDenoiser m2 = init_denoiser(arch, b);
  CHECK(m1.params == m2.params);
}

TEST_CASE("zero-width hidden layer is rejected") {
  Arch arch;
  arch.hidden = {8, 0};
  Rng rng(1);
  CHECK_THROWS_AS(init_denoiser(arch, rng), ConfigError);
}

TEST_CASE("parameter count matches the counting oracle") {
  Arch arch;  // [2+2+4 -> 32 -> 32 -> 2]
  arch.sample_dim = 2;
  arch.cond_dim = 4;
  arch.hidden = {32, 32};
  const std::size_t expected = (8 * 32 + 32) + (32 * 32 + 32) + (32 * 2 + 2);
  CHECK(arch.param_count() == expected);
  CHECK(expected == 1410);

  Rng rng(3);
  CHECK(init_denoiser(arch, rng).params.size() == expected);
}

TEST_CASE("all-zero parameters give the zero function") {
  Arch arch;
  ConditionalDenoiser m;
  m.arch = arch;
  m.params.assign(arch.param_count(), 0.0);
  const ConditioningEmbedding c = prior_embedding({1.0, 0.0, 0.0, 0.0});
  const Sample out = m.forward({0.7, -0.2}, 3, 10, c);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
}

TEST_CASE("forward is deterministic for fixed params and inputs") {
  Arch arch;
  Rng rng(11);
  const ConditionalDenoiser m = init_denoiser(arch, rng);
  const ConditioningEmbedding c = identifier_embedding({0.0, 1.0, 0.0, 0.0});
  const Sample a = m.forward({0.1, 0.2}, 5, 50, c);
  const Sample b = m.forward({0.1, 0.2}, 5, 50, c);
  CHECK(a == b);
}

TEST_CASE("one-hidden-unit network matches a hand computation") {
  Arch arch;
  arch.sample_dim = 1;
  arch.cond_dim = 1;
  arch.hidden = {1};
  ConditionalDenoiser m;
  m.arch = arch;
  // Layout: W1 row (4), b1, W2 (1), b2.
  m.params = {0.3, -0.7, 0.15, 0.5, -0.1, 1.3, 0.25};
  const int t = 3, T = 9;
  const double x = 0.42, cond = -0.8;
  const Sample out = m.forward({x}, t, T, other_embedding({cond}));

  double fs, fc;
  time_feature(t, T, fs, fc);
  const double hidden =
      std::tanh(0.3 * x + (-0.7) * fs + 0.15 * fc + 0.5 * cond + (-0.1));
  const double expected = 1.3 * hidden + 0.25;
  CHECK(std::fabs(out[0] - expected) <= 1e-12);
}

TEST_CASE("predict_eps validates step range and dimensions") {
  Arch arch;
  Rng rng(5);
  const ConditionalDenoiser m = init_denoiser(arch, rng);
  const NoiseSchedule sched = build_schedule(10, 0.01, 0.2);
  const ConditioningEmbedding c = prior_embedding({1.0, 0.0, 0.0, 0.0});
  CHECK_THROWS_AS(predict_eps(m, sched, {0.0, 0.0}, 0, c), IndexError);
  CHECK_THROWS_AS(predict_eps(m, sched, {0.0, 0.0}, 11, c), IndexError);
  CHECK_THROWS_AS(predict_eps(m, sched, {0.0}, 1, c), UsageError);
  CHECK_THROWS_AS(
      predict_eps(m, sched, {0.0, 0.0}, 1, prior_embedding({1.0})), UsageError);
}

TEST_CASE("grad_check is exact on a quadratic") {
  auto quad = [](const ParamVector& p) {
    ValueGrad vg;
    vg.value = squared_norm(p);
    vg.grad = scaled(p, 2.0);
    return vg;
  };
  Rng rng(17);
  const ParamVector p = normal_vec(rng, 12);
  const GradCheckReport rep = grad_check(quad, p, 1e-5, 1e-4);
  CHECK(rep.pass);
  CHECK(rep.max_rel_error < 1e-8);
}

TEST_CASE("grad_check accepts the denoising loss on a tiny model") {
  Arch arch;
  arch.sample_dim = 2;
  arch.cond_dim = 1;
  arch.hidden = {3};  // (5*3+3) + (3*2+2) = 26 params
  Rng rng(23);
  ConditionalDenoiser m = init_denoiser(arch, rng);
  CHECK(m.params.size() <= 50);
  const NoiseSchedule sched = build_schedule(8, 0.01, 0.3);
  const std::vector<Sample> batch = {{0.2, -0.4}, {1.0, 0.3}, {-0.6, 0.9}};
  const ConditioningEmbedding c = identifier_embedding({0.7});
  const DrawSet draws = make_draws(sched, batch.size(), 2, rng);

  auto loss = [&](const ParamVector& p) {
    ConditionalDenoiser probe = m;
    probe.params = p;
    const LossReport rep = simple_loss(probe, sched, batch, c, draws);
    return ValueGrad{rep.value, rep.grad};
  };
  const GradCheckReport rep = grad_check(loss, m.params, 1e-5, 1e-4);
  CHECK(rep.pass);
}

TEST_CASE("grad_check with zero tolerance fails on a nonlinear loss") {
  auto cubicish = [](const ParamVector& p) {
    ValueGrad vg;
    vg.value = 0.0;
    vg.grad.assign(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      vg.value += std::tanh(p[i]);
      vg.grad[i] = 1.0 - std::tanh(p[i]) * std::tanh(p[i]);
    }
    return vg;
  };
  Rng rng(31);
  const ParamVector p = normal_vec(rng, 6);
  const GradCheckReport rep = grad_check(cubicish, p, 1e-3, 0.0);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("grad_check raises on non-finite losses") {
  auto bad = [](const ParamVector& p) {
    return ValueGrad{std::numeric_limits<double>::infinity(),
                     Vec(p.size(), 0.0)};
  };
  CHECK_THROWS_AS(grad_check(bad, {1.0}, 1e-5, 1e-4), NumericError);
}

TEST_CASE("parameter copies are value-independent") {
  Arch arch;
  Rng rng(41);
  const ConditionalDenoiser original = init_denoiser(arch, rng);
  const ParamVector before = original.params;
  ConditionalDenoiser copy = original;
  for (auto& p : copy.params) p += 1.0;
  CHECK(original.params == before);
}
