#include <doctest.h>

#include <cmath>
#include <numbers>

#include "apdm/protection.hpp"

using namespace apdm;

namespace {

constexpr double kLn2 = 0.6931471805599453;

ConceptDataset tiny_dataset() {
  ConceptDataset ds;
  ds.negatives = {{0.8, 0.8}, {0.9, 0.7}};
  ds.positives = {{0.1, -1.2}, {1.3, 0.2}};
  ds.priors = {{1.1, 0.1}, {-0.2, 1.2}, {0.0, -1.3}};
  ds.pairing = {1, 0};
  ds.c_per = identifier_embedding({0.0, 1.0, 0.0, 0.0});
  ds.c_pr = prior_embedding({1.0, 0.0, 0.0, 0.0});
  return ds;
}

Arch tiny_arch() {
  Arch a;
  a.sample_dim = 2;
  a.cond_dim = 4;
  a.hidden = {3};
  return a;
}

// Scalar 1-hidden-unit forward: params {w_x, w_sin, w_cos, w_c, b1, w_out,
// b_out}, the same layout the denoiser uses.
double scalar_net(const ParamVector& p, double x, int t, int T, double c,
                  double* hidden_out = nullptr) {
  const double phase = std::numbers::pi * static_cast<double>(t) / T;
  const double h =
      std::tanh(p[0] * x + p[1] * std::sin(phase) + p[2] * std::cos(phase) +
                p[3] * c + p[4]);
  if (hidden_out) *hidden_out = h;
  return p[5] * h + p[6];
}

}  // namespace

TEST_CASE("adv_loss anchors and definitional identity") {
  const ConceptDataset ds = tiny_dataset();
  const NoiseSchedule sched = build_schedule(9, 0.02, 0.3);

  ConditionalDenoiser zero;
  zero.arch = tiny_arch();
  zero.params.assign(zero.arch.param_count(), 0.0);
  const DrawSet per0(ds.negatives.size(), {1, {0.0, 0.0}});
  const DrawSet ppl0(ds.priors.size(), {2, {0.0, 0.0}});
  CHECK(adv_loss(zero, sched, ds, 1.0, per0, ppl0).value == 0.0);

  Rng init(12);
  const ConditionalDenoiser m = init_denoiser(tiny_arch(), init);
  Rng rng(345);
  const AdvReport rep = adv_loss(m, sched, ds, 1.0, rng);
  const LossReport per = per_simple_loss(m, sched, ds, rep.per_draws);
  const LossReport ppl = ppl_loss(m, sched, ds, rep.ppl_draws);
  CHECK(rep.value == -per.value + ppl.value);
}

TEST_CASE("adv_loss gradient matches finite differences") {
  const ConceptDataset ds = tiny_dataset();
  const NoiseSchedule sched = build_schedule(9, 0.02, 0.3);
  Rng init(13);
  const ConditionalDenoiser m = init_denoiser(tiny_arch(), init);
  Rng rng(456);
  const AdvReport base = adv_loss(m, sched, ds, 2.5, rng);
  auto loss = [&](const ParamVector& p) {
    ConditionalDenoiser probe = m;
    probe.params = p;
    const AdvReport rep =
        adv_loss(probe, sched, ds, 2.5, base.per_draws, base.ppl_draws);
    return ValueGrad{rep.value, rep.grad};
  };
  CHECK(grad_check(loss, m.params, 1e-5, 1e-4).pass);
}

TEST_CASE("adv_loss rejects non-positive lambda") {
  const ConceptDataset ds = tiny_dataset();
  const NoiseSchedule sched = build_schedule(9, 0.02, 0.3);
  Rng init(14);
  const ConditionalDenoiser m = init_denoiser(tiny_arch(), init);
  Rng rng(1);
  CHECK_THROWS_AS(adv_loss(m, sched, ds, 0.0, rng), ConfigError);
  CHECK_THROWS_AS(adv_loss(m, sched, ds, -1.0, rng), ConfigError);
}

TEST_CASE("dpo_loss at the reference equals ln 2 with informative gradient") {
  const ConceptDataset ds = tiny_dataset();
  const NoiseSchedule sched = build_schedule(9, 0.02, 0.3);
  Rng init(15);
  const ConditionalDenoiser m = init_denoiser(tiny_arch(), init);
  Rng rng(777);
  for (int trial = 0; trial < 20; ++trial) {
    const PairBatch batch = make_pair_batch(ds, sched, rng);
    const double beta = 0.1 + rng.uniform() * 5.0;
    const DpoReport rep = dpo_loss(m, m, sched, batch, ds.c_per, beta);
    CHECK(std::fabs(rep.value - kLn2) <= 1e-9);
    CHECK(norm(rep.grad) > 0.0);
  }
}

TEST_CASE("dpo_loss tends to ln 2 as beta vanishes") {
  const ConceptDataset ds = tiny_dataset();
  const NoiseSchedule sched = build_schedule(9, 0.02, 0.3);
  Rng init_theta(16), init_phi(17);
  const ConditionalDenoiser theta = init_denoiser(tiny_arch(), init_theta);
  const ConditionalDenoiser phi = init_denoiser(tiny_arch(), init_phi);
  Rng rng(888);
  const PairBatch batch = make_pair_batch(ds, sched, rng);
  const DpoReport rep = dpo_loss(theta, phi, sched, batch, ds.c_per, 1e-9);
  CHECK(std::fabs(rep.value - kLn2) <= 1e-6);
}

TEST_CASE("dpo_loss matches a from-scratch scalar evaluation") {
  Arch arch;
  arch.sample_dim = 1;
  arch.cond_dim = 1;
  arch.hidden = {1};
  ConditionalDenoiser theta, phi;
  theta.arch = phi.arch = arch;
  theta.params = {0.3, -0.7, 0.15, 0.5, -0.1, 1.3, 0.25};
  phi.params = {-0.2, 0.4, 0.6, -0.3, 0.2, 0.9, -0.15};

  const NoiseSchedule sched = build_schedule(5, 0.05, 0.3);
  const double beta = 1.7, cond = 0.8, eps = 0.35;
  const int t = 2;
  PairBatch batch;
  batch.pairs = {{{0.6}, {-1.1}, t, {eps}}};
  const ConditioningEmbedding c = identifier_embedding({cond});

  const DpoReport rep = dpo_loss(theta, phi, sched, batch, c, beta);

  // From-scratch evaluation: noising, four forward passes, sigmoid and the
  // chain rule, all in plain scalar arithmetic.
  const double abar = sched.alpha_bars[t - 1];
  const double x_pos = std::sqrt(abar) * 0.6 + std::sqrt(1.0 - abar) * eps;
  const double x_neg = std::sqrt(abar) * -1.1 + std::sqrt(1.0 - abar) * eps;
  double h_pos, h_neg;
  const double y_pos = scalar_net(theta.params, x_pos, t, sched.T, cond, &h_pos);
  const double y_neg = scalar_net(theta.params, x_neg, t, sched.T, cond, &h_neg);
  const double y_pos_ref = scalar_net(phi.params, x_pos, t, sched.T, cond);
  const double y_neg_ref = scalar_net(phi.params, x_neg, t, sched.T, cond);
  const double r_pos = (y_pos - eps) * (y_pos - eps) -
                       (y_pos_ref - eps) * (y_pos_ref - eps);
  const double r_neg = (y_neg - eps) * (y_neg - eps) -
                       (y_neg_ref - eps) * (y_neg_ref - eps);
  const double z = -beta * (r_pos - r_neg);
  const double expected_loss = std::log(1.0 + std::exp(-z));
  CHECK(std::fabs(rep.value - expected_loss) <= 1e-10);

  const double sig_neg_z = 1.0 / (1.0 + std::exp(z));
  const double coeff = beta * sig_neg_z;
  const double phase = std::numbers::pi * static_cast<double>(t) / sched.T;
  const double in_pos[5] = {x_pos, std::sin(phase), std::cos(phase), cond, 1.0};
  const double in_neg[5] = {x_neg, std::sin(phase), std::cos(phase), cond, 1.0};
  Vec expected_grad(7, 0.0);
  const double up_pos = coeff * 2.0 * (y_pos - eps);
  const double up_neg = -coeff * 2.0 * (y_neg - eps);
  for (int i = 0; i < 5; ++i) {
    expected_grad[i] +=
        up_pos * theta.params[5] * (1.0 - h_pos * h_pos) * in_pos[i];
    expected_grad[i] +=
        up_neg * theta.params[5] * (1.0 - h_neg * h_neg) * in_neg[i];
  }
  expected_grad[5] = up_pos * h_pos + up_neg * h_neg;
  expected_grad[6] = up_pos + up_neg;

  REQUIRE(rep.grad.size() == expected_grad.size());
  for (std::size_t i = 0; i < expected_grad.size(); ++i)
    CHECK(std::fabs(rep.grad[i] - expected_grad[i]) <= 1e-10);
}

TEST_CASE("per-pair preference loss is strictly monotone in the gap") {
  Rng rng(31);
  for (double beta : {0.5, 1.0, 5.0}) {
    double gap = -30.0;
    double prev = dpo_pair_loss(gap, 0.0, beta);
    for (int k = 0; k < 200; ++k) {
      gap += 0.3 + rng.uniform();
      const double cur = dpo_pair_loss(gap, 0.0, beta);
      CHECK(cur > prev);
      prev = cur;
    }
  }
}

TEST_CASE("dpo_loss rejects bad arguments") {
  const ConceptDataset ds = tiny_dataset();
  const NoiseSchedule sched = build_schedule(9, 0.02, 0.3);
  Rng init(18);
  const ConditionalDenoiser m = init_denoiser(tiny_arch(), init);
  Rng rng(5);
  const PairBatch batch = make_pair_batch(ds, sched, rng);
  CHECK_THROWS_AS(dpo_loss(m, m, sched, batch, ds.c_per, 0.0), ConfigError);
  CHECK_THROWS_AS(dpo_loss(m, m, sched, PairBatch{}, ds.c_per, 1.0), UsageError);
}

TEST_CASE("protect_loss anchors at ln 2 and splits exactly") {
  const ConceptDataset ds = tiny_dataset();
  const NoiseSchedule sched = build_schedule(9, 0.02, 0.3);

  ConditionalDenoiser zero;
  zero.arch = tiny_arch();
  zero.params.assign(zero.arch.param_count(), 0.0);
  Rng rng0(9);
  PairBatch batch = make_pair_batch(ds, sched, rng0);
  const DrawSet ppl0(ds.priors.size(), {2, {0.0, 0.0}});
  const ProtectReport anchored =
      protect_loss(zero, zero, sched, ds, 1.0, batch, ppl0);
  CHECK(std::fabs(anchored.value - kLn2) <= 1e-9);
  CHECK(anchored.ppl_value == 0.0);

  Rng init_theta(19), init_phi(20);
  const ConditionalDenoiser theta = init_denoiser(tiny_arch(), init_theta);
  const ConditionalDenoiser phi = init_denoiser(tiny_arch(), init_phi);
  Rng rng(606);
  const ProtectReport rep = protect_loss(theta, phi, sched, ds, 1.0, rng);
  const DpoReport dpo = dpo_loss(theta, phi, sched, rep.pair_batch, ds.c_per, 1.0);
  const LossReport ppl = ppl_loss(theta, sched, ds, rep.ppl_draws);
  CHECK(rep.value == dpo.value + ppl.value);
  for (std::size_t i = 0; i < rep.grad.size(); ++i)
    CHECK(rep.grad[i] == dpo.grad[i] + ppl.grad[i]);
}

TEST_CASE("protect_loss gradient matches finite differences") {
  const ConceptDataset ds = tiny_dataset();
  const NoiseSchedule sched = build_schedule(9, 0.02, 0.3);
  Rng init_theta(21), init_phi(22);
  const ConditionalDenoiser theta = init_denoiser(tiny_arch(), init_theta);
  const ConditionalDenoiser phi = init_denoiser(tiny_arch(), init_phi);
  Rng rng(707);
  const ProtectReport base = protect_loss(theta, phi, sched, ds, 1.3, rng);
  auto loss = [&](const ParamVector& p) {
    ConditionalDenoiser probe = theta;
    probe.params = p;
    const ProtectReport rep = protect_loss(probe, phi, sched, ds, 1.3,
                                           base.pair_batch, base.ppl_draws);
    return ValueGrad{rep.value, rep.grad};
  };
  CHECK(grad_check(loss, theta.params, 1e-5, 1e-4).pass);
}

TEST_CASE("reference parameters are never mutated by protection calls") {
  const ConceptDataset ds = tiny_dataset();
  const NoiseSchedule sched = build_schedule(9, 0.02, 0.3);
  Rng init_theta(23), init_phi(24);
  const ConditionalDenoiser theta = init_denoiser(tiny_arch(), init_theta);
  const ConditionalDenoiser phi = init_denoiser(tiny_arch(), init_phi);
  const ParamVector phi_before = phi.params;
  Rng rng(808);
  (void)protect_loss(theta, phi, sched, ds, 1.0, rng);
  const PairBatch batch = make_pair_batch(ds, sched, rng);
  (void)dpo_loss(theta, phi, sched, batch, ds.c_per, 2.0);
  CHECK(phi.params == phi_before);
}

TEST_CASE("aligned synthetic gradients: the two descent demands exclude each other") {
  Rng rng(1001);
  int checked = 0;
  for (int trial = 0; trial < 1200; ++trial) {
    const std::size_t dim = 1 + static_cast<std::size_t>(rng.uniform_int(1, 40));
    Vec g = normal_vec(rng, dim);
    if (norm(g) == 0.0) continue;
    const double k = rng.uniform() * 10.0;
    if (k == 0.0) continue;
    const Vec g_ppl = scaled(g, k);
    const GradientDiagnostics d = diagnostics_from_gradients(g, g_ppl, 0.01);
    CHECK(std::fabs(d.cosine - 1.0) <= 1e-12);
    // Exact-arithmetic exclusivity of the two predicates.
    const bool both = d.taylor_per > 0.0 && d.taylor_ppl < 0.0;
    CHECK_FALSE(both);
    ++checked;
  }
  CHECK(checked >= 1000);
}

TEST_CASE("orthogonal synthetic gradients") {
  const Vec g_per = {2.0, 0.0, 0.0};
  const Vec g_ppl = {0.0, -3.0, 0.0};
  const double eta = 0.25;
  const GradientDiagnostics d = diagnostics_from_gradients(g_per, g_ppl, eta);
  CHECK(d.cosine == 0.0);
  CHECK(d.inner == 0.0);
  CHECK(d.taylor_per == eta * squared_norm(g_per));
  CHECK(d.taylor_ppl == -eta * squared_norm(g_ppl));
}

TEST_CASE("degenerate diagnostics are flagged with NaN cosine") {
  const Vec zero(5, 0.0);
  const Vec g = {1.0, 2.0, 0.0, 0.0, 0.0};
  const GradientDiagnostics d = diagnostics_from_gradients(zero, g, 0.1);
  CHECK(d.degenerate);
  CHECK(std::isnan(d.cosine));
}

TEST_CASE("diagnose matches an independent recomputation from raw gradients") {
  const ConceptDataset ds = tiny_dataset();
  const NoiseSchedule sched = build_schedule(9, 0.02, 0.3);
  Rng init(25);
  ConditionalDenoiser m = init_denoiser(tiny_arch(), init);

  // A few naive-objective steps so the state is mid-run, not pristine.
  Rng train_rng(909);
  for (int step = 0; step < 5; ++step) {
    const AdvReport rep = adv_loss(m, sched, ds, 1.0, train_rng);
    axpy(-1e-3, rep.grad, m.params);
  }

  Rng diag_rng(1010);
  const DiagnoseReport rep = diagnose(m, sched, ds, 0.05, diag_rng);

  // Replay the recorded draws and rebuild every field from raw gradients.
  const LossReport per = per_simple_loss(m, sched, ds, rep.per_draws);
  const LossReport ppl = ppl_loss(m, sched, ds, rep.ppl_draws);
  CHECK(per.grad == rep.g_per);
  CHECK(ppl.grad == rep.g_ppl);
  double sq_per = 0.0, sq_ppl = 0.0, inner = 0.0;
  for (std::size_t i = 0; i < per.grad.size(); ++i) {
    sq_per += per.grad[i] * per.grad[i];
    sq_ppl += ppl.grad[i] * ppl.grad[i];
    inner += per.grad[i] * ppl.grad[i];
  }
  CHECK(std::fabs(rep.diag.norm_per - std::sqrt(sq_per)) <= 1e-12);
  CHECK(std::fabs(rep.diag.norm_ppl - std::sqrt(sq_ppl)) <= 1e-12);
  CHECK(std::fabs(rep.diag.inner - inner) <= 1e-12);
  CHECK(std::fabs(rep.diag.cosine -
                  inner / (std::sqrt(sq_per) * std::sqrt(sq_ppl))) <= 1e-12);
  CHECK(std::fabs(rep.diag.taylor_per - 0.05 * (sq_per - inner)) <= 1e-12);
  CHECK(std::fabs(rep.diag.taylor_ppl - 0.05 * (inner - sq_ppl)) <= 1e-12);
}
