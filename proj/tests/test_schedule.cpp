#include <doctest.h>

#include <cmath>

#include "apdm/schedule.hpp"

using namespace apdm;

TEST_CASE("single-step schedule") {
  const NoiseSchedule s = build_schedule(1, 0.1, 0.1);
  CHECK(s.betas.size() == 1);
  CHECK(s.betas[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s.alpha_bars[0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("two-step schedule products") {
  const NoiseSchedule s = build_schedule(2, 0.1, 0.2);
  CHECK(s.alpha_bars[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(s.alpha_bars[1] == doctest::Approx(0.72).epsilon(1e-15));
}

TEST_CASE("alpha_bar matches an independent product loop") {
  const int T = 50;
  const double b0 = 1e-3, b1 = 0.2;
  const NoiseSchedule s = build_schedule(T, b0, b1);
  // Reference: closed-form linear betas, plain running product.
  double prod = 1.0;
  for (int i = 0; i < T; ++i) {
    const double beta = b0 + (b1 - b0) * static_cast<double>(i) / (T - 1);
    prod *= 1.0 - beta;
    CHECK(std::fabs(s.alpha_bars[i] - prod) <= 1e-12);
  }
  // The default schedule ends near pure noise.
  CHECK(s.alpha_bars[T - 1] < 0.01);
}

TEST_CASE("schedule rejects invalid ranges") {
  CHECK_THROWS_AS(build_schedule(0, 0.1, 0.2), ConfigError);
  CHECK_THROWS_AS(build_schedule(10, 0.0, 0.2), ConfigError);
  CHECK_THROWS_AS(build_schedule(10, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(build_schedule(10, 0.3, 0.2), ConfigError);
}

TEST_CASE("schedule invariants hold under random valid inputs") {
  Rng rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    const int T = rng.uniform_int(1, 200);
    double a = 1e-6 + rng.uniform() * 0.5;
    double b = a + rng.uniform() * (0.999 - a);
    const NoiseSchedule s = build_schedule(T, a, b);
    for (int t = 1; t <= T; ++t) {
      CHECK(s.betas[t - 1] > 0.0);
      CHECK(s.betas[t - 1] < 1.0);
      CHECK(s.alphas[t - 1] > 0.0);
      CHECK(s.alphas[t - 1] < 1.0);
      CHECK(s.alpha_bars[t - 1] > 0.0);
      CHECK(s.alpha_bars[t - 1] < 1.0);
      if (t == 1) {
        CHECK(s.alpha_bars[0] == s.alphas[0]);
      } else {
        CHECK(s.alpha_bars[t - 1] ==
              doctest::Approx(s.alpha_bars[t - 2] * s.alphas[t - 1])
                  .epsilon(1e-15));
        CHECK(s.alpha_bars[t - 1] < s.alpha_bars[t - 2]);
      }
    }
  }
}

TEST_CASE("forward_noise noiseless and pure-noise cases") {
  const NoiseSchedule s = build_schedule(2, 0.1, 0.2);
  const Sample x0{0.3, -1.7};
  const Sample zero{0.0, 0.0};
  const Sample eps{0.5, 2.0};

  const Sample a = forward_noise(s, x0, 1, zero);
  CHECK(a[0] == doctest::Approx(std::sqrt(0.9) * 0.3).epsilon(1e-15));
  CHECK(a[1] == doctest::Approx(std::sqrt(0.9) * -1.7).epsilon(1e-15));

  const Sample b = forward_noise(s, zero, 2, eps);
  CHECK(b[0] == doctest::Approx(std::sqrt(1.0 - 0.72) * 0.5).epsilon(1e-15));
  CHECK(b[1] == doctest::Approx(std::sqrt(1.0 - 0.72) * 2.0).epsilon(1e-15));
}

TEST_CASE("forward_noise matches a direct scalar computation") {
  const NoiseSchedule s = build_schedule(2, 0.1, 0.2);
  const Sample out = forward_noise(s, {1.0, 0.0}, 2, {1.0, 1.0});
  CHECK(out[0] ==
        doctest::Approx(std::sqrt(0.72) + std::sqrt(0.28)).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(std::sqrt(0.28)).epsilon(1e-14));
}

TEST_CASE("forward_noise rejects out-of-range steps") {
  const NoiseSchedule s = build_schedule(2, 0.1, 0.2);
  CHECK_THROWS_AS(forward_noise(s, {0.0, 0.0}, 0, {0.0, 0.0}), IndexError);
  CHECK_THROWS_AS(forward_noise(s, {0.0, 0.0}, 3, {0.0, 0.0}), IndexError);
}

TEST_CASE("forward_noise is linear in (x0, eps)") {
  const NoiseSchedule s = build_schedule(7, 0.02, 0.3);
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int t = rng.uniform_int(1, 7);
    const Sample x = normal_vec(rng, 2), y = normal_vec(rng, 2);
    const Sample e1 = normal_vec(rng, 2), e2 = normal_vec(rng, 2);
    const double a = rng.normal(), b = rng.normal();
    Sample xs(2), es(2);
    for (int i = 0; i < 2; ++i) {
      xs[i] = a * x[i] + b * y[i];
      es[i] = a * e1[i] + b * e2[i];
    }
    const Sample lhs = forward_noise(s, xs, t, es);
    const Sample f1 = forward_noise(s, x, t, e1);
    const Sample f2 = forward_noise(s, y, t, e2);
    for (int i = 0; i < 2; ++i)
      CHECK(lhs[i] == doctest::Approx(a * f1[i] + b * f2[i]).epsilon(1e-12));
  }
}

TEST_CASE("forward_noise per-coordinate variance matches 1 - alpha_bar") {
  const NoiseSchedule s = build_schedule(50, 1e-3, 0.2);
  const int t = 20;
  const Sample x0{0.4, -0.9};
  Rng rng(2024);
  const int n = 20000;
  double mean[2] = {0, 0}, m2[2] = {0, 0};
  for (int k = 0; k < n; ++k) {
    const Sample out = forward_noise(s, x0, t, normal_vec(rng, 2));
    for (int i = 0; i < 2; ++i) {
      const double delta = out[i] - mean[i];
      mean[i] += delta / (k + 1);
      m2[i] += delta * (out[i] - mean[i]);
    }
  }
  const double expected = 1.0 - s.alpha_bars[t - 1];
  // 3-sigma band of the sample variance of a normal: var * sqrt(2/(n-1)).
  const double band = 3.0 * expected * std::sqrt(2.0 / (n - 1));
  for (int i = 0; i < 2; ++i) {
    const double var = m2[i] / (n - 1);
    CHECK(std::fabs(var - expected) <= band);
  }
}
