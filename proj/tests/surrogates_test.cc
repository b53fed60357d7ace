// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "quantlab/error.h"
#include "quantlab/numerics.h"
#include "quantlab/surrogates.h"

namespace quantlab {
namespace {

// Soft rounding written out in long double, independent of soft_fn.
double SoftOracle(double y, double alpha) {
  const long double fl = std::floor(static_cast<long double>(y));
  const long double r = y - fl - 0.5L;
  return static_cast<double>(fl + std::tanh(alpha * r) / (2.0L * std::tanh(alpha / 2.0L)) + 0.5L);
}

TEST(RoundHalf, Examples) {
  EXPECT_EQ(round_half(1.2), 1.0);
  EXPECT_EQ(round_half(-0.5), -1.0);
  EXPECT_EQ(round_half(2.5), 3.0);
  EXPECT_EQ(round_half(-2.5), -3.0);
  EXPECT_EQ(round_half(0.49999999999999994), 0.0);
}

TEST(SoftFn, Examples) {
  for (double a : {0.5, 5.0, 50.0}) {
    EXPECT_DOUBLE_EQ(soft_fn(2.0, a), 2.0);
    EXPECT_DOUBLE_EQ(soft_fn(0.5, a), 0.5);
  }
  EXPECT_NEAR(soft_fn(0.75, 5.0), 0.92990, 1e-5);
  EXPECT_NEAR(soft_fn(0.75, 5.0), SoftOracle(0.75, 5.0), 1e-14);
}

TEST(SoftFn, MatchesOracleAndIsMonotone) {
  for (double a : {0.1, 1.0, 5.0, 12.0}) {
    double prev = -1e9;
    for (double y = -2.0; y <= 2.0; y += 0.013) {
      const double v = soft_fn(y, a);
      EXPECT_NEAR(v, SoftOracle(y, a), 1e-12);
      EXPECT_GT(v, prev);
      EXPECT_NEAR(soft_fn(y + 1.0, a), v + 1.0, 1e-12);
      prev = v;
    }
  }
}

TEST(SoftFn, DerivativeMatchesFiniteDifference) {
  for (double a : {1.0, 5.0, 10.0}) {
    for (double y = -1.4; y < 1.5; y += 0.17) {
      const double h = 1e-6;
      const double fd = (soft_fn(y + h, a) - soft_fn(y - h, a)) / (2 * h);
      EXPECT_NEAR(soft_fn_deriv(y, a), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(SoftInv, Examples) {
  EXPECT_NEAR(soft_inv(soft_fn(0.3, 8.0), 8.0), 0.3, 1e-10);
  EXPECT_DOUBLE_EQ(soft_inv(2.0, 3.0), 2.0);
  EXPECT_NEAR(soft_inv(0.92990, 5.0), 0.75, 1e-4);
}

TEST(SoftInv, RoundTrip) {
  for (double a : {0.5, 5.0, 20.0}) {
    for (double y = -1.9; y < 2.0; y += 0.07) {
      EXPECT_NEAR(soft_fn(soft_inv(y, a), a), y, 1e-10);
    }
  }
}

TEST(DenoiseR, Examples) {
  EXPECT_NEAR(denoise_r(0.5, 7.0), 0.5, 1e-14);
  EXPECT_NEAR(denoise_r(1.5, 7.0), 1.5, 1e-14);
  const double v = denoise_r(0.9, 10.0);
  EXPECT_GT(v, 0.5);
  EXPECT_LT(v, 1.0);
  EXPECT_NEAR(v, soft_inv(0.4, 10.0) + 0.5, 1e-14);
  EXPECT_NEAR(denoise_r(2.9, 10.0), v + 2.0, 1e-12);
}

TEST(DenoiseR, DerivativeMatchesFiniteDifference) {
  for (double z = -0.8; z < 1.0; z += 0.11) {
    const double h = 1e-6;
    const double fd = (denoise_r(z + h, 5.0) - denoise_r(z - h, 5.0)) / (2 * h);
    EXPECT_NEAR(denoise_r_deriv(z, 5.0), fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Forward, Examples) {
  NoiseDraw none;
  const std::vector<double> y{1.3, -0.2};
  EXPECT_EQ(forward(SurrogateSpec::Round(), y, none), (std::vector<double>{1.0, 0.0}));
  const std::vector<double> zero{0.0};
  EXPECT_EQ(forward(SurrogateSpec::Aun(), zero, {{0.25}}), (std::vector<double>{0.25}));
  const std::vector<double> uq{0.3, 0.4};
  const std::vector<double> out = forward({SurrogateKind::kUqS, 0, 0}, uq, {{0.4}});
  EXPECT_NEAR(out[0], 0.6, 1e-15);
  EXPECT_NEAR(out[1], 0.6, 1e-15);
  const std::vector<double> sr{0.75};
  EXPECT_EQ(forward(SurrogateSpec::Sr(), sr, {{0.5}}), (std::vector<double>{1.0}));
}

TEST(Forward, DimensionMismatch) {
  const std::vector<double> y{0.1, 0.2};
  try {
    forward(SurrogateSpec::Aun(), y, {{0.1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
  EXPECT_THROW(forward({SurrogateKind::kUqS, 0, 0}, y, {{0.1, 0.2}}), Error);
}

TEST(Forward, NoiseSizes) {
  EXPECT_EQ(noise_size(SurrogateKind::kUqS, 5), 1u);
  EXPECT_EQ(noise_size(SurrogateKind::kRound, 5), 0u);
  EXPECT_EQ(noise_size(SurrogateKind::kSha, 5), 0u);
  for (SurrogateKind k : {SurrogateKind::kAun, SurrogateKind::kUqI, SurrogateKind::kSua,
                          SurrogateKind::kSuaN, SurrogateKind::kSr, SurrogateKind::kSra,
                          SurrogateKind::kSga}) {
    EXPECT_EQ(noise_size(k, 5), 5u);
  }
}

TEST(Forward, SuaAndSuaNDefinitions) {
  const double y = 0.37;
  const double u = -0.21;
  EXPECT_NEAR(forward_scalar(SurrogateSpec::SuaN(4.0), y, u), soft_fn(y, 4.0) + u, 1e-15);
  EXPECT_NEAR(forward_scalar(SurrogateSpec::Sua(4.0), y, u), denoise_r(soft_fn(y, 4.0) + u, 4.0),
              1e-15);
}

std::vector<SurrogateSpec> AllSpecs() {
  return {SurrogateSpec::Round(), SurrogateSpec::Sha(5),     SurrogateSpec::Aun(),
          {SurrogateKind::kUqS, 0, 0}, {SurrogateKind::kUqI, 0, 0}, SurrogateSpec::Sga(0.5),
          SurrogateSpec::Sua(5),  SurrogateSpec::SuaN(5),    SurrogateSpec::Sr(),
          SurrogateSpec::Sra(5)};
}

TEST(Forward, IntegerShiftEquivariance) {
  Rng rng({11, 0});
  for (const SurrogateSpec& spec : AllSpecs()) {
    for (int t = 0; t < 200; ++t) {
      const std::vector<double> y{rng.uniform01() * 4 - 2, rng.uniform01() * 4 - 2};
      const NoiseDraw n = draw_noise(spec, y.size(), rng);
      for (int k : {-3, 1, 7}) {
        std::vector<double> yk = y;
        for (double& v : yk) v += k;
        const std::vector<double> a = forward(spec, y, n);
        const std::vector<double> b = forward(spec, yk, n);
        for (std::size_t i = 0; i < a.size(); ++i) {
          EXPECT_NEAR(b[i], a[i] + k, 1e-9) << spec.label();
        }
      }
    }
  }
}

bool InAnnealSet(double y) {
  const double f = y - std::floor(y);
  return (f >= 0.05 && f <= 0.45) || (f >= 0.55 && f <= 0.95);
}

TEST(Forward, AnnealingLimits) {
  for (double y = -2.0; y <= 2.0; y += 0.01) {
    if (!InAnnealSet(y)) continue;
    EXPECT_LT(std::abs(soft_fn(y, 50.0) - round_half(y)), 0.01) << y;
    for (double u = -0.45; u <= 0.45; u += 0.05) {
      // With s(y) = n + d the denoiser leaves n + atanh(2 (d + u) tanh(a/2)) / a,
      // which is below 0.01 only for |u| < ~0.23.
      const double v = forward_scalar(SurrogateSpec::Sua(50.0), y, u);
      const double d = SoftOracle(y, 50.0) - round_half(y);
      const double residual = std::atanh(2.0 * (d + u) * std::tanh(25.0)) / 50.0;
      EXPECT_NEAR(v - round_half(y), residual, 1e-6) << y << " " << u;
      if (std::abs(u) <= 0.2) EXPECT_LT(std::abs(v - round_half(y)), 0.01) << y << " " << u;
    }
  }
}

TEST(Forward, UqiMarginalIsUniform) {
  Rng rng({12, 0});
  std::vector<double> d;
  const SurrogateSpec spec{SurrogateKind::kUqI, 0, 0};
  for (int i = 0; i < 100000; ++i) {
    const double y = 3.0 * rng.normal();
    d.push_back(forward_scalar(spec, y, rng.uniform_centered()) - y);
  }
  std::sort(d.begin(), d.end());
  double ks = 0.0;
  const double n = static_cast<double>(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double c = d[i] + 0.5;
    ks = std::max({ks, (i + 1) / n - c, c - i / n});
  }
  // 1% critical value 1.63 / sqrt(n).
  EXPECT_LT(ks, 1.63 / std::sqrt(n));
}

TEST(Forward, SrIsUnbiased) {
  Rng rng({13, 0});
  for (double y : {0.1, 0.5, 0.83, -1.27}) {
    RunningStats s;
    for (int i = 0; i < 100000; ++i) s.add(forward_scalar(SurrogateSpec::Sr(), y, rng.uniform01()));
    EXPECT_LT(std::abs(s.mean() - y), 3.0 * s.standard_error() + 1e-12) << y;
  }
}

TEST(Forward, SraConcentrates) {
  Rng rng({14, 0});
  for (double y : {0.1, 0.3, 0.45, 0.6, 1.8}) {
    int hits = 0;
    for (int i = 0; i < 10000; ++i) {
      hits += forward_scalar(SurrogateSpec::Sra(50.0), y, rng.uniform01()) == round_half(y);
    }
    EXPECT_GT(hits, 9900) << y;
  }
}

TEST(Forward, IntegersAreDeterministicForStochasticRounding) {
  EXPECT_EQ(sr_ceil_prob(2.0), 0.0);
  EXPECT_EQ(sra_ceil_prob(-1.0, 5.0), 0.0);
  EXPECT_EQ(forward_scalar(SurrogateSpec::Sr(), 3.0, 0.0), 3.0);
  EXPECT_EQ(forward_scalar(SurrogateSpec::Sra(5), 3.0, 0.999), 3.0);
}

TEST(SgaProbs, Examples) {
  auto [pf, pc] = sga_probs(0.5, 1.0);
  EXPECT_NEAR(pf, 0.5, 1e-15);
  EXPECT_NEAR(pc, 0.5, 1e-15);
  std::tie(pf, pc) = sga_probs(2.5, 1e-4);
  EXPECT_NEAR(pf, 0.5, 1e-12);
  std::tie(pf, pc) = sga_probs(0.2, 1.0);
  const double ef = std::exp(-std::atanh(0.2));
  const double ec = std::exp(-std::atanh(0.8));
  EXPECT_NEAR(pf, ef / (ef + ec), 1e-14);
  EXPECT_NEAR(pf + pc, 1.0, 1e-15);
  EXPECT_GT(sga_probs(1.0001, 0.5).first, 0.99);
}

TEST(SgaProbs, Errors) {
  EXPECT_THROW(sga_probs(0.3, 0.0), Error);
  EXPECT_THROW(sga_probs(NAN, 1.0), Error);
}

TEST(SurrogateSpec, LabelRoundTrip) {
  for (const SurrogateSpec& s : AllSpecs()) {
    const SurrogateSpec p = SurrogateSpec::FromLabel(s.label());
    EXPECT_EQ(p.kind, s.kind);
    EXPECT_EQ(p.alpha, s.alpha);
    EXPECT_EQ(p.tau, s.tau);
  }
  EXPECT_THROW(SurrogateSpec::FromLabel("SUA"), Error);
  EXPECT_THROW(SurrogateSpec::FromLabel("NOPE"), Error);
  EXPECT_THROW(SurrogateSpec::FromLabel("AUN@3"), Error);
  EXPECT_THROW(SurrogateSpec::FromLabel("SUA@-1"), Error);
}

TEST(AnnealSchedule, Linear) {
  const AnnealSchedule s{1.0, 11.0, 10};
  EXPECT_DOUBLE_EQ(s.alpha(0), 1.0);
  EXPECT_DOUBLE_EQ(s.alpha(5), 6.0);
  EXPECT_DOUBLE_EQ(s.alpha(10), 11.0);
}

}  // namespace
}  // namespace quantlab
