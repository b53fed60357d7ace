// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantlab/infotheory.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "quantlab/error.h"

namespace quantlab {

namespace {

constexpr double kTailSigmas = 10.0;
constexpr double kTinyDensity = 1e-300;

double NegPlogP(double p) { return p < kTinyDensity ? 0.0 : -p * std::log2(p); }

// Discrete entropy of the bins induced by a probability-of-ceil function
// pc(y) on the source, i.e. H(floor(Y) + Bernoulli(pc(Y))).
double StochasticBinEntropy(const Gaussian1D& src, const std::function<double(double)>& pc) {
  const double lo = src.mu - kTailSigmas * src.sigma;
  const double hi = src.mu + kTailSigmas * src.sigma;
  Quadrature q;
  q.abs_tol = 1e-13;
  auto mass_on = [&](double a, double b, bool ceil_branch) {
    a = std::max(a, lo);
    b = std::min(b, hi);
    if (b <= a) return 0.0;
    return integrate(
        [&](double y) {
          const double p = pc(y);
          return src.pdf(y) * (ceil_branch ? p : 1.0 - p);
        },
        a, b, q);
  };
  CompensatedSum h;
  for (double n = std::floor(lo); n <= std::ceil(hi) + 1.0; n += 1.0) {
    const double p = mass_on(n - 1.0, n, true) + mass_on(n, n + 1.0, false);
    h.add(-xlog2x(p));
  }
  return h.value();
}

double ExpectedBinaryEntropy(const Gaussian1D& src, const std::function<double(double)>& pc) {
  const double lo = src.mu - kTailSigmas * src.sigma;
  const double hi = src.mu + kTailSigmas * src.sigma;
  return integrate_piecewise([&](double y) { return src.pdf(y) * binary_entropy_bits(pc(y)); },
                             lo, hi, integers_between(lo, hi));
}

}  // namespace

double mi_rounding(const Gaussian1D& src) {
  const double lo = src.mu - kTailSigmas * src.sigma;
  const double hi = src.mu + kTailSigmas * src.sigma;
  CompensatedSum h;
  for (double n = round_half(lo) - 1.0; n <= round_half(hi) + 1.0; n += 1.0) {
    h.add(-xlog2x(src.interval(n - 0.5, n + 0.5)));
  }
  return h.value();
}

double mi_aun(const Gaussian1D& src) {
  const double lo = src.mu - kTailSigmas * src.sigma - 1.0;
  const double hi = src.mu + kTailSigmas * src.sigma + 1.0;
  const std::vector<double> breaks = {src.mu - 0.5, src.mu + 0.5};
  return integrate_piecewise(
      [&](double t) { return NegPlogP(src.interval(t - 0.5, t + 0.5)); }, lo, hi, breaks);
}

double mi_sr(const Gaussian1D& src) {
  auto pc = [](double y) { return sr_ceil_prob(y); };
  return StochasticBinEntropy(src, pc) - ExpectedBinaryEntropy(src, pc);
}

double mi_sra(const Gaussian1D& src, double alpha) {
  Require(alpha > 0.0, ErrorCode::kInvalidParameter, "mi_sra needs alpha > 0");
  auto pc = [alpha](double y) { return sra_ceil_prob(y, alpha); };
  return StochasticBinEntropy(src, pc) - ExpectedBinaryEntropy(src, pc);
}

double mi_sua(const Gaussian1D& src, double alpha) {
  Require(alpha > 0.0, ErrorCode::kInvalidParameter, "mi_sua needs alpha > 0");
  const double y_lo = src.mu - kTailSigmas * src.sigma;
  const double y_hi = src.mu + kTailSigmas * src.sigma;
  const double w_lo = soft_fn(y_lo, alpha) - 0.5;
  const double w_hi = soft_fn(y_hi, alpha) + 0.5;
  const double s_mu = soft_fn(src.mu, alpha);
  std::vector<double> breaks = half_integers_between(w_lo, w_hi);
  breaks.push_back(s_mu - 0.5);
  breaks.push_back(s_mu + 0.5);
  return integrate_piecewise(
      [&](double w) {
        return NegPlogP(src.interval(soft_inv(w - 0.5, alpha), soft_inv(w + 0.5, alpha)));
      },
      w_lo, w_hi, breaks);
}

double mutual_information(const SurrogateSpec& spec, const Gaussian1D& source) {
  spec.validate();
  switch (spec.kind) {
    case SurrogateKind::kRound:
      return mi_rounding(source);
    case SurrogateKind::kAun:
      return mi_aun(source);
    case SurrogateKind::kSr:
      return mi_sr(source);
    case SurrogateKind::kSra:
      return mi_sra(source, spec.alpha);
    case SurrogateKind::kSua:
    case SurrogateKind::kSuaN:
      return mi_sua(source, spec.alpha);
    default:
      throw Error(ErrorCode::kUnsupportedForward,
                  "mutual information is not implemented for " +
                      std::string(SurrogateName(spec.kind)));
  }
}

double mi_2d_correlated(SurrogateKind kind, double sigma, double rho) {
  Require(rho == 1.0, ErrorCode::kUnsupportedCase, "mi_2d_correlated covers rho = 1 only");
  const Gaussian1D src(0.0, sigma);
  switch (kind) {
    case SurrogateKind::kRound:
      return mi_rounding(src);
    case SurrogateKind::kUqS:
      return mi_aun(src);
    case SurrogateKind::kAun:
    case SurrogateKind::kUqI:
      break;
    default:
      throw Error(ErrorCode::kUnsupportedForward,
                  "mi_2d_correlated supports ROUND, UQ_S, AUN and UQ_I");
  }
  // Joint density of (Y + U1, Y + U2) at (a, a + d):
  // P(a + max(0, d) - 0.5 < Y < a + min(0, d) + 0.5). It is symmetric under
  // d -> -d after a shift in a, so integrate d over (0, 1) and double.
  const double lo = -kTailSigmas * sigma - 1.0;
  const double hi = kTailSigmas * sigma + 1.0;
  Quadrature inner;
  inner.abs_tol = 1e-12;
  auto slice = [&](double d) {
    const double breaks[2] = {-0.5, 0.5 - d};
    return integrate_piecewise(
        [&](double a) { return NegPlogP(src.interval(a + d - 0.5, a + 0.5)); }, lo, hi,
        breaks, inner);
  };
  // I(Y; Y~1, Y~2) = h(Y~1, Y~2) - h(U1, U2) = h(Y~1, Y~2).
  return 2.0 * integrate(slice, 0.0, 1.0);
}

EntropyPair entropy_compare(double mu, double sigma) {
  EntropyPair out;
  out.h_cont = mi_aun(Gaussian1D(mu, sigma));
  out.h_disc = mi_rounding(Gaussian1D(0.0, sigma));
  return out;
}

}  // namespace quantlab
