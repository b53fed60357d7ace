// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantlab/backward.h"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <string>

#include "quantlab/error.h"
#include "quantlab/parallel.h"

namespace quantlab {

namespace {

bool IsPathwise(SurrogateKind k) {
  return k == SurrogateKind::kAun || k == SurrogateKind::kSua || k == SurrogateKind::kSuaN ||
         k == SurrogateKind::kUqS || k == SurrogateKind::kUqI;
}

bool HasExactEp(SurrogateKind k) {
  return k == SurrogateKind::kAun || k == SurrogateKind::kSua || k == SurrogateKind::kSuaN ||
         k == SurrogateKind::kSr || k == SurrogateKind::kSra;
}

double NoiseFor(const SurrogateSpec& spec, const NoiseDraw& noise, std::size_t i) {
  if (noise.values.empty()) return 0.0;
  return spec.kind == SurrogateKind::kUqS ? noise.values[0] : noise.values[i];
}

// d y~_i / d y_i at the frozen noise value.
double PathJacobian(const SurrogateSpec& spec, double y, double u) {
  switch (spec.kind) {
    case SurrogateKind::kAun:
    case SurrogateKind::kUqS:
    case SurrogateKind::kUqI:
      return 1.0;
    case SurrogateKind::kSua:
      return denoise_r_deriv(soft_fn(y, spec.alpha) + u, spec.alpha) *
             soft_fn_deriv(y, spec.alpha);
    case SurrogateKind::kSuaN:
      return soft_fn_deriv(y, spec.alpha);
    default:
      throw Error(ErrorCode::kUnsupportedForward,
                  std::string(SurrogateName(spec.kind)) + " has no pathwise gradient");
  }
}

double SteFactor(const SurrogateSpec& spec, double y) {
  switch (spec.kind) {
    case SurrogateKind::kSua:
    case SurrogateKind::kSuaN:
    case SurrogateKind::kSra:
      return soft_fn_deriv(y, spec.alpha);
    default:
      return 1.0;
  }
}

void CheckNoise(const SurrogateSpec& spec, std::span<const double> y, const NoiseDraw& noise) {
  const std::size_t expected = noise_size(spec.kind, y.size());
  Require(noise.values.size() == expected, ErrorCode::kDimensionMismatch,
          "noise draw has " + std::to_string(noise.values.size()) + " values, expected " +
              std::to_string(expected));
}

// Integrates g(u_0, ..., u_{m-1}) over [-0.5, 0.5]^m for m <= 2, with the
// per-axis breakpoints given.
double IntegrateNoiseBox(const std::function<double(std::span<const double>)>& g,
                         const std::vector<std::vector<double>>& breaks, const Quadrature& q) {
  const std::size_t m = breaks.size();
  if (m == 0) return g({});
  if (m == 1) {
    return integrate_piecewise(
        [&](double u) {
          const double v[1] = {u};
          return g(v);
        },
        -0.5, 0.5, breaks[0], q);
  }
  Quadrature inner = q;
  inner.abs_tol = 0.1 * q.abs_tol;
  return integrate_piecewise(
      [&](double u0) {
        return integrate_piecewise(
            [&](double u1) {
              const double v[2] = {u0, u1};
              return g(v);
            },
            -0.5, 0.5, breaks[1], inner);
      },
      -0.5, 0.5, breaks[0], q);
}

}  // namespace

std::string_view GradRuleName(GradRule rule) {
  switch (rule) {
    case GradRule::kStandard:
      return "STANDARD";
    case GradRule::kPge:
      return "PGE";
    case GradRule::kSte:
      return "STE";
    case GradRule::kEp:
      return "EP";
  }
  return "?";
}

std::optional<GradRule> ParseGradRule(std::string_view name) {
  for (GradRule r : {GradRule::kStandard, GradRule::kPge, GradRule::kSte, GradRule::kEp}) {
    if (GradRuleName(r) == name) return r;
  }
  return std::nullopt;
}

void EstimatorSpec::validate() const {
  forward.validate();
  Require(samples_per_estimate >= 1, ErrorCode::kInvalidParameter,
          "samples_per_estimate must be >= 1");
  const std::string what =
      std::string(GradRuleName(rule)) + " with " + std::string(SurrogateName(forward.kind));
  switch (rule) {
    case GradRule::kStandard:
      Require(forward.kind == SurrogateKind::kSha, ErrorCode::kUnsupportedForward, what);
      break;
    case GradRule::kPge:
      Require(IsPathwise(forward.kind), ErrorCode::kUnsupportedForward, what);
      break;
    case GradRule::kEp:
      Require(HasExactEp(forward.kind), ErrorCode::kUnsupportedForward, what);
      break;
    case GradRule::kSte:
      break;
  }
}

std::vector<double> grad_pge(const SurrogateSpec& spec, const LossGrad& loss_grad,
                             std::span<const double> y, const NoiseDraw& noise) {
  spec.validate();
  Require(IsPathwise(spec.kind), ErrorCode::kUnsupportedForward,
          std::string(SurrogateName(spec.kind)) + " is not reparameterised");
  CheckNoise(spec, y, noise);
  const std::vector<double> yt = forward(spec, y, noise);
  std::vector<double> g = loss_grad(yt);
  Require(g.size() == y.size(), ErrorCode::kDimensionMismatch, "loss gradient size");
  for (std::size_t i = 0; i < y.size(); ++i) {
    g[i] *= PathJacobian(spec, y[i], NoiseFor(spec, noise, i));
  }
  return g;
}

std::vector<double> grad_ste(const SurrogateSpec& spec, const LossGrad& loss_grad,
                             std::span<const double> y, const NoiseDraw& noise) {
  spec.validate();
  CheckNoise(spec, y, noise);
  const std::vector<double> yt = forward(spec, y, noise);
  std::vector<double> g = loss_grad(yt);
  Require(g.size() == y.size(), ErrorCode::kDimensionMismatch, "loss gradient size");
  for (std::size_t i = 0; i < y.size(); ++i) g[i] *= SteFactor(spec, y[i]);
  return g;
}

std::vector<double> grad_standard(const SurrogateSpec& spec, const LossGrad& loss_grad,
                                  std::span<const double> y) {
  Require(spec.kind == SurrogateKind::kSha, ErrorCode::kUnsupportedForward,
          "the standard gradient needs a deterministic differentiable forward (SHA)");
  spec.validate();
  std::vector<double> yt(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) yt[i] = soft_fn(y[i], spec.alpha);
  std::vector<double> g = loss_grad(yt);
  Require(g.size() == y.size(), ErrorCode::kDimensionMismatch, "loss gradient size");
  for (std::size_t i = 0; i < y.size(); ++i) g[i] *= soft_fn_deriv(y[i], spec.alpha);
  return g;
}

double grad_ep_scalar(const ScalarFn& loss, double y) { return loss(y + 0.5) - loss(y - 0.5); }

double grad_ep_rate_sua(double y, double alpha, const ScalarFn& rate_fn) {
  const double s = soft_fn(y, alpha);
  return soft_fn_deriv(y, alpha) *
         (rate_fn(denoise_r(s + 0.5, alpha)) - rate_fn(denoise_r(s - 0.5, alpha)));
}

double grad_ep_rate_sra(double y, double alpha, const ScalarFn& rate_fn) {
  const double fl = std::floor(y);
  if (fl == y) return 0.0;
  return soft_fn_deriv(y, alpha) * (rate_fn(fl + 1.0) - rate_fn(fl));
}

double grad_ep_rate(const SurrogateSpec& spec, double y, const ScalarFn& rate_fn) {
  spec.validate();
  switch (spec.kind) {
    case SurrogateKind::kAun:
      return grad_ep_scalar(rate_fn, y);
    case SurrogateKind::kSua:
      return grad_ep_rate_sua(y, spec.alpha, rate_fn);
    case SurrogateKind::kSuaN: {
      const double s = soft_fn(y, spec.alpha);
      return soft_fn_deriv(y, spec.alpha) * (rate_fn(s + 0.5) - rate_fn(s - 0.5));
    }
    case SurrogateKind::kSr: {
      const double fl = std::floor(y);
      if (fl == y) return 0.0;
      return rate_fn(fl + 1.0) - rate_fn(fl);
    }
    case SurrogateKind::kSra:
      return grad_ep_rate_sra(y, spec.alpha, rate_fn);
    default:
      throw Error(ErrorCode::kUnsupportedForward,
                  "no exact expected gradient for " + std::string(SurrogateName(spec.kind)));
  }
}

std::vector<double> grad_ep_vector_bruteforce(const VectorLoss& loss, std::span<const double> y,
                                              const SurrogateSpec& spec, const Quadrature& q) {
  spec.validate();
  const std::size_t d = y.size();
  Require(d <= 3, ErrorCode::kDimensionTooLarge,
          "brute-force expected gradient supports dim <= 3, got " + std::to_string(d));
  std::vector<double> grad(d, 0.0);

  if (spec.kind == SurrogateKind::kSr || spec.kind == SurrogateKind::kSra) {
    std::vector<double> fl(d), p(d), dp(d);
    for (std::size_t j = 0; j < d; ++j) {
      fl[j] = std::floor(y[j]);
      const bool integer = fl[j] == y[j];
      if (spec.kind == SurrogateKind::kSr) {
        p[j] = sr_ceil_prob(y[j]);
        dp[j] = integer ? 0.0 : 1.0;
      } else {
        p[j] = sra_ceil_prob(y[j], spec.alpha);
        dp[j] = integer ? 0.0 : soft_fn_deriv(y[j], spec.alpha);
      }
    }
    std::vector<double> pt(d);
    for (std::size_t i = 0; i < d; ++i) {
      if (dp[i] == 0.0) continue;
      CompensatedSum acc;
      // Enumerate the corners of the other coordinates.
      for (unsigned mask = 0; mask < (1u << d); ++mask) {
        if (mask & (1u << i)) continue;
        double w = 1.0;
        for (std::size_t j = 0; j < d; ++j) {
          if (j == i) continue;
          const bool up = mask & (1u << j);
          w *= up ? p[j] : 1.0 - p[j];
          pt[j] = fl[j] + (up ? 1.0 : 0.0);
        }
        if (w == 0.0) continue;
        pt[i] = fl[i] + 1.0;
        const double hi = loss(pt);
        pt[i] = fl[i];
        const double lo = loss(pt);
        acc.add(w * (hi - lo));
      }
      grad[i] = dp[i] * acc.value();
    }
    return grad;
  }

  Require(spec.kind == SurrogateKind::kAun || spec.kind == SurrogateKind::kSua ||
              spec.kind == SurrogateKind::kSuaN,
          ErrorCode::kUnsupportedForward,
          "brute-force expected gradient supports SR, SRA, AUN, SUA and SUA_N");

  // Breakpoints in u where y~_j(u) has a kink or steep section.
  auto breaks_for = [&](std::size_t j) {
    if (spec.kind != SurrogateKind::kSua) return std::vector<double>{};
    const double s = soft_fn(y[j], spec.alpha);
    std::vector<double> b;
    for (double h : half_integers_between(s - 0.5, s + 0.5)) b.push_back(h - s);
    return b;
  };

  for (std::size_t i = 0; i < d; ++i) {
    const double jac = spec.kind == SurrogateKind::kAun ? 1.0 : soft_fn_deriv(y[i], spec.alpha);
    std::vector<std::size_t> others;
    std::vector<std::vector<double>> breaks;
    for (std::size_t j = 0; j < d; ++j) {
      if (j == i) continue;
      others.push_back(j);
      breaks.push_back(breaks_for(j));
    }
    const double hi_i = forward_scalar(spec, y[i], 0.5);
    const double lo_i = forward_scalar(spec, y[i], -0.5);
    auto boundary = [&](std::span<const double> u) {
      std::vector<double> pt(d);
      for (std::size_t k = 0; k < others.size(); ++k) {
        pt[others[k]] = forward_scalar(spec, y[others[k]], u[k]);
      }
      pt[i] = hi_i;
      const double hi = loss(pt);
      pt[i] = lo_i;
      return hi - loss(pt);
    };
    grad[i] = jac * IntegrateNoiseBox(boundary, breaks, q);
  }
  return grad;
}

double estimate_scalar_gradient(const EstimatorSpec& est, const ScalarFn& loss,
                                const ScalarFn& loss_deriv, double y, Rng& rng) {
  const SurrogateSpec& spec = est.forward;
  switch (est.rule) {
    case GradRule::kEp:
      return grad_ep_rate(spec, y, loss);
    case GradRule::kStandard:
      return loss_deriv(soft_fn(y, spec.alpha)) * soft_fn_deriv(y, spec.alpha);
    case GradRule::kPge:
    case GradRule::kSte:
      break;
  }
  CompensatedSum acc;
  for (int k = 0; k < est.samples_per_estimate; ++k) {
    const NoiseDraw noise = draw_noise(spec, 1, rng);
    const double u = noise.values.empty() ? 0.0 : noise.values[0];
    const double yt = forward_scalar(spec, y, u);
    const double factor =
        est.rule == GradRule::kPge ? PathJacobian(spec, y, u) : SteFactor(spec, y);
    acc.add(loss_deriv(yt) * factor);
  }
  return acc.value() / est.samples_per_estimate;
}

GradStats measure_grad_stats(const EstimatorSpec& est, const ScalarFn& loss,
                             const ScalarFn& loss_deriv, const Gaussian1D& y_dist, int n_y,
                             int n_trials, Seed seed, int threads) {
  est.validate();
  Require(n_y >= 2 && n_trials >= 2, ErrorCode::kInvalidParameter,
          "measure_grad_stats needs n_y >= 2 and n_trials >= 2");
  // The EP reference needs an exactly computable expectation.
  SurrogateSpec ref_spec = est.forward;
  Require(HasExactEp(ref_spec.kind) || ref_spec.kind == SurrogateKind::kSha ||
              ref_spec.kind == SurrogateKind::kUqS || ref_spec.kind == SurrogateKind::kUqI,
          ErrorCode::kUnsupportedForward,
          "no exact reference gradient for " + std::string(SurrogateName(ref_spec.kind)));

  GradStats out;
  out.n_y = n_y;
  out.n_trials = n_trials;
  out.ys = y_dist.sample(seed.derive(0), static_cast<std::size_t>(n_y));
  out.g_ep.resize(out.ys.size());

  struct PerY {
    double mean = 0.0;
    double var = 0.0;
    double se = 0.0;
  };
  std::vector<PerY> per_y(out.ys.size());
  parallel_for(out.ys.size(), threads, [&](std::size_t k) {
    const double y = out.ys[k];
    double ref;
    switch (ref_spec.kind) {
      case SurrogateKind::kSha:
        ref = loss_deriv(soft_fn(y, ref_spec.alpha)) * soft_fn_deriv(y, ref_spec.alpha);
        break;
      case SurrogateKind::kUqS:
      case SurrogateKind::kUqI: {
        // The boundary terms of E_u L(round(y + u) - u) cancel, leaving
        // E_u L'(y~); computed by quadrature over u.
        std::vector<double> breaks;
        for (double h : half_integers_between(y - 0.5, y + 0.5)) breaks.push_back(h - y);
        ref = integrate_piecewise(
            [&](double u) { return loss_deriv(round_half(y + u) - u); }, -0.5, 0.5, breaks);
        break;
      }
      default:
        ref = grad_ep_rate(ref_spec, y, loss);
    }
    out.g_ep[k] = ref;
    Rng rng(seed.derive(1 + k));
    RunningStats rs;
    for (int t = 0; t < n_trials; ++t) rs.add(estimate_scalar_gradient(est, loss, loss_deriv, y, rng));
    per_y[k] = {rs.mean(), rs.variance(), rs.standard_error()};
  });

  RunningStats bias, signed_bias, var;
  CompensatedSum floor;
  for (std::size_t k = 0; k < per_y.size(); ++k) {
    const double dev = per_y[k].mean - out.g_ep[k];
    bias.add(std::abs(dev));
    signed_bias.add(dev);
    var.add(per_y[k].var);
    floor.add(std::sqrt(2.0 / std::numbers::pi) * per_y[k].se);
    // Deterministic estimates (zero spread) carry no z-score.
    if (per_y[k].se > 0.0) out.max_abs_z = std::max(out.max_abs_z, std::abs(dev) / per_y[k].se);
  }
  out.bias = bias.mean();
  out.bias_se = bias.standard_error();
  out.bias_noise_floor = floor.value() / static_cast<double>(per_y.size());
  out.signed_bias = signed_bias.mean();
  out.signed_bias_se = signed_bias.standard_error();
  out.variance = var.mean();
  out.variance_se = var.standard_error();
  return out;
}

}  // namespace quantlab
