// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QUANTLAB_BACKWARD_H_
#define QUANTLAB_BACKWARD_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "quantlab/numerics.h"
#include "quantlab/sources.h"
#include "quantlab/surrogates.h"

namespace quantlab {

enum class GradRule { kStandard, kPge, kSte, kEp };

std::string_view GradRuleName(GradRule rule);
std::optional<GradRule> ParseGradRule(std::string_view name);

struct EstimatorSpec {
  SurrogateSpec forward;
  GradRule rule = GradRule::kSte;
  int samples_per_estimate = 1;

  // Throws UnsupportedForward when the rule cannot be paired with the forward:
  // STANDARD needs SHA; PGE needs AUN, SUA, SUA_N or a UQ variant; EP needs
  // AUN, SUA, SUA_N, SR or SRA.
  void validate() const;
};

// dL/dy~ evaluated at y~.
using LossGrad = std::function<std::vector<double>(std::span<const double>)>;
using VectorLoss = std::function<double(std::span<const double>)>;
using ScalarFn = std::function<double(double)>;

// Single-sample pathwise gradient at a frozen noise draw. UQ variants are
// treated pathwise with unit Jacobian (the dither offset is held fixed).
std::vector<double> grad_pge(const SurrogateSpec& spec, const LossGrad& loss_grad,
                             std::span<const double> y, const NoiseDraw& noise);

// Generalised straight-through gradient: hard maps and the denoiser are
// replaced by the identity, so SUA and SRA keep the s_alpha' factor.
std::vector<double> grad_ste(const SurrogateSpec& spec, const LossGrad& loss_grad,
                             std::span<const double> y, const NoiseDraw& noise);

// Plain gradient through the deterministic SHA map.
std::vector<double> grad_standard(const SurrogateSpec& spec, const LossGrad& loss_grad,
                                  std::span<const double> y);

// d/dy E_u L(y + u), u ~ U(-0.5, 0.5).
double grad_ep_scalar(const ScalarFn& loss, double y);
// d/dy E_u R(r(s(y) + u)).
double grad_ep_rate_sua(double y, double alpha, const ScalarFn& rate_fn);
// d/dy E R(y~) under SRA; zero at exact integers.
double grad_ep_rate_sra(double y, double alpha, const ScalarFn& rate_fn);
// Exact expected gradient of a separable term for one component, dispatched
// on the forward (AUN, SUA, SUA_N, SR, SRA).
double grad_ep_rate(const SurrogateSpec& spec, double y, const ScalarFn& rate_fn);

// Reference expected gradient of a non-separable loss for dim <= 3: corner
// enumeration for SR/SRA, boundary terms plus quadrature over the remaining
// noise dimensions for AUN/SUA/SUA_N.
std::vector<double> grad_ep_vector_bruteforce(const VectorLoss& loss,
                                              std::span<const double> y,
                                              const SurrogateSpec& spec,
                                              const Quadrature& q = {});

// One estimate under `est` for a separable scalar loss, averaged over
// est.samples_per_estimate noise draws taken from `rng`.
double estimate_scalar_gradient(const EstimatorSpec& est, const ScalarFn& loss,
                                const ScalarFn& loss_deriv, double y, Rng& rng);

struct GradStats {
  // Mean over y of |E_hat g - g_ep|, and its standard error across y.
  double bias = 0.0;
  double bias_se = 0.0;
  // Expected |E_hat g - g_ep| for an unbiased estimator with the observed
  // per-y variances; what `bias` converges to when the true bias is zero.
  double bias_noise_floor = 0.0;
  // Mean over y of (E_hat g - g_ep); zero in expectation for an unbiased
  // estimator.
  double signed_bias = 0.0;
  double signed_bias_se = 0.0;
  // Mean over y of the per-y estimator variance, and its standard error.
  double variance = 0.0;
  double variance_se = 0.0;
  // Largest per-y |E_hat g - g_ep| / SE over latents with nonzero spread.
  double max_abs_z = 0.0;
  std::int64_t n_trials = 0;
  std::int64_t n_y = 0;
  std::vector<double> ys;
  std::vector<double> g_ep;
};

// Bias / variance of `est` on a separable scalar loss. Draws n_y latents from
// y_dist; for each, runs n_trials independent estimates against the exact EP
// reference. Each y owns a derived stream, so results do not depend on the
// thread count.
GradStats measure_grad_stats(const EstimatorSpec& est, const ScalarFn& loss,
                             const ScalarFn& loss_deriv, const Gaussian1D& y_dist,
                             int n_y, int n_trials, Seed seed, int threads = 1);

}  // namespace quantlab

#endif  // QUANTLAB_BACKWARD_H_
