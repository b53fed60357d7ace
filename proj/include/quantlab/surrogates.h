// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

// Forward calculations that stand in for rounding during training. Every
// surrogate is a deterministic function of (latent, noise draw, parameters);
// callers own the randomness and pass the draw in explicitly.

#ifndef QUANTLAB_SURROGATES_H_
#define QUANTLAB_SURROGATES_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "quantlab/numerics.h"

namespace quantlab {

enum class SurrogateKind {
  kRound,  // hard rounding
  kSha,    // soft-to-hard annealing: s_alpha(y)
  kAun,    // additive uniform noise: y + u
  kUqS,    // universal quantization, one shared offset per vector
  kUqI,    // universal quantization, independent offsets
  kSga,    // stochastic Gumbel annealing, hard categorical sample
  kSua,    // stochastic uniform annealing: r_alpha(s_alpha(y) + u)
  kSuaN,   // SUA without the denoiser: s_alpha(y) + u
  kSr,     // stochastic rounding
  kSra,    // stochastic rounding with s_alpha-shaped probabilities
};

std::string_view SurrogateName(SurrogateKind kind);
std::optional<SurrogateKind> ParseSurrogate(std::string_view name);

// True for kinds that take the temperature alpha.
bool IsAnnealed(SurrogateKind kind);
bool IsStochastic(SurrogateKind kind);

struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::kRound;
  double alpha = 0.0;  // SHA, SUA, SUA_N, SRA
  double tau = 0.0;    // SGA

  static SurrogateSpec Round() { return {SurrogateKind::kRound, 0.0, 0.0}; }
  static SurrogateSpec Aun() { return {SurrogateKind::kAun, 0.0, 0.0}; }
  static SurrogateSpec Sr() { return {SurrogateKind::kSr, 0.0, 0.0}; }
  static SurrogateSpec Sha(double alpha) { return {SurrogateKind::kSha, alpha, 0.0}; }
  static SurrogateSpec Sua(double alpha) { return {SurrogateKind::kSua, alpha, 0.0}; }
  static SurrogateSpec SuaN(double alpha) { return {SurrogateKind::kSuaN, alpha, 0.0}; }
  static SurrogateSpec Sra(double alpha) { return {SurrogateKind::kSra, alpha, 0.0}; }
  static SurrogateSpec Sga(double tau) { return {SurrogateKind::kSga, 0.0, tau}; }

  // Throws InvalidParameter when a required parameter is missing.
  void validate() const;
  // "SUA@5", "AUN", "SGA@0.5" ...
  std::string label() const;
  // Inverse of label(); the kind accepts ParseSurrogate spellings. Throws
  // InvalidParameter on an unknown kind, a missing or stray parameter, or a
  // parameter that fails validate().
  static SurrogateSpec FromLabel(std::string_view label);
};

// Linear temperature ramp from alpha_start to alpha_max over total_steps.
struct AnnealSchedule {
  double alpha_start = 1.0;
  double alpha_max = 12.0;
  int total_steps = 1;

  double alpha(int step) const;
};

// One realisation of the randomness a surrogate consumes. Uniform offsets
// live in [-0.5, 0.5); decision variables for SR/SRA/SGA in [0, 1).
struct NoiseDraw {
  std::vector<double> values;
};

// Number of noise scalars `kind` consumes for an n-vector: 1 for UQ_S,
// n for AUN/UQ_I/SUA/SUA_N/SR/SRA/SGA, 0 for ROUND/SHA.
std::size_t noise_size(SurrogateKind kind, std::size_t n);
NoiseDraw draw_noise(const SurrogateSpec& spec, std::size_t n, Rng& rng);

// Round half away from zero.
double round_half(double y);

// Soft rounding s_alpha. Strictly increasing, fixes integers and
// half-integers, and commutes with integer shifts.
double soft_fn(double y, double alpha);
double soft_fn_deriv(double y, double alpha);
// Inverse of soft_fn (closed form through atanh).
double soft_inv(double z, double alpha);
// Denoiser r_alpha(z) = s_alpha^{-1}(z - 0.5) + 0.5.
double denoise_r(double z, double alpha);
double denoise_r_deriv(double z, double alpha);

// P(ceil) for stochastic rounding, and its annealed variant. Both are zero at
// exact integers, where floor and ceil coincide.
double sr_ceil_prob(double y);
double sra_ceil_prob(double y, double alpha);

// (p_floor, p_ceil) of the SGA categorical sample for one component.
std::pair<double, double> sga_probs(double y, double tau);

// The surrogate output y~. Throws DimensionMismatch when the draw does not
// match noise_size(spec.kind, y.size()).
std::vector<double> forward(const SurrogateSpec& spec, std::span<const double> y,
                            const NoiseDraw& noise);

// Scalar convenience: `noise` is the single noise value for this component
// (ignored for ROUND/SHA).
double forward_scalar(const SurrogateSpec& spec, double y, double noise);

}  // namespace quantlab

#endif  // QUANTLAB_SURROGATES_H_
