// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QUANTLAB_ENTROPY_MODEL_H_
#define QUANTLAB_ENTROPY_MODEL_H_

#include <cstdint>
#include <vector>

#include "quantlab/numerics.h"
#include "quantlab/sources.h"
#include "quantlab/surrogates.h"

namespace quantlab {

// Probabilities are floored here before taking -log2, so rates stay finite
// (at most 64 bits) for far-tail values under a mismatched model.
inline constexpr double kProbFloor = 0x1.0p-64;

// CDF-based model: q(v) = c(v + 0.5) - c(v - 0.5) with c the Gaussian CDF of
// scale max(sigma_q, sigma_0).
struct GaussianEntropyModel {
  double mu_q = 0.0;
  double sigma_q = 1.0;
  double sigma_0 = 0.0;

  GaussianEntropyModel() = default;
  GaussianEntropyModel(double mu_q, double sigma_q, double sigma_0 = 0.0);

  double scale() const { return sigma_q > sigma_0 ? sigma_q : sigma_0; }
  double prob_mass(double v) const;
  double rate_bits(double v) const;
  // d rate_bits / dv; zero where the probability floor is active.
  double rate_bits_deriv(double v) const;
};

struct LaplacianEntropyModel {
  double mu_q = 0.0;
  double b_q = 1.0;
  double b_0 = 0.0;

  LaplacianEntropyModel() = default;
  LaplacianEntropyModel(double mu_q, double b_q, double b_0 = 0.0);

  double scale() const { return b_q > b_0 ? b_q : b_0; }
  double prob_mass(double v) const;
  double rate_bits(double v) const;
};

double prob_mass(const GaussianEntropyModel& model, double value);
double prob_mass(const LaplacianEntropyModel& model, double value);

// Natural-log mass of a unit bin and its partial derivatives, for training.
// d/dmu is -d_value.
struct LogMass {
  double log_mass = 0.0;
  double d_value = 0.0;
  double d_scale = 0.0;
  bool floored = false;  // the floor was active; derivatives are zero
};
LogMass gaussian_log_mass(double value, double mu, double sigma);
LogMass laplace_log_mass(double value, double mu, double b);

struct RateMethod {
  enum class Kind { kQuadrature, kMonteCarlo };
  Kind kind = Kind::kQuadrature;
  std::int64_t n = 0;
  Seed seed;
  Quadrature quadrature;

  static RateMethod Quad(const Quadrature& q = {}) { return {Kind::kQuadrature, 0, {}, q}; }
  static RateMethod MonteCarlo(std::int64_t n, Seed seed) {
    return {Kind::kMonteCarlo, n, seed, {}};
  }
};

struct RateEstimate {
  double bits = 0.0;
  double se = 0.0;  // zero for quadrature
};

// E[-log2 q(y~)] for y~ = forward(spec, Y), Y ~ source. Quadrature supports
// ROUND, SHA, AUN, SUA, SUA_N, SR and SRA; Monte Carlo supports every kind.
// Throws UnsupportedMethod otherwise.
RateEstimate expected_rate(const SurrogateSpec& spec, const Gaussian1D& source,
                           const GaussianEntropyModel& model, const RateMethod& method = {});

struct SurfaceGrid {
  std::vector<double> mu_grid;
  std::vector<double> sigma_grid;

  // 21 means evenly spaced on [mu - 0.5, mu + 0.5] and 20 scales on
  // [0.05, 1].
  static SurfaceGrid Default(double mu);
};

struct RateSurface {
  std::vector<double> mu_grid;
  std::vector<double> sigma_grid;
  // Row-major [mu index][sigma index].
  std::vector<double> rate_bits;
  std::vector<double> round_rate_bits;
  std::vector<double> delta_r;
  // Minimiser of the surrogate's rate: grid argmin, then golden-section
  // refinement in sigma_q at the arg-min mean.
  double q_star_mu = 0.0;
  double q_star_sigma = 0.0;
  double q_star_rate = 0.0;
  // Same for the rounded rate.
  double q_round_mu = 0.0;
  double q_round_sigma = 0.0;
  // Euclidean distance from q* to the source parameters (mu, sigma).
  double q_star_distance = 0.0;

  double at(const std::vector<double>& m, std::size_t i, std::size_t j) const {
    return m[i * sigma_grid.size() + j];
  }
};

RateSurface rate_surface(const SurrogateSpec& spec, const Gaussian1D& source,
                         const SurfaceGrid& grid, double sigma_0 = 0.0,
                         const RateMethod& method = {}, int threads = 1);

// Rate of a unit-variance pair (Y1, Y2) with correlation rho_p under UQ_S
// (one shared offset). Y1 is coded with N(0, 1); Y2 with the conditional
// N(rho_q y1, 1 - rho_q^2). Returns the per-component average, Monte Carlo.
RateEstimate rate_uqs_2d(double rho_p, double rho_q, std::int64_t n_mc, Seed seed);

// round(y - mu_q) + mu_q.
double zero_center_quantize(double y, double mu_q);

}  // namespace quantlab

#endif  // QUANTLAB_ENTROPY_MODEL_H_
