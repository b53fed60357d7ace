// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QUANTLAB_SOURCES_H_
#define QUANTLAB_SOURCES_H_

#include <array>
#include <cstddef>
#include <vector>

#include "quantlab/numerics.h"

namespace quantlab {

// Scalar Gaussian N(mu, sigma^2). Also the latent Y = sigma * X + mu produced
// by a fixed affine analysis transform of a standard normal X.
struct Gaussian1D {
  double mu = 0.0;
  double sigma = 1.0;

  Gaussian1D() = default;
  // Throws InvalidParameter unless sigma > 0 and both are finite.
  Gaussian1D(double mu, double sigma);

  double pdf(double y) const;
  double cdf(double y) const;
  // P(lo < Y < hi), accurate in the tails.
  double interval(double lo, double hi) const;
  std::vector<double> sample(Seed seed, std::size_t n) const;
};

// Zero-mean bivariate Gaussian with covariance sigma^2 [[1, rho], [rho, 1]].
struct Gaussian2D {
  double sigma = 1.0;
  double rho = 0.0;

  Gaussian2D() = default;
  Gaussian2D(double sigma, double rho);

  double pdf(double y1, double y2) const;
  // Y2 = rho Y1 + sqrt(1 - rho^2) Z, with rho = +-1 giving Y2 = +-Y1 exactly.
  std::vector<std::array<double, 2>> sample(Seed seed, std::size_t n) const;
};

struct Laplace1D {
  double location = 0.0;
  double scale = 1.0;

  Laplace1D() = default;
  Laplace1D(double location, double scale);

  double pdf(double y) const;
  double cdf(double y) const;
  // Inverse-CDF sampling.
  std::vector<double> sample(Seed seed, std::size_t n) const;
  double variance() const { return 2.0 * scale * scale; }
};

// Inverse Laplace CDF for p in (0, 1).
double laplace_quantile(const Laplace1D& d, double p);

// The model-side conditional N(rho_q * y1, 1 - rho_q^2) of the second
// component of a unit-variance bivariate Gaussian, given the first.
Gaussian1D conditional_gaussian(double model_rho, double y1);

}  // namespace quantlab

#endif  // QUANTLAB_SOURCES_H_
