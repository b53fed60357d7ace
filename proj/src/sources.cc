// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantlab/sources.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "quantlab/error.h"

namespace quantlab {

Gaussian1D::Gaussian1D(double mu_in, double sigma_in) : mu(mu_in), sigma(sigma_in) {
  Require(std::isfinite(mu) && std::isfinite(sigma) && sigma > 0.0,
          ErrorCode::kInvalidParameter,
          "Gaussian1D needs finite mu and sigma > 0, got sigma=" + std::to_string(sigma));
}

double Gaussian1D::pdf(double y) const { return std_normal_pdf((y - mu) / sigma) / sigma; }

double Gaussian1D::cdf(double y) const { return std_normal_cdf((y - mu) / sigma); }

double Gaussian1D::interval(double lo, double hi) const {
  return std_normal_interval((lo - mu) / sigma, (hi - mu) / sigma);
}

std::vector<double> Gaussian1D::sample(Seed seed, std::size_t n) const {
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& v : out) v = mu + sigma * rng.normal();
  return out;
}

Gaussian2D::Gaussian2D(double sigma_in, double rho_in) : sigma(sigma_in), rho(rho_in) {
  Require(std::isfinite(sigma) && sigma > 0.0, ErrorCode::kInvalidParameter,
          "Gaussian2D needs sigma > 0");
  Require(rho >= -1.0 && rho <= 1.0, ErrorCode::kInvalidParameter,
          "Gaussian2D needs rho in [-1, 1]");
}

double Gaussian2D::pdf(double y1, double y2) const {
  Require(std::abs(rho) < 1.0, ErrorCode::kUnsupportedCase,
          "Gaussian2D density is singular for |rho| = 1");
  const double a = y1 / sigma;
  const double b = y2 / sigma;
  const double det = 1.0 - rho * rho;
  const double q = (a * a - 2.0 * rho * a * b + b * b) / det;
  return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * sigma * sigma * std::sqrt(det));
}

std::vector<std::array<double, 2>> Gaussian2D::sample(Seed seed, std::size_t n) const {
  Rng rng(seed);
  std::vector<std::array<double, 2>> out(n);
  const double tail = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  for (auto& pair : out) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    pair[0] = sigma * z1;
    if (rho == 1.0) {
      pair[1] = pair[0];
    } else if (rho == -1.0) {
      pair[1] = -pair[0];
    } else {
      pair[1] = sigma * (rho * z1 + tail * z2);
    }
  }
  return out;
}

Laplace1D::Laplace1D(double location_in, double scale_in)
    : location(location_in), scale(scale_in) {
  Require(std::isfinite(location) && std::isfinite(scale) && scale > 0.0,
          ErrorCode::kInvalidParameter, "Laplace1D needs scale > 0");
}

double Laplace1D::pdf(double y) const {
  return std::exp(-std::abs(y - location) / scale) / (2.0 * scale);
}

double Laplace1D::cdf(double y) const {
  const double z = (y - location) / scale;
  return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
}

double laplace_quantile(const Laplace1D& d, double p) {
  if (p < 0.5) return d.location + d.scale * std::log(2.0 * p);
  return d.location - d.scale * std::log(2.0 * (1.0 - p));
}

std::vector<double> Laplace1D::sample(Seed seed, std::size_t n) const {
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& v : out) {
    // uniform01 is in [0, 1); shift by half an ulp-step to stay inside (0, 1).
    const double p = (static_cast<double>(rng.next_u64() >> 11) + 0.5) * 0x1.0p-53;
    v = laplace_quantile(*this, p);
  }
  return out;
}

Gaussian1D conditional_gaussian(double model_rho, double y1) {
  Require(std::abs(model_rho) < 1.0, ErrorCode::kInvalidParameter,
          "conditional_gaussian needs |rho_q| < 1");
  return Gaussian1D(model_rho * y1, std::sqrt(1.0 - model_rho * model_rho));
}

}  // namespace quantlab
