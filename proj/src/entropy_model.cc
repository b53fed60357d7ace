// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantlab/entropy_model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "quantlab/error.h"
#include "quantlab/parallel.h"

namespace quantlab {

namespace {

constexpr double kTailSigmas = 10.0;

double Log2Floored(double p) { return std::log2(std::max(p, kProbFloor)); }

std::vector<double> Concat(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Density of W = s_alpha(Y) + U.
double SoftNoisyDensity(const Gaussian1D& source, double w, double alpha) {
  return source.interval(soft_inv(w - 0.5, alpha), soft_inv(w + 0.5, alpha));
}

double QuadratureRate(const SurrogateSpec& spec, const Gaussian1D& src,
                      const GaussianEntropyModel& model, const Quadrature& q) {
  const double mu = src.mu;
  const double sd = src.sigma;
  const double y_lo = mu - kTailSigmas * sd;
  const double y_hi = mu + kTailSigmas * sd;
  auto rate = [&](double v) { return model.rate_bits(v); };

  switch (spec.kind) {
    case SurrogateKind::kRound: {
      CompensatedSum acc;
      const double n_lo = round_half(y_lo) - 1.0;
      const double n_hi = round_half(y_hi) + 1.0;
      for (double n = n_lo; n <= n_hi; n += 1.0) {
        const double p = src.interval(n - 0.5, n + 0.5);
        if (p > 0.0) acc.add(p * rate(n));
      }
      return acc.value();
    }
    case SurrogateKind::kAun: {
      const std::vector<double> breaks = {mu - 0.5, mu + 0.5};
      return integrate_piecewise(
          [&](double t) {
            const double p = src.interval(t - 0.5, t + 0.5);
            return p > 0.0 ? p * rate(t) : 0.0;
          },
          y_lo - 0.5, y_hi + 0.5, breaks, q);
    }
    case SurrogateKind::kSua:
    case SurrogateKind::kSuaN: {
      const double a = spec.alpha;
      const double w_lo = soft_fn(y_lo, a) - 0.5;
      const double w_hi = soft_fn(y_hi, a) + 0.5;
      const double s_mu = soft_fn(mu, a);
      const std::vector<double> breaks =
          Concat({s_mu - 0.5, s_mu + 0.5}, half_integers_between(w_lo, w_hi));
      const bool denoise = spec.kind == SurrogateKind::kSua;
      return integrate_piecewise(
          [&](double w) {
            const double p = SoftNoisyDensity(src, w, a);
            if (p <= 0.0) return 0.0;
            return p * rate(denoise ? denoise_r(w, a) : w);
          },
          w_lo, w_hi, breaks, q);
    }
    case SurrogateKind::kSr:
    case SurrogateKind::kSra: {
      const bool annealed = spec.kind == SurrogateKind::kSra;
      return integrate_piecewise(
          [&](double y) {
            const double fl = std::floor(y);
            const double pc = annealed ? sra_ceil_prob(y, spec.alpha) : sr_ceil_prob(y);
            return src.pdf(y) * ((1.0 - pc) * rate(fl) + pc * rate(fl + 1.0));
          },
          y_lo, y_hi, integers_between(y_lo, y_hi), q);
    }
    case SurrogateKind::kSha:
      return integrate_piecewise(
          [&](double y) { return src.pdf(y) * rate(soft_fn(y, spec.alpha)); }, y_lo, y_hi,
          integers_between(y_lo, y_hi), q);
    default:
      throw Error(ErrorCode::kUnsupportedMethod,
                  "quadrature rate is not available for " +
                      std::string(SurrogateName(spec.kind)) + "; use Monte Carlo");
  }
}

RateEstimate MonteCarloRate(const SurrogateSpec& spec, const Gaussian1D& src,
                            const GaussianEntropyModel& model, std::int64_t n, Seed seed) {
  Require(n >= 2, ErrorCode::kInvalidParameter, "Monte Carlo rate needs n >= 2");
  Rng y_rng(seed.derive(0));
  Rng noise_rng(seed.derive(1));
  RunningStats rs;
  for (std::int64_t i = 0; i < n; ++i) {
    const double y = src.mu + src.sigma * y_rng.normal();
    const NoiseDraw noise = draw_noise(spec, 1, noise_rng);
    const double u = noise.values.empty() ? 0.0 : noise.values[0];
    rs.add(model.rate_bits(forward_scalar(spec, y, u)));
  }
  return {rs.mean(), rs.standard_error()};
}

double LaplaceInterval(double lo, double hi, double mu, double b) {
  if (lo >= mu) return 0.5 * (std::exp(-(lo - mu) / b) - std::exp(-(hi - mu) / b));
  if (hi <= mu) return 0.5 * (std::exp((hi - mu) / b) - std::exp((lo - mu) / b));
  return 1.0 - 0.5 * std::exp(-(hi - mu) / b) - 0.5 * std::exp((lo - mu) / b);
}

}  // namespace

GaussianEntropyModel::GaussianEntropyModel(double mu, double sigma, double s0)
    : mu_q(mu), sigma_q(sigma), sigma_0(s0) {
  Require(std::isfinite(mu_q) && std::isfinite(sigma_q) && sigma_q > 0.0,
          ErrorCode::kInvalidParameter, "GaussianEntropyModel needs finite mu_q and sigma_q > 0");
  Require(std::isfinite(sigma_0) && sigma_0 >= 0.0, ErrorCode::kInvalidParameter,
          "GaussianEntropyModel needs sigma_0 >= 0");
}

double GaussianEntropyModel::prob_mass(double v) const {
  const double s = scale();
  return std::max(std_normal_interval((v - 0.5 - mu_q) / s, (v + 0.5 - mu_q) / s), kProbFloor);
}

double GaussianEntropyModel::rate_bits(double v) const { return -Log2Floored(prob_mass(v)); }

double GaussianEntropyModel::rate_bits_deriv(double v) const {
  const LogMass lm = gaussian_log_mass(v, mu_q, scale());
  return -lm.d_value / std::numbers::ln2;
}

LaplacianEntropyModel::LaplacianEntropyModel(double mu, double b, double b0)
    : mu_q(mu), b_q(b), b_0(b0) {
  Require(std::isfinite(mu_q) && std::isfinite(b_q) && b_q > 0.0, ErrorCode::kInvalidParameter,
          "LaplacianEntropyModel needs finite mu_q and b_q > 0");
  Require(std::isfinite(b_0) && b_0 >= 0.0, ErrorCode::kInvalidParameter,
          "LaplacianEntropyModel needs b_0 >= 0");
}

double LaplacianEntropyModel::prob_mass(double v) const {
  return std::max(LaplaceInterval(v - 0.5, v + 0.5, mu_q, scale()), kProbFloor);
}

double LaplacianEntropyModel::rate_bits(double v) const { return -Log2Floored(prob_mass(v)); }

double prob_mass(const GaussianEntropyModel& model, double value) {
  return model.prob_mass(value);
}

double prob_mass(const LaplacianEntropyModel& model, double value) {
  return model.prob_mass(value);
}

LogMass gaussian_log_mass(double value, double mu, double sigma) {
  const double a = (value + 0.5 - mu) / sigma;
  const double b = (value - 0.5 - mu) / sigma;
  const double m = std_normal_interval(b, a);
  LogMass out;
  if (!(m > kProbFloor)) {
    out.log_mass = std::log(kProbFloor);
    out.floored = true;
    return out;
  }
  const double pa = std_normal_pdf(a);
  const double pb = std_normal_pdf(b);
  out.log_mass = std::log(m);
  out.d_value = (pa - pb) / (sigma * m);
  out.d_scale = -(a * pa - b * pb) / (sigma * m);
  return out;
}

LogMass laplace_log_mass(double value, double mu, double b) {
  const double lo = value - 0.5;
  const double hi = value + 0.5;
  LogMass out;
  // log(1 - e^{-1/b}) and its b-derivative, shared by both one-sided cases.
  const double inv_b = 1.0 / b;
  const double log_width = std::log(-std::expm1(-inv_b));
  const double d_log_width = -(inv_b * inv_b) / std::expm1(inv_b);
  if (lo >= mu) {
    const double l = (lo - mu) * inv_b;
    out.log_mass = std::log(0.5) - l + log_width;
    out.d_value = -inv_b;
    out.d_scale = l * inv_b + d_log_width;
  } else if (hi <= mu) {
    const double h = (mu - hi) * inv_b;
    out.log_mass = std::log(0.5) - h + log_width;
    out.d_value = inv_b;
    out.d_scale = h * inv_b + d_log_width;
  } else {
    const double a = (hi - mu) * inv_b;
    const double c = (mu - lo) * inv_b;
    const double ea = std::exp(-a);
    const double ec = std::exp(-c);
    const double m = 1.0 - 0.5 * ea - 0.5 * ec;
    out.log_mass = std::log(m);
    out.d_value = (ea - ec) * 0.5 * inv_b / m;
    out.d_scale = -(a * ea + c * ec) * 0.5 * inv_b / m;
  }
  if (out.log_mass < std::log(kProbFloor)) {
    out = LogMass{};
    out.log_mass = std::log(kProbFloor);
    out.floored = true;
  }
  return out;
}

RateEstimate expected_rate(const SurrogateSpec& spec, const Gaussian1D& source,
                           const GaussianEntropyModel& model, const RateMethod& method) {
  spec.validate();
  if (method.kind == RateMethod::Kind::kMonteCarlo) {
    return MonteCarloRate(spec, source, model, method.n, method.seed);
  }
  return {QuadratureRate(spec, source, model, method.quadrature), 0.0};
}

SurfaceGrid SurfaceGrid::Default(double mu) {
  SurfaceGrid g;
  for (int i = 0; i <= 20; ++i) g.mu_grid.push_back(mu - 0.5 + 0.05 * i);
  for (int j = 1; j <= 20; ++j) g.sigma_grid.push_back(0.05 * j);
  return g;
}

RateSurface rate_surface(const SurrogateSpec& spec, const Gaussian1D& source,
                         const SurfaceGrid& grid, double sigma_0, const RateMethod& method,
                         int threads) {
  Require(!grid.mu_grid.empty() && !grid.sigma_grid.empty(), ErrorCode::kInvalidParameter,
          "rate_surface needs non-empty grids");
  RateSurface out;
  out.mu_grid = grid.mu_grid;
  out.sigma_grid = grid.sigma_grid;
  const std::size_t nm = grid.mu_grid.size();
  const std::size_t ns = grid.sigma_grid.size();
  out.rate_bits.resize(nm * ns);
  out.round_rate_bits.resize(nm * ns);
  out.delta_r.resize(nm * ns);

  auto surrogate_rate = [&](double mu_q, double sigma_q) {
    return expected_rate(spec, source, GaussianEntropyModel(mu_q, sigma_q, sigma_0), method).bits;
  };
  auto round_rate = [&](double mu_q, double sigma_q) {
    return expected_rate(SurrogateSpec::Round(), source,
                         GaussianEntropyModel(mu_q, sigma_q, sigma_0), RateMethod::Quad())
        .bits;
  };

  parallel_for(nm * ns, threads, [&](std::size_t k) {
    const double m = grid.mu_grid[k / ns];
    const double s = grid.sigma_grid[k % ns];
    out.rate_bits[k] = surrogate_rate(m, s);
    out.round_rate_bits[k] = round_rate(m, s);
    out.delta_r[k] = out.rate_bits[k] - out.round_rate_bits[k];
  });

  auto refine = [&](const std::vector<double>& values, const auto& f, double& mu_star,
                    double& sigma_star) {
    const std::size_t k = static_cast<std::size_t>(
        std::min_element(values.begin(), values.end()) - values.begin());
    const std::size_t i = k / ns;
    const std::size_t j = k % ns;
    mu_star = grid.mu_grid[i];
    const double lo = grid.sigma_grid[j == 0 ? 0 : j - 1];
    const double hi = grid.sigma_grid[j + 1 == ns ? j : j + 1];
    sigma_star = grid.sigma_grid[j];
    if (hi > lo) {
      const double refined =
          golden_section_minimize([&](double s) { return f(mu_star, s); }, lo, hi, 1e-6);
      if (f(mu_star, refined) <= values[k]) sigma_star = refined;
    }
    return f(mu_star, sigma_star);
  };
  out.q_star_rate = refine(out.rate_bits, surrogate_rate, out.q_star_mu, out.q_star_sigma);
  refine(out.round_rate_bits, round_rate, out.q_round_mu, out.q_round_sigma);
  out.q_star_distance =
      std::hypot(out.q_star_mu - source.mu, out.q_star_sigma - source.sigma);
  return out;
}

RateEstimate rate_uqs_2d(double rho_p, double rho_q, std::int64_t n_mc, Seed seed) {
  Require(std::abs(rho_p) <= 1.0, ErrorCode::kInvalidParameter, "rate_uqs_2d needs |rho_p| <= 1");
  Require(std::abs(rho_q) < 1.0, ErrorCode::kInvalidParameter, "rate_uqs_2d needs |rho_q| < 1");
  Require(n_mc >= 2, ErrorCode::kInvalidParameter, "rate_uqs_2d needs n_mc >= 2");
  const Gaussian2D src(1.0, rho_p);
  const GaussianEntropyModel marginal(0.0, 1.0);
  const double cond_sigma = std::sqrt(1.0 - rho_q * rho_q);
  const auto ys = src.sample(seed.derive(0), static_cast<std::size_t>(n_mc));
  Rng noise(seed.derive(1));
  RunningStats rs;
  for (const auto& y : ys) {
    const double u = noise.uniform_centered();
    const double t1 = round_half(y[0] + u) - u;
    const double t2 = round_half(y[1] + u) - u;
    const GaussianEntropyModel cond(rho_q * y[0], cond_sigma);
    rs.add(0.5 * (marginal.rate_bits(t1) + cond.rate_bits(t2)));
  }
  return {rs.mean(), rs.standard_error()};
}

double zero_center_quantize(double y, double mu_q) { return round_half(y - mu_q) + mu_q; }

}  // namespace quantlab
