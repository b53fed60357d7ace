// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantlab/surrogates.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "quantlab/error.h"

namespace quantlab {

namespace {

constexpr std::array<std::pair<SurrogateKind, std::string_view>, 10> kNames = {{
    {SurrogateKind::kRound, "ROUND"},
    {SurrogateKind::kSha, "SHA"},
    {SurrogateKind::kAun, "AUN"},
    {SurrogateKind::kUqS, "UQ_S"},
    {SurrogateKind::kUqI, "UQ_I"},
    {SurrogateKind::kSga, "SGA"},
    {SurrogateKind::kSua, "SUA"},
    {SurrogateKind::kSuaN, "SUA_N"},
    {SurrogateKind::kSr, "SR"},
    {SurrogateKind::kSra, "SRA"},
}};

// atanh argument clamp for SGA.
constexpr double kSgaClamp = 1.0 - 1e-6;

double Sech2(double x) {
  const double c = std::cosh(x);
  return 1.0 / (c * c);
}

}  // namespace

std::string_view SurrogateName(SurrogateKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<SurrogateKind> ParseSurrogate(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  // Accept the hyphenated spellings too.
  if (name == "UQ-s" || name == "UQ-S") return SurrogateKind::kUqS;
  if (name == "UQ-i" || name == "UQ-I") return SurrogateKind::kUqI;
  if (name == "SUA-n" || name == "SUA-N") return SurrogateKind::kSuaN;
  return std::nullopt;
}

bool IsAnnealed(SurrogateKind kind) {
  return kind == SurrogateKind::kSha || kind == SurrogateKind::kSua ||
         kind == SurrogateKind::kSuaN || kind == SurrogateKind::kSra;
}

bool IsStochastic(SurrogateKind kind) {
  return kind != SurrogateKind::kRound && kind != SurrogateKind::kSha;
}

void SurrogateSpec::validate() const {
  if (IsAnnealed(kind)) {
    Require(std::isfinite(alpha) && alpha > 0.0, ErrorCode::kInvalidParameter,
            std::string(SurrogateName(kind)) + " needs a finite alpha > 0");
  }
  if (kind == SurrogateKind::kSga) {
    Require(std::isfinite(tau) && tau > 0.0, ErrorCode::kInvalidParameter,
            "SGA needs a finite tau > 0");
  }
}

std::string SurrogateSpec::label() const {
  std::ostringstream os;
  os << SurrogateName(kind);
  if (IsAnnealed(kind)) os << '@' << alpha;
  if (kind == SurrogateKind::kSga) os << '@' << tau;
  return os.str();
}

SurrogateSpec SurrogateSpec::FromLabel(std::string_view label) {
  const std::size_t at = label.find('@');
  const std::string_view name = label.substr(0, at);
  const auto kind = ParseSurrogate(name);
  Require(kind.has_value(), ErrorCode::kInvalidParameter,
          "unknown forward calculation '" + std::string(label) + "'");
  SurrogateSpec spec{*kind, 0.0, 0.0};
  const bool takes_param = IsAnnealed(*kind) || *kind == SurrogateKind::kSga;
  if (at == std::string_view::npos) {
    Require(!takes_param, ErrorCode::kInvalidParameter,
            "'" + std::string(label) + "' needs a parameter, e.g. " + std::string(name) + "@5");
    return spec;
  }
  Require(takes_param, ErrorCode::kInvalidParameter,
          "'" + std::string(name) + "' takes no parameter");
  const std::string value(label.substr(at + 1));
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  Require(!value.empty() && ec == std::errc() && ptr == value.data() + value.size(),
          ErrorCode::kInvalidParameter, "bad parameter in '" + std::string(label) + "'");
  if (*kind == SurrogateKind::kSga) {
    spec.tau = v;
  } else {
    spec.alpha = v;
  }
  spec.validate();
  return spec;
}

double AnnealSchedule::alpha(int step) const {
  if (total_steps <= 0 || step >= total_steps) return alpha_max;
  if (step <= 0) return alpha_start;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return alpha_start + (alpha_max - alpha_start) * t;
}

std::size_t noise_size(SurrogateKind kind, std::size_t n) {
  switch (kind) {
    case SurrogateKind::kRound:
    case SurrogateKind::kSha:
      return 0;
    case SurrogateKind::kUqS:
      return n == 0 ? 0 : 1;
    default:
      return n;
  }
}

NoiseDraw draw_noise(const SurrogateSpec& spec, std::size_t n, Rng& rng) {
  NoiseDraw draw;
  draw.values.resize(noise_size(spec.kind, n));
  const bool decision = spec.kind == SurrogateKind::kSr || spec.kind == SurrogateKind::kSra ||
                        spec.kind == SurrogateKind::kSga;
  for (double& v : draw.values) v = decision ? rng.uniform01() : rng.uniform_centered();
  return draw;
}

double round_half(double y) { return std::round(y); }

double soft_fn(double y, double alpha) {
  const double fl = std::floor(y);
  const double r = y - fl - 0.5;
  return fl + std::tanh(alpha * r) / (2.0 * std::tanh(0.5 * alpha)) + 0.5;
}

double soft_fn_deriv(double y, double alpha) {
  const double r = y - std::floor(y) - 0.5;
  return alpha * Sech2(alpha * r) / (2.0 * std::tanh(0.5 * alpha));
}

double soft_inv(double z, double alpha) {
  const double fl = std::floor(z);
  const double f = z - fl - 0.5;  // in [-0.5, 0.5)
  double arg = 2.0 * f * std::tanh(0.5 * alpha);
  const double lim = std::nextafter(1.0, 0.0);
  arg = std::clamp(arg, -lim, lim);
  return fl + std::atanh(arg) / alpha + 0.5;
}

double denoise_r(double z, double alpha) { return soft_inv(z - 0.5, alpha) + 0.5; }

double denoise_r_deriv(double z, double alpha) {
  return 1.0 / soft_fn_deriv(soft_inv(z - 0.5, alpha), alpha);
}

double sr_ceil_prob(double y) { return y - std::floor(y); }

double sra_ceil_prob(double y, double alpha) {
  return std::clamp(soft_fn(y, alpha) - std::floor(y), 0.0, 1.0);
}

std::pair<double, double> sga_probs(double y, double tau) {
  Require(std::isfinite(y), ErrorCode::kDegenerateInput, "sga_probs needs a finite y");
  Require(tau > 0.0, ErrorCode::kInvalidParameter, "sga_probs needs tau > 0");
  const double fl = std::floor(y);
  const double to_floor = std::min(y - fl, kSgaClamp);
  const double to_ceil = std::min(fl + 1.0 - y, kSgaClamp);
  const double logit_floor = -std::atanh(to_floor) / tau;
  const double logit_ceil = -std::atanh(to_ceil) / tau;
  const double m = std::max(logit_floor, logit_ceil);
  const double ef = std::exp(logit_floor - m);
  const double ec = std::exp(logit_ceil - m);
  return {ef / (ef + ec), ec / (ef + ec)};
}

double forward_scalar(const SurrogateSpec& spec, double y, double noise) {
  switch (spec.kind) {
    case SurrogateKind::kRound:
      return round_half(y);
    case SurrogateKind::kSha:
      return soft_fn(y, spec.alpha);
    case SurrogateKind::kAun:
      return y + noise;
    case SurrogateKind::kUqS:
    case SurrogateKind::kUqI:
      return round_half(y + noise) - noise;
    case SurrogateKind::kSga: {
      const auto [p_floor, p_ceil] = sga_probs(y, spec.tau);
      (void)p_ceil;
      return std::floor(y) + (noise < p_floor ? 0.0 : 1.0);
    }
    case SurrogateKind::kSua:
      return denoise_r(soft_fn(y, spec.alpha) + noise, spec.alpha);
    case SurrogateKind::kSuaN:
      return soft_fn(y, spec.alpha) + noise;
    case SurrogateKind::kSr:
      return std::floor(y) + (noise < sr_ceil_prob(y) ? 1.0 : 0.0);
    case SurrogateKind::kSra:
      return std::floor(y) + (noise < sra_ceil_prob(y, spec.alpha) ? 1.0 : 0.0);
  }
  return y;
}

std::vector<double> forward(const SurrogateSpec& spec, std::span<const double> y,
                            const NoiseDraw& noise) {
  spec.validate();
  const std::size_t expected = noise_size(spec.kind, y.size());
  Require(noise.values.size() == expected, ErrorCode::kDimensionMismatch,
          std::string(SurrogateName(spec.kind)) + " expects " + std::to_string(expected) +
              " noise values, got " + std::to_string(noise.values.size()));
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double n = 0.0;
    if (spec.kind == SurrogateKind::kUqS) {
      n = noise.values[0];
    } else if (expected != 0) {
      n = noise.values[i];
    }
    out[i] = forward_scalar(spec, y[i], n);
  }
  return out;
}

}  // namespace quantlab
