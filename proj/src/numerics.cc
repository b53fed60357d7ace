// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantlab/numerics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "quantlab/error.h"

namespace quantlab {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidParameter: return "InvalidParameter";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kSubdivisionLimit: return "SubdivisionLimit";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kUnsupportedForward: return "UnsupportedForward";
    case ErrorCode::kDimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::kUnsupportedMethod: return "UnsupportedMethod";
    case ErrorCode::kUnsupportedCase: return "UnsupportedCase";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kNumericalError: return "NumericalError";
  }
  return "Unknown";
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_interval(double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  if (lo >= 0.0) {
    // Upper tail: difference of complementary CDFs.
    return 0.5 * (std::erfc(lo / std::numbers::sqrt2) - std::erfc(hi / std::numbers::sqrt2));
  }
  if (hi <= 0.0) {
    return 0.5 * (std::erfc(-hi / std::numbers::sqrt2) - std::erfc(-lo / std::numbers::sqrt2));
  }
  return 1.0 - 0.5 * std::erfc(hi / std::numbers::sqrt2) -
         0.5 * std::erfc(-lo / std::numbers::sqrt2);
}

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

double binary_entropy_bits(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -xlog2x(p) - xlog2x(1.0 - p);
}

// ---------------------------------------------------------------------------
// Adaptive Simpson
// ---------------------------------------------------------------------------

namespace {

constexpr int kInitialPanels = 16;
constexpr int kMaxDepth = 48;

struct SimpsonContext {
  const Integrand& f;
  int subdivisions = 0;
  int max_subdivisions = 0;
};

double SimpsonRecurse(SimpsonContext& ctx, double a, double b, double fa, double fm,
                      double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = ctx.f(lm);
  const double frm = ctx.f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  // Width below the double resolution of the midpoint: nothing left to split.
  const bool unresolvable = !(lm > a && m > lm && rm > m && b > rm);
  if (depth >= kMaxDepth || unresolvable || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  if (++ctx.subdivisions > ctx.max_subdivisions) {
    throw Error(ErrorCode::kSubdivisionLimit,
                "adaptive Simpson exceeded " + std::to_string(ctx.max_subdivisions) +
                    " subdivisions");
  }
  return SimpsonRecurse(ctx, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
         SimpsonRecurse(ctx, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

double AdaptiveSimpson(const Integrand& f, double a, double b, const Quadrature& q) {
  struct Panel {
    double a, b, fa, fm, fb, whole;
  };
  std::vector<Panel> panels;
  panels.reserve(kInitialPanels);
  const double h = (b - a) / kInitialPanels;
  double f_prev = f(a);
  double estimate = 0.0;
  for (int i = 0; i < kInitialPanels; ++i) {
    const double pa = a + h * i;
    const double pb = (i + 1 == kInitialPanels) ? b : a + h * (i + 1);
    const double fm = f(0.5 * (pa + pb));
    const double fb = f(pb);
    const double whole = (pb - pa) / 6.0 * (f_prev + 4.0 * fm + fb);
    panels.push_back({pa, pb, f_prev, fm, fb, whole});
    estimate += whole;
    f_prev = fb;
  }
  const double tol = std::max(q.abs_tol, q.rel_tol * std::abs(estimate));
  SimpsonContext ctx{f, 0, q.max_subdivisions};
  CompensatedSum total;
  for (const Panel& p : panels) {
    total.add(SimpsonRecurse(ctx, p.a, p.b, p.fa, p.fm, p.fb, p.whole,
                             tol / kInitialPanels, 0));
  }
  return total.value();
}

double GaussLegendreFixed(const Integrand& f, double a, double b, int n) {
  const GaussRule& rule = gauss_legendre_rule(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  CompensatedSum sum;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    sum.add(rule.weights[i] * f(mid + half * rule.nodes[i]));
  }
  return half * sum.value();
}

}  // namespace

const GaussRule& gauss_legendre_rule(int n) {
  Require(n >= 1 && n <= 1024, ErrorCode::kInvalidParameter,
          "Gauss-Legendre order must be in [1, 1024]");
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = 2.0;
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

double integrate(const Integrand& f, double a, double b, const Quadrature& q) {
  Require(a <= b, ErrorCode::kInvalidParameter, "integrate requires a <= b");
  if (a == b) return 0.0;
  switch (q.method) {
    case Quadrature::Method::kGaussLegendre:
      return GaussLegendreFixed(f, a, b, q.gauss_points);
    case Quadrature::Method::kAdaptiveSimpson:
      return AdaptiveSimpson(f, a, b, q);
  }
  return 0.0;
}

double integrate_piecewise(const Integrand& f, double a, double b,
                           std::span<const double> breakpoints, const Quadrature& q) {
  Require(a <= b, ErrorCode::kInvalidParameter, "integrate requires a <= b");
  std::vector<double> cuts;
  cuts.push_back(a);
  for (double p : breakpoints) {
    if (p > a && p < b) cuts.push_back(p);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  Quadrature piece = q;
  // Split the absolute budget so the total still honours abs_tol.
  piece.abs_tol = q.abs_tol / static_cast<double>(cuts.size() - 1);
  CompensatedSum total;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total.add(integrate(f, cuts[i], cuts[i + 1], piece));
  }
  return total.value();
}

double integrate2d(const Integrand2d& f, const Box& box, const Quadrature& q) {
  Require(box.x_lo <= box.x_hi && box.y_lo <= box.y_hi, ErrorCode::kInvalidParameter,
          "integrate2d requires an ordered box");
  Quadrature inner = q;
  const double width = std::max(1.0, box.x_hi - box.x_lo);
  inner.abs_tol = 0.1 * q.abs_tol / width;
  return integrate(
      [&](double x) {
        return integrate([&](double y) { return f(x, y); }, box.y_lo, box.y_hi, inner);
      },
      box.x_lo, box.x_hi, q);
}

std::vector<double> half_integers_between(double a, double b) {
  std::vector<double> out;
  for (double k = std::ceil(a - 0.5); k + 0.5 < b; k += 1.0) {
    if (k + 0.5 > a) out.push_back(k + 0.5);
  }
  return out;
}

std::vector<double> integers_between(double a, double b) {
  std::vector<double> out;
  for (double k = std::ceil(a); k < b; k += 1.0) {
    if (k > a) out.push_back(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics and optimisation
// ---------------------------------------------------------------------------

void RunningStats::add(double v) {
  ++n_;
  const double d = v - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (v - mean_);
}

double RunningStats::standard_error() const {
  return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

double golden_section_minimize(const std::function<double(double)>& f, double lo,
                               double hi, double tol, int max_iter) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < max_iter && (b - a) > tol; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// RNG
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t Mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Seed Seed::derive(std::uint64_t child) const {
  return Seed{root, Mix64(stream_id ^ Mix64(child + 0x632BE59BD9B4E019ULL))};
}

Rng::Rng(Seed seed)
    : key_(Mix64(seed.root ^ Mix64(seed.stream_id + 0xD1B54A32D192ED03ULL))) {}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return Mix64(key_ + counter_ * kGolden);
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> rng_uniform(Seed seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& v : out) v = rng.uniform_centered();
  return out;
}

}  // namespace quantlab
