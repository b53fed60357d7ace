// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QUANTLAB_NUMERICS_H_
#define QUANTLAB_NUMERICS_H_

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace quantlab {

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

// Standard normal CDF, accurate to ~1e-16 absolute.
double std_normal_cdf(double x);

// Standard normal density.
double std_normal_pdf(double x);

// P(lo < Z < hi) for Z ~ N(0, 1). Stays accurate deep in either tail, where
// the naive Phi(hi) - Phi(lo) cancels to zero.
double std_normal_interval(double lo, double hi);

// Binary entropy in bits; h(0) = h(1) = 0.
double binary_entropy_bits(double p);

// p * log2(p) with the 0 * log 0 = 0 convention.
double xlog2x(double p);

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

struct Quadrature {
  enum class Method { kAdaptiveSimpson, kGaussLegendre };

  Method method = Method::kAdaptiveSimpson;
  int gauss_points = 32;  // only for kGaussLegendre
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_subdivisions = 20000;

  static Quadrature GaussLegendre(int n) {
    Quadrature q;
    q.method = Method::kGaussLegendre;
    q.gauss_points = n;
    return q;
  }
};

using Integrand = std::function<double(double)>;
using Integrand2d = std::function<double(double, double)>;

// Integral of f over [a, b]. Throws SubdivisionLimit when the adaptive rule
// cannot meet max(abs_tol, rel_tol * |value|) within max_subdivisions.
double integrate(const Integrand& f, double a, double b, const Quadrature& q = {});

// Same, but the interval is first split at every breakpoint strictly inside
// (a, b). Use this for integrands with known kinks or jumps.
double integrate_piecewise(const Integrand& f, double a, double b,
                           std::span<const double> breakpoints,
                           const Quadrature& q = {});

struct Box {
  double x_lo, x_hi, y_lo, y_hi;
};

// Tensor-product (nested) integral over an axis-aligned box.
double integrate2d(const Integrand2d& f, const Box& box, const Quadrature& q = {});

// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussRule& gauss_legendre_rule(int n);

// Half-integers k + 0.5 inside (a, b); the usual breakpoints for integrands
// built from rounding.
std::vector<double> half_integers_between(double a, double b);
std::vector<double> integers_between(double a, double b);

// ---------------------------------------------------------------------------
// Summation and scalar optimisation
// ---------------------------------------------------------------------------

// Neumaier-compensated running sum. Order-independent up to the last bit for
// the sample sizes used here.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Streaming mean / variance (Welford) with a standard error of the mean.
class RunningStats {
 public:
  void add(double v);
  std::int64_t count() const { return n_; }
  double mean() const { return mean_; }
  // Unbiased sample variance.
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double standard_error() const;

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Minimises a unimodal f on [lo, hi] by golden-section search; returns the
// argmin.
double golden_section_minimize(const std::function<double(double)>& f, double lo,
                               double hi, double tol = 1e-8, int max_iter = 200);

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

struct Seed {
  std::uint64_t root = 0;
  std::uint64_t stream_id = 0;

  // Child seed for a sub-task. Children of distinct ids are independent.
  Seed derive(std::uint64_t child) const;

  bool operator==(const Seed&) const = default;
};

// Counter-based generator: the i-th output is a keyed hash of i, so a stream
// is a pure function of (root, stream_id) and can be split without sharing
// state between tasks.
class Rng {
 public:
  explicit Rng(Seed seed);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  // Uniform on [-0.5, 0.5).
  double uniform_centered() { return uniform01() - 0.5; }
  double normal();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// n draws from U(-0.5, 0.5) on the stream named by `seed`.
std::vector<double> rng_uniform(Seed seed, std::size_t n);

}  // namespace quantlab

#endif  // QUANTLAB_NUMERICS_H_
