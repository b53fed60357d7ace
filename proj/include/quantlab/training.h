// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

// Training loops for the toy simulations: synthesis-only distortion studies,
// the scalar Laplacian rate-distortion experiment, zero-center quantization
// with partial stop-gradient, and the lower-bound sweep.

#ifndef QUANTLAB_TRAINING_H_
#define QUANTLAB_TRAINING_H_

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "quantlab/backward.h"
#include "quantlab/mlp.h"
#include "quantlab/numerics.h"
#include "quantlab/sources.h"
#include "quantlab/surrogates.h"

namespace quantlab {

// Step size `base`, multiplied by `factor` from step decay_at * total on.
struct LrSchedule {
  double base = 1e-3;
  double decay_at = 0.8;
  double factor = 0.1;

  double at(int step, int total) const;
};

struct TrainConfig {
  int steps = 50000;
  int batch = 256;
  LrSchedule lr;
  double lambda = 1.0;
  AnnealSchedule anneal;
  Seed seed;
  bool stop_gradient_mu = false;
  // NonConvergence when the mean loss of the last 20% of steps exceeds the
  // mean of the first 20% by more than this fraction.
  double convergence_tol = 0.05;

  void validate() const;
};

// Tracks per-step losses and applies the convergence rule.
class LossTrace {
 public:
  void add(double loss);
  // Throws NonConvergence.
  void check(double tol, const char* what) const;
  double first_fraction_mean(double frac) const;
  double last_fraction_mean(double frac) const;
  std::size_t size() const { return losses_.size(); }

 private:
  std::vector<double> losses_;
};

// ---------------------------------------------------------------------------
// Distortion simulation
// ---------------------------------------------------------------------------

// Latent Y = sigma * X + mu of a standard normal X (dim 1), or of the
// unit-variance pair with correlation rho (dim 2).
struct DistortionSource {
  int dim = 1;
  double mu = 0.0;
  double sigma = 1.0;
  double rho = 0.0;

  void validate() const;
  // Columns are samples: x is (dim x n).
  Eigen::MatrixXd sample_x(Seed seed, int n) const;
  Eigen::MatrixXd latent(const Eigen::MatrixXd& x) const;
};

// 3 hidden layers of 64 softplus units.
Mlp default_synthesis(int dim, Seed seed);

// Applies the surrogate column by column, drawing noise from `rng`.
Eigen::MatrixXd apply_surrogate(const SurrogateSpec& spec, const Eigen::MatrixXd& y, Rng& rng);

// Trains g_s on (y~, x) pairs with MSE, starting from `net`.
Mlp train_synthesis_net(Mlp net, const SurrogateSpec& spec, const DistortionSource& src,
                        const TrainConfig& cfg, LossTrace* trace = nullptr);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

// Held-out MSE of `net` on forward(spec, Y).
Estimate evaluate_distortion(const Mlp& net, const SurrogateSpec& spec,
                             const DistortionSource& src, int n, Seed seed);

struct DistortionResult {
  Mlp net;
  Mlp baseline;
  Estimate d_tilde;
  Estimate d_round;
  double delta_d_rel = 0.0;
};

// Trains the surrogate net and a rounding baseline from the same init, then
// evaluates both on `eval_samples` held-out draws.
DistortionResult train_synthesis(const SurrogateSpec& spec, const DistortionSource& src,
                                 const TrainConfig& cfg, int eval_samples = 1000000);

// E[Var(X | Y~)] for scalar Y = sigma X + mu, under ROUND or AUN: the MSE of
// the optimal decoder E[X | Y~].
double bayes_distortion(SurrogateKind kind, const Gaussian1D& latent);

// Re-trains the synthesis on rounded latents (the analysis is fixed here).
Mlp post_train_synthesis(const Mlp& net, const DistortionSource& src, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Scalar residual networks and the Laplacian experiment
// ---------------------------------------------------------------------------

enum class AnalysisKind { kLinear, kNonlinear };

// z = a x + c followed by z += block_k(z) for each residual block
// (1 -> width -> 1, softplus). With no blocks it is affine.
class ResidualScalarNet {
 public:
  ResidualScalarNet() = default;
  ResidualScalarNet(int blocks, int width, double gain, Seed seed);

  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  struct Cache {
    std::vector<Eigen::RowVectorXd> block_in;
    std::vector<MlpCache> block_cache;
    Eigen::RowVectorXd x;
  };

  Eigen::RowVectorXd forward(const Eigen::RowVectorXd& x, Cache* cache = nullptr) const;
  // Adds parameter gradients into grad; writes dLoss/dx when requested.
  void backward(const Cache& cache, const Eigen::RowVectorXd& upstream, std::span<double> grad,
                Eigen::RowVectorXd* grad_input = nullptr) const;

 private:
  int width_ = 0;
  std::vector<double> params_;
  std::vector<std::size_t> block_offset_;
};

struct LaplaceRdConfig {
  AnalysisKind analysis = AnalysisKind::kLinear;
  GradRule rule = GradRule::kSte;  // STE or EP, SR forward
  std::vector<double> lambdas = {1.0, 1.5, 2.0, 3.0, 4.0};
  int steps = 3000;
  int post_steps = 1000;
  int batch = 256;
  double lr = 1e-2;
  double b0 = 0.08;
  double post_b0 = 1e-6;
  int blocks = 2;
  int width = 32;
  int eval_samples = 200000;
  Seed seed;

  void validate() const;
};

struct RdPoint {
  double lambda = 0.0;
  Estimate rate_bits;
  Estimate mse;
  Estimate loss;  // rate + lambda * mse, rounding evaluation
};

// Jointly trains analysis, synthesis and a learned Laplacian entropy model
// under SR, then post-trains the synthesis and entropy model on rounded
// latents. One point per lambda.
std::vector<RdPoint> train_laplace_rd(const LaplaceRdConfig& cfg);

// Rate of curve `b` minus the rate of curve `a` at the distortion of each
// point of `b` that lies inside a's distortion range; linear interpolation of
// rate against log distortion. Points outside the range are skipped.
std::vector<double> rate_gap_at_matched_distortion(const std::vector<RdPoint>& a,
                                                   const std::vector<RdPoint>& b);

// ---------------------------------------------------------------------------
// Zero-center quantization
// ---------------------------------------------------------------------------

struct ZeroCenterValue {
  double value = 0.0;  // r(s(y - mu) + u) + mu
  double d_y = 0.0;
  double d_mu = 0.0;   // zero when the stop-gradient flag is on
};

ZeroCenterValue forward_zero_center_partial_sg(double y, double mu_q, double alpha, double u,
                                               bool stop_gradient);

// Per-sample gradient of R(y~) + lambda (x - y~)^2 with respect to mu_q for
// the zero-center SUA forward, Y = X ~ N(mu_x, sigma_x^2), model
// N(mu_q, sigma_q^2). Returns mean and variance over n samples.
struct GradMoments {
  double mean = 0.0;
  double variance = 0.0;
};
GradMoments zero_center_mu_gradient(double mu_x, double sigma_x, double mu_q, double sigma_q,
                                    double alpha, double lambda, bool stop_gradient, int n,
                                    Seed seed);

// ---------------------------------------------------------------------------
// Lower-bound sweep
// ---------------------------------------------------------------------------

// Gaussian scale mixture with side information: each element is x = s z
// with z standard normal and log s uniform on [log scale_lo, log scale_hi];
// s is known to both ends, as a hyperprior would provide. Analysis gain
// a(s) = exp(c0 + c1 log s), entropy model N(0, sigma_q(s)) with
// log sigma_q = h0 + h1 log s clamped below by sigma_0, synthesis an Mlp on
// (y~, log s). Joint training uses AUN; post-training re-fits the entropy
// model and synthesis on rounded latents with sigma_0 = post_sigma0.
struct LowerBoundConfig {
  double scale_lo = 0.02;
  double scale_hi = 2.0;
  double lambda = 1.0;
  int steps = 3000;
  int post_steps = 1500;
  int batch = 1024;
  int width = 32;
  double lr = 1e-2;
  double post_sigma0 = 1e-6;
  int eval_samples = 200000;
  Seed seed;

  void validate() const;
};

struct LowerBoundPoint {
  double sigma0 = 0.0;
  Estimate rate_bits;
  Estimate mse;
  Estimate loss;
};

LowerBoundPoint train_lower_bound(const LowerBoundConfig& cfg, double sigma0);

}  // namespace quantlab

#endif  // QUANTLAB_TRAINING_H_
