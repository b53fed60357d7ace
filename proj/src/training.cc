// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantlab/training.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "quantlab/entropy_model.h"
#include "quantlab/error.h"

namespace quantlab {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr int kEvalChunk = 4096;

double Softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double StandardLaplace(Rng& rng) {
  const double p = (static_cast<double>(rng.next_u64() >> 11) + 0.5) * 0x1.0p-53;
  return laplace_quantile(Laplace1D(0.0, 1.0), p);
}

Estimate ToEstimate(const RunningStats& rs) { return {rs.mean(), rs.standard_error()}; }

// Seed layout shared by the training loops.
enum SeedStream : std::uint64_t {
  kInitStream = 1,
  kTrainStream = 2,
  kPostStream = 3,
  kEvalStream = 4,
};

}  // namespace

double LrSchedule::at(int step, int total) const {
  return static_cast<double>(step) < decay_at * static_cast<double>(total) ? base : base * factor;
}

void TrainConfig::validate() const {
  Require(steps > 0 && batch > 0, ErrorCode::kInvalidParameter, "steps and batch must be > 0");
  Require(lambda > 0.0, ErrorCode::kInvalidParameter, "lambda must be > 0");
  Require(lr.base > 0.0 && lr.factor > 0.0 && lr.factor <= 1.0, ErrorCode::kInvalidParameter,
          "learning-rate schedule must be positive and nonincreasing");
}

void LossTrace::add(double loss) { losses_.push_back(loss); }

double LossTrace::first_fraction_mean(double frac) const {
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(frac * losses_.size()));
  CompensatedSum s;
  for (std::size_t i = 0; i < k && i < losses_.size(); ++i) s.add(losses_[i]);
  return s.value() / static_cast<double>(std::min(k, losses_.size()));
}

double LossTrace::last_fraction_mean(double frac) const {
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(frac * losses_.size()));
  CompensatedSum s;
  const std::size_t start = losses_.size() > k ? losses_.size() - k : 0;
  for (std::size_t i = start; i < losses_.size(); ++i) s.add(losses_[i]);
  return s.value() / static_cast<double>(losses_.size() - start);
}

void LossTrace::check(double tol, const char* what) const {
  for (double l : losses_) {
    Require(std::isfinite(l), ErrorCode::kNonConvergence,
            std::string(what) + ": loss became non-finite");
  }
  if (losses_.empty()) return;
  const double first = first_fraction_mean(0.2);
  const double last = last_fraction_mean(0.2);
  Require(last <= first * (1.0 + tol), ErrorCode::kNonConvergence,
          std::string(what) + ": loss did not improve (first 20% mean " + std::to_string(first) +
              ", last 20% mean " + std::to_string(last) + ")");
}

// ---------------------------------------------------------------------------
// Distortion simulation
// ---------------------------------------------------------------------------

void DistortionSource::validate() const {
  Require(dim == 1 || dim == 2, ErrorCode::kInvalidParameter, "distortion source dim is 1 or 2");
  Require(sigma > 0.0 && std::isfinite(mu), ErrorCode::kInvalidParameter,
          "distortion source needs sigma > 0");
  Require(rho >= -1.0 && rho <= 1.0, ErrorCode::kInvalidParameter, "rho must be in [-1, 1]");
}

namespace {

Eigen::MatrixXd SampleX(const DistortionSource& src, Rng& rng, int n) {
  Eigen::MatrixXd x(src.dim, n);
  const double tail = std::sqrt(std::max(0.0, 1.0 - src.rho * src.rho));
  for (int j = 0; j < n; ++j) {
    const double z1 = rng.normal();
    x(0, j) = z1;
    if (src.dim == 2) {
      const double z2 = rng.normal();
      if (src.rho == 1.0) {
        x(1, j) = z1;
      } else if (src.rho == -1.0) {
        x(1, j) = -z1;
      } else {
        x(1, j) = src.rho * z1 + tail * z2;
      }
    }
  }
  return x;
}

double SurrogateAlpha(const SurrogateSpec& spec, const TrainConfig& cfg, int step) {
  if (IsAnnealed(spec.kind) && cfg.anneal.total_steps > 1) return cfg.anneal.alpha(step);
  return spec.alpha;
}

}  // namespace

Eigen::MatrixXd DistortionSource::sample_x(Seed seed, int n) const {
  Rng rng(seed);
  return SampleX(*this, rng, n);
}

Eigen::MatrixXd DistortionSource::latent(const Eigen::MatrixXd& x) const {
  return (sigma * x).array() + mu;
}

Mlp default_synthesis(int dim, Seed seed) {
  return Mlp({dim, 64, 64, 64, dim}, Activation::kSoftplus, seed);
}

Eigen::MatrixXd apply_surrogate(const SurrogateSpec& spec, const Eigen::MatrixXd& y, Rng& rng) {
  Eigen::MatrixXd out(y.rows(), y.cols());
  const auto n = static_cast<std::size_t>(y.rows());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    const NoiseDraw noise = draw_noise(spec, n, rng);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      double u = 0.0;
      if (!noise.values.empty()) {
        u = spec.kind == SurrogateKind::kUqS ? noise.values[0]
                                             : noise.values[static_cast<std::size_t>(i)];
      }
      out(i, j) = forward_scalar(spec, y(i, j), u);
    }
  }
  return out;
}

Mlp train_synthesis_net(Mlp net, const SurrogateSpec& spec, const DistortionSource& src,
                        const TrainConfig& cfg, LossTrace* trace) {
  cfg.validate();
  src.validate();
  Require(net.in_dim() == src.dim && net.out_dim() == src.dim, ErrorCode::kShapeMismatch,
          "synthesis net does not match the source dimension");
  Adam adam(net.num_params());
  std::vector<double> grad(net.num_params());
  LossTrace local;
  MlpCache cache;
  for (int step = 0; step < cfg.steps; ++step) {
    Rng rng(cfg.seed.derive(kTrainStream).derive(static_cast<std::uint64_t>(step)));
    const Eigen::MatrixXd x = SampleX(src, rng, cfg.batch);
    SurrogateSpec s = spec;
    s.alpha = SurrogateAlpha(spec, cfg, step);
    const Eigen::MatrixXd yt = apply_surrogate(s, src.latent(x), rng);
    const Eigen::MatrixXd xhat = net.forward(yt, &cache);
    const Eigen::MatrixXd diff = xhat - x;
    local.add(diff.squaredNorm() / cfg.batch);
    std::fill(grad.begin(), grad.end(), 0.0);
    net.backward(cache, (2.0 / cfg.batch) * diff, grad);
    adam.step(net.params(), grad, cfg.lr.at(step, cfg.steps));
  }
  local.check(cfg.convergence_tol, "synthesis training");
  if (trace) *trace = std::move(local);
  return net;
}

Estimate evaluate_distortion(const Mlp& net, const SurrogateSpec& spec,
                             const DistortionSource& src, int n, Seed seed) {
  RunningStats rs;
  Rng rng(seed);
  for (int done = 0; done < n; done += kEvalChunk) {
    const int m = std::min(kEvalChunk, n - done);
    const Eigen::MatrixXd x = SampleX(src, rng, m);
    const Eigen::MatrixXd xhat = net.forward(apply_surrogate(spec, src.latent(x), rng));
    for (int j = 0; j < m; ++j) rs.add((xhat.col(j) - x.col(j)).squaredNorm());
  }
  return ToEstimate(rs);
}

DistortionResult train_synthesis(const SurrogateSpec& spec, const DistortionSource& src,
                                 const TrainConfig& cfg, int eval_samples) {
  spec.validate();
  const Mlp init = default_synthesis(src.dim, cfg.seed.derive(kInitStream));
  DistortionResult out;
  out.net = train_synthesis_net(init, spec, src, cfg);
  out.baseline = train_synthesis_net(init, SurrogateSpec::Round(), src, cfg);
  const Seed eval = cfg.seed.derive(kEvalStream);
  out.d_tilde = evaluate_distortion(out.net, spec, src, eval_samples, eval);
  out.d_round = evaluate_distortion(out.baseline, SurrogateSpec::Round(), src, eval_samples, eval);
  out.delta_d_rel = (out.d_tilde.mean - out.d_round.mean) / out.d_round.mean;
  return out;
}

double bayes_distortion(SurrogateKind kind, const Gaussian1D& latent) {
  // For Y restricted to (lo, hi): P(bin) * Var(X | bin) in standard units,
  // written without the division by P(bin) so far tails stay harmless.
  auto weighted_var = [&](double lo, double hi) {
    const double a = (lo - latent.mu) / latent.sigma;
    const double b = (hi - latent.mu) / latent.sigma;
    const double z = std_normal_interval(a, b);
    if (z < 1e-300) return 0.0;
    const double pa = std_normal_pdf(a);
    const double pb = std_normal_pdf(b);
    const double ta = std::isfinite(a) ? a * pa : 0.0;
    const double tb = std::isfinite(b) ? b * pb : 0.0;
    return std::max(0.0, z + (ta - tb) - (pa - pb) * (pa - pb) / z);
  };
  const double lo = latent.mu - 10.0 * latent.sigma;
  const double hi = latent.mu + 10.0 * latent.sigma;
  switch (kind) {
    case SurrogateKind::kRound: {
      CompensatedSum acc;
      for (double n = round_half(lo) - 1.0; n <= round_half(hi) + 1.0; n += 1.0) {
        acc.add(weighted_var(n - 0.5, n + 0.5));
      }
      return acc.value();
    }
    case SurrogateKind::kAun: {
      const double breaks[2] = {latent.mu - 0.5, latent.mu + 0.5};
      return integrate_piecewise([&](double t) { return weighted_var(t - 0.5, t + 0.5); },
                                 lo - 0.5, hi + 0.5, breaks);
    }
    default:
      throw Error(ErrorCode::kUnsupportedForward, "bayes_distortion supports ROUND and AUN");
  }
}

Mlp post_train_synthesis(const Mlp& net, const DistortionSource& src, const TrainConfig& cfg) {
  TrainConfig post = cfg;
  post.seed = cfg.seed.derive(kPostStream);
  return train_synthesis_net(net, SurrogateSpec::Round(), src, post);
}

// ---------------------------------------------------------------------------
// Residual scalar networks
// ---------------------------------------------------------------------------

// Layout: [a, c] then per block [W1 (width), b1 (width), W2 (width), b2].
ResidualScalarNet::ResidualScalarNet(int blocks, int width, double gain, Seed seed)
    : width_(width) {
  Require(blocks >= 0 && width > 0, ErrorCode::kInvalidParameter, "bad residual net shape");
  params_.assign(2, 0.0);
  params_[0] = gain;
  Rng rng(seed);
  const double out_bound = 0.1 / std::sqrt(static_cast<double>(width));
  for (int k = 0; k < blocks; ++k) {
    block_offset_.push_back(params_.size());
    for (int i = 0; i < width; ++i) params_.push_back(2.0 * rng.uniform01() - 1.0);  // W1
    for (int i = 0; i < width; ++i) params_.push_back(2.0 * rng.uniform01() - 1.0);  // b1
    for (int i = 0; i < width; ++i) params_.push_back(out_bound * (2.0 * rng.uniform01() - 1.0));
    params_.push_back(0.0);  // b2
  }
}

Eigen::RowVectorXd ResidualScalarNet::forward(const Eigen::RowVectorXd& x, Cache* cache) const {
  Eigen::RowVectorXd z = (params_[0] * x).array() + params_[1];
  if (cache) {
    cache->x = x;
    cache->block_in.clear();
    cache->block_cache.clear();
  }
  for (std::size_t off : block_offset_) {
    Eigen::Map<const Eigen::VectorXd> w1(params_.data() + off, width_);
    Eigen::Map<const Eigen::VectorXd> b1(params_.data() + off + width_, width_);
    Eigen::Map<const Eigen::RowVectorXd> w2(params_.data() + off + 2 * width_, width_);
    const double b2 = params_[off + 3 * width_];
    Eigen::MatrixXd pre = w1 * z;
    pre.colwise() += b1;
    const Eigen::MatrixXd h = pre.unaryExpr([](double v) { return Softplus(v); });
    if (cache) {
      cache->block_in.push_back(z);
      MlpCache mc;
      mc.pre.push_back(std::move(pre));
      mc.inputs.push_back(h);
      cache->block_cache.push_back(std::move(mc));
    }
    z.array() += (w2 * h).array() + b2;
  }
  return z;
}

void ResidualScalarNet::backward(const Cache& cache, const Eigen::RowVectorXd& upstream,
                                 std::span<double> grad, Eigen::RowVectorXd* grad_input) const {
  Require(grad.size() == params_.size(), ErrorCode::kShapeMismatch, "gradient buffer size");
  Eigen::RowVectorXd g = upstream;
  for (std::size_t k = block_offset_.size(); k-- > 0;) {
    const std::size_t off = block_offset_[k];
    Eigen::Map<const Eigen::VectorXd> w1(params_.data() + off, width_);
    Eigen::Map<const Eigen::RowVectorXd> w2(params_.data() + off + 2 * width_, width_);
    const Eigen::MatrixXd& pre = cache.block_cache[k].pre[0];
    const Eigen::MatrixXd& h = cache.block_cache[k].inputs[0];
    const Eigen::RowVectorXd& zin = cache.block_in[k];
    Eigen::Map<Eigen::VectorXd> gw1(grad.data() + off, width_);
    Eigen::Map<Eigen::VectorXd> gb1(grad.data() + off + width_, width_);
    Eigen::Map<Eigen::VectorXd> gw2(grad.data() + off + 2 * width_, width_);
    gw2 += h * g.transpose();
    grad[off + 3 * width_] += g.sum();
    // d/dpre = (w2^T g) .* sigmoid(pre)
    const Eigen::MatrixXd gpre =
        (w2.transpose() * g).cwiseProduct(pre.unaryExpr([](double v) { return Sigmoid(v); }));
    gw1 += gpre * zin.transpose();
    gb1 += gpre.rowwise().sum();
    g += w1.transpose() * gpre;
  }
  grad[0] += g.dot(cache.x);
  grad[1] += g.sum();
  if (grad_input) *grad_input = params_[0] * g;
}

// ---------------------------------------------------------------------------
// Laplacian rate-distortion experiment
// ---------------------------------------------------------------------------

void LaplaceRdConfig::validate() const {
  Require(rule == GradRule::kSte || rule == GradRule::kEp, ErrorCode::kInvalidParameter,
          "laplace-rd supports the STE and EP rules");
  Require(!lambdas.empty(), ErrorCode::kInvalidParameter, "laplace-rd needs at least one lambda");
  for (double l : lambdas) Require(l > 0.0, ErrorCode::kInvalidParameter, "lambda must be > 0");
  Require(steps > 0 && post_steps >= 0 && batch > 0 && eval_samples > 1,
          ErrorCode::kInvalidParameter, "laplace-rd step counts must be positive");
  Require(lr > 0.0 && b0 > 0.0 && post_b0 > 0.0, ErrorCode::kInvalidParameter,
          "laplace-rd needs lr, b0 and post_b0 > 0");
  Require(blocks >= 0 && width > 0, ErrorCode::kInvalidParameter, "bad residual block shape");
}

namespace {

// Learned Laplacian entropy model: params = [mu, log b].
struct LaplaceModelGrad {
  double rate_bits = 0.0;
  double d_value = 0.0;  // d rate / d value
  double d_mu = 0.0;
  double d_logb = 0.0;
};

LaplaceModelGrad LaplaceRate(double v, const double* ent, double b_floor) {
  const double b_param = std::exp(ent[1]);
  const bool clamped = b_param <= b_floor;
  const double b = clamped ? b_floor : b_param;
  const LogMass lm = laplace_log_mass(v, ent[0], b);
  LaplaceModelGrad g;
  g.rate_bits = -lm.log_mass / kLn2;
  g.d_value = -lm.d_value / kLn2;
  g.d_mu = lm.d_value / kLn2;
  g.d_logb = clamped ? 0.0 : -lm.d_scale * b / kLn2;
  return g;
}

struct LaplaceSystem {
  ResidualScalarNet ga;
  ResidualScalarNet gs;
  std::vector<double> ent = {0.0, 0.0};
};

Eigen::RowVectorXd SampleLaplaceBatch(Rng& rng, int n) {
  Eigen::RowVectorXd x(n);
  for (int j = 0; j < n; ++j) x[j] = StandardLaplace(rng);
  return x;
}

void JointTrainLaplace(LaplaceSystem& sys, const LaplaceRdConfig& cfg, double lambda,
                       Seed seed) {
  Adam adam_a(sys.ga.num_params()), adam_s(sys.gs.num_params()), adam_e(2);
  std::vector<double> ga_grad(sys.ga.num_params()), gs_grad(sys.gs.num_params()), e_grad(2);
  const LrSchedule sched{cfg.lr, 0.8, 0.1};
  const int b = cfg.batch;
  LossTrace trace;
  ResidualScalarNet::Cache ca, c0, c1;
  for (int step = 0; step < cfg.steps; ++step) {
    Rng rng(seed.derive(static_cast<std::uint64_t>(step)));
    const Eigen::RowVectorXd x = SampleLaplaceBatch(rng, b);
    const Eigen::RowVectorXd y = sys.ga.forward(x, &ca);
    std::fill(ga_grad.begin(), ga_grad.end(), 0.0);
    std::fill(gs_grad.begin(), gs_grad.end(), 0.0);
    std::fill(e_grad.begin(), e_grad.end(), 0.0);
    Eigen::RowVectorXd dy(b);
    CompensatedSum loss;
    if (cfg.rule == GradRule::kEp) {
      // Exact expectation over the SR decision:
      // E L = (1 - p) L(floor) + p L(floor + 1), p = y - floor(y).
      Eigen::RowVectorXd f(b), f1(b), p(b);
      for (int j = 0; j < b; ++j) {
        f[j] = std::floor(y[j]);
        f1[j] = f[j] + 1.0;
        p[j] = y[j] - f[j];
      }
      const Eigen::RowVectorXd x0 = sys.gs.forward(f, &c0);
      const Eigen::RowVectorXd x1 = sys.gs.forward(f1, &c1);
      Eigen::RowVectorXd up0(b), up1(b);
      for (int j = 0; j < b; ++j) {
        const LaplaceModelGrad r0 = LaplaceRate(f[j], sys.ent.data(), cfg.b0);
        const LaplaceModelGrad r1 = LaplaceRate(f1[j], sys.ent.data(), cfg.b0);
        const double l0 = r0.rate_bits + lambda * (x[j] - x0[j]) * (x[j] - x0[j]);
        const double l1 = r1.rate_bits + lambda * (x[j] - x1[j]) * (x[j] - x1[j]);
        loss.add((1.0 - p[j]) * l0 + p[j] * l1);
        dy[j] = (l1 - l0) / b;
        up0[j] = (1.0 - p[j]) * lambda * 2.0 * (x0[j] - x[j]) / b;
        up1[j] = p[j] * lambda * 2.0 * (x1[j] - x[j]) / b;
        e_grad[0] += ((1.0 - p[j]) * r0.d_mu + p[j] * r1.d_mu) / b;
        e_grad[1] += ((1.0 - p[j]) * r0.d_logb + p[j] * r1.d_logb) / b;
      }
      sys.gs.backward(c0, up0, gs_grad);
      sys.gs.backward(c1, up1, gs_grad);
    } else {
      Eigen::RowVectorXd yt(b);
      for (int j = 0; j < b; ++j) {
        const double fl = std::floor(y[j]);
        yt[j] = fl + (rng.uniform01() < y[j] - fl ? 1.0 : 0.0);
      }
      const Eigen::RowVectorXd xh = sys.gs.forward(yt, &c0);
      Eigen::RowVectorXd up(b);
      for (int j = 0; j < b; ++j) {
        const LaplaceModelGrad r = LaplaceRate(yt[j], sys.ent.data(), cfg.b0);
        loss.add(r.rate_bits + lambda * (x[j] - xh[j]) * (x[j] - xh[j]));
        up[j] = lambda * 2.0 * (xh[j] - x[j]) / b;
        dy[j] = r.d_value / b;
        e_grad[0] += r.d_mu / b;
        e_grad[1] += r.d_logb / b;
      }
      Eigen::RowVectorXd dxh_dyt;
      sys.gs.backward(c0, up, gs_grad, &dxh_dyt);
      // Straight-through: dy~/dy = 1.
      dy += dxh_dyt;
    }
    sys.ga.backward(ca, dy, ga_grad);
    const double lr = sched.at(step, cfg.steps);
    adam_a.step(sys.ga.params(), ga_grad, lr);
    adam_s.step(sys.gs.params(), gs_grad, lr);
    adam_e.step(sys.ent, e_grad, lr);
    trace.add(loss.value() / b);
  }
  trace.check(0.05, "laplace-rd joint training");
}

void PostTrainLaplace(LaplaceSystem& sys, const LaplaceRdConfig& cfg, double lambda, Seed seed) {
  Adam adam_s(sys.gs.num_params()), adam_e(2);
  std::vector<double> gs_grad(sys.gs.num_params()), e_grad(2);
  const LrSchedule sched{cfg.lr, 0.8, 0.1};
  const int b = cfg.batch;
  LossTrace trace;
  ResidualScalarNet::Cache c;
  for (int step = 0; step < cfg.post_steps; ++step) {
    Rng rng(seed.derive(static_cast<std::uint64_t>(step)));
    const Eigen::RowVectorXd x = SampleLaplaceBatch(rng, b);
    const Eigen::RowVectorXd yh = sys.ga.forward(x).unaryExpr([](double v) { return round_half(v); });
    const Eigen::RowVectorXd xh = sys.gs.forward(yh, &c);
    std::fill(gs_grad.begin(), gs_grad.end(), 0.0);
    std::fill(e_grad.begin(), e_grad.end(), 0.0);
    Eigen::RowVectorXd up(b);
    CompensatedSum loss;
    for (int j = 0; j < b; ++j) {
      const LaplaceModelGrad r = LaplaceRate(yh[j], sys.ent.data(), cfg.post_b0);
      loss.add(r.rate_bits + lambda * (x[j] - xh[j]) * (x[j] - xh[j]));
      up[j] = lambda * 2.0 * (xh[j] - x[j]) / b;
      e_grad[0] += r.d_mu / b;
      e_grad[1] += r.d_logb / b;
    }
    sys.gs.backward(c, up, gs_grad);
    const double lr = sched.at(step, cfg.post_steps);
    adam_s.step(sys.gs.params(), gs_grad, lr);
    adam_e.step(sys.ent, e_grad, lr);
    trace.add(loss.value() / b);
  }
  trace.check(0.05, "laplace-rd post-training");
}

RdPoint EvaluateLaplace(const LaplaceSystem& sys, const LaplaceRdConfig& cfg, double lambda,
                        double b_floor, Seed seed) {
  RunningStats rate, mse, loss;
  Rng rng(seed);
  for (int done = 0; done < cfg.eval_samples; done += kEvalChunk) {
    const int m = std::min(kEvalChunk, cfg.eval_samples - done);
    const Eigen::RowVectorXd x = SampleLaplaceBatch(rng, m);
    const Eigen::RowVectorXd yh = sys.ga.forward(x).unaryExpr([](double v) { return round_half(v); });
    const Eigen::RowVectorXd xh = sys.gs.forward(yh);
    for (int j = 0; j < m; ++j) {
      const double r = LaplaceRate(yh[j], sys.ent.data(), b_floor).rate_bits;
      const double d = (x[j] - xh[j]) * (x[j] - xh[j]);
      rate.add(r);
      mse.add(d);
      loss.add(r + lambda * d);
    }
  }
  return {lambda, ToEstimate(rate), ToEstimate(mse), ToEstimate(loss)};
}

}  // namespace

std::vector<RdPoint> train_laplace_rd(const LaplaceRdConfig& cfg) {
  cfg.validate();
  const int blocks = cfg.analysis == AnalysisKind::kNonlinear ? cfg.blocks : 0;
  std::vector<RdPoint> out;
  for (std::size_t k = 0; k < cfg.lambdas.size(); ++k) {
    const double lambda = cfg.lambdas[k];
    const Seed run = cfg.seed.derive(k);
    LaplaceSystem sys;
    // Unit-gain affine paths; the seed only moves the residual blocks.
    sys.ga = ResidualScalarNet(blocks, cfg.width, 1.0, run.derive(kInitStream).derive(0));
    sys.gs = ResidualScalarNet(blocks, cfg.width, 1.0, run.derive(kInitStream).derive(1));
    JointTrainLaplace(sys, cfg, lambda, run.derive(kTrainStream));
    if (cfg.post_steps > 0) PostTrainLaplace(sys, cfg, lambda, run.derive(kPostStream));
    const double eval_floor = cfg.post_steps > 0 ? cfg.post_b0 : cfg.b0;
    out.push_back(EvaluateLaplace(sys, cfg, lambda, eval_floor, run.derive(kEvalStream)));
  }
  return out;
}

std::vector<double> rate_gap_at_matched_distortion(const std::vector<RdPoint>& a,
                                                   const std::vector<RdPoint>& b) {
  std::vector<std::pair<double, double>> curve;  // (log mse, rate), sorted by log mse
  for (const RdPoint& p : a) curve.emplace_back(std::log(p.mse.mean), p.rate_bits.mean);
  std::sort(curve.begin(), curve.end());
  std::vector<double> gaps;
  if (curve.size() < 2) return gaps;
  for (const RdPoint& p : b) {
    const double ld = std::log(p.mse.mean);
    if (ld < curve.front().first || ld > curve.back().first) continue;
    auto hi = std::lower_bound(curve.begin(), curve.end(), std::make_pair(ld, -1e300));
    if (hi == curve.begin()) ++hi;
    const auto lo = hi - 1;
    const double t = hi->first == lo->first ? 0.0 : (ld - lo->first) / (hi->first - lo->first);
    gaps.push_back(p.rate_bits.mean - (lo->second + t * (hi->second - lo->second)));
  }
  return gaps;
}

// ---------------------------------------------------------------------------
// Zero-center quantization
// ---------------------------------------------------------------------------

ZeroCenterValue forward_zero_center_partial_sg(double y, double mu_q, double alpha, double u,
                                               bool stop_gradient) {
  Require(alpha > 0.0, ErrorCode::kInvalidParameter, "zero-center SUA needs alpha > 0");
  const double w = soft_fn(y - mu_q, alpha) + u;
  ZeroCenterValue out;
  out.value = denoise_r(w, alpha) + mu_q;
  out.d_y = denoise_r_deriv(w, alpha) * soft_fn_deriv(y - mu_q, alpha);
  out.d_mu = stop_gradient ? 0.0 : 1.0 - out.d_y;
  return out;
}

GradMoments zero_center_mu_gradient(double mu_x, double sigma_x, double mu_q, double sigma_q,
                                    double alpha, double lambda, bool stop_gradient, int n,
                                    Seed seed) {
  Require(n >= 2, ErrorCode::kInvalidParameter, "zero_center_mu_gradient needs n >= 2");
  Rng rng(seed);
  RunningStats rs;
  for (int i = 0; i < n; ++i) {
    const double x = mu_x + sigma_x * rng.normal();
    const double u = rng.uniform_centered();
    const ZeroCenterValue zc = forward_zero_center_partial_sg(x, mu_q, alpha, u, stop_gradient);
    const LogMass lm = gaussian_log_mass(zc.value, mu_q, sigma_q);
    // R = -log_mass / ln2 depends on (y~ - mu_q).
    const double d_rate_d_value = -lm.d_value / kLn2;
    const double d_rate_direct = lm.d_value / kLn2;
    const double g = d_rate_direct + d_rate_d_value * zc.d_mu +
                     lambda * 2.0 * (zc.value - x) * zc.d_mu;
    rs.add(g);
  }
  return {rs.mean(), rs.variance()};
}

// ---------------------------------------------------------------------------
// Lower-bound sweep
// ---------------------------------------------------------------------------

void LowerBoundConfig::validate() const {
  Require(scale_lo > 0.0 && scale_hi >= scale_lo, ErrorCode::kInvalidParameter,
          "lower-bound source needs 0 < scale_lo <= scale_hi");
  Require(lambda > 0.0 && steps > 0 && post_steps >= 0 && batch > 0 && width > 0 &&
              eval_samples > 1,
          ErrorCode::kInvalidParameter, "lower-bound training parameters must be positive");
  Require(lr > 0.0 && post_sigma0 > 0.0, ErrorCode::kInvalidParameter,
          "lower-bound lr and post_sigma0 must be > 0");
}

namespace {

struct ScaleMixtureBatch {
  Eigen::RowVectorXd x;
  Eigen::RowVectorXd log_s;
};

ScaleMixtureBatch SampleScaleMixture(const LowerBoundConfig& cfg, Rng& rng, int n) {
  const double lo = std::log(cfg.scale_lo);
  const double hi = std::log(cfg.scale_hi);
  ScaleMixtureBatch b{Eigen::RowVectorXd(n), Eigen::RowVectorXd(n)};
  for (int j = 0; j < n; ++j) {
    b.log_s[j] = lo + (hi - lo) * rng.uniform01();
    b.x[j] = std::exp(b.log_s[j]) * rng.normal();
  }
  return b;
}

struct ScaleMixtureSystem {
  double gain[2] = {0.0, 0.0};   // log a = gain0 + gain1 log s
  double scale[2] = {0.0, 0.0};  // log sigma_q = scale0 + scale1 log s
  Mlp synthesis;
};

Eigen::MatrixXd SynthesisInput(const Eigen::RowVectorXd& y, const Eigen::RowVectorXd& log_s) {
  Eigen::MatrixXd in(2, y.size());
  in.row(0) = y;
  in.row(1) = log_s;
  return in;
}

// Rate and loss accumulation shared by both phases. Adds rate gradients for
// the entropy-model parameters into g_scale and returns dRate/dvalue.
double ScaleMixtureRate(const ScaleMixtureSystem& sys, double value, double log_s, double floor,
                        double* rate_bits, double g_scale[2], double weight) {
  const double sig_param = std::exp(sys.scale[0] + sys.scale[1] * log_s);
  const bool clamped = sig_param <= floor;
  const double sig = clamped ? floor : sig_param;
  const LogMass lm = gaussian_log_mass(value, 0.0, sig);
  *rate_bits = -lm.log_mass / kLn2;
  if (!clamped) {
    const double d_log_sigma = -lm.d_scale * sig / kLn2 * weight;
    g_scale[0] += d_log_sigma;
    g_scale[1] += d_log_sigma * log_s;
  }
  return -lm.d_value / kLn2 * weight;
}

}  // namespace

LowerBoundPoint train_lower_bound(const LowerBoundConfig& cfg, double sigma0) {
  cfg.validate();
  Require(sigma0 >= 0.0, ErrorCode::kInvalidParameter, "sigma_0 must be >= 0");
  ScaleMixtureSystem sys;
  sys.synthesis = Mlp({2, cfg.width, cfg.width, 1}, Activation::kSoftplus,
                      cfg.seed.derive(kInitStream));
  const double lambda = cfg.lambda;
  const int b = cfg.batch;
  const double inv_b = 1.0 / b;
  std::vector<double> g_syn(sys.synthesis.num_params());
  MlpCache cache;

  // Joint training with AUN.
  {
    Adam adam_syn(sys.synthesis.num_params());
    Adam adam_small(4);
    std::vector<double> small(4), g_small(4);
    const LrSchedule sched{cfg.lr, 0.8, 0.1};
    LossTrace trace;
    const Seed seed = cfg.seed.derive(kTrainStream);
    for (int step = 0; step < cfg.steps; ++step) {
      Rng rng(seed.derive(static_cast<std::uint64_t>(step)));
      const ScaleMixtureBatch batch = SampleScaleMixture(cfg, rng, b);
      Eigen::RowVectorXd y(b), yt(b);
      for (int j = 0; j < b; ++j) {
        y[j] = std::exp(sys.gain[0] + sys.gain[1] * batch.log_s[j]) * batch.x[j];
        yt[j] = y[j] + rng.uniform_centered();
      }
      const Eigen::MatrixXd xh = sys.synthesis.forward(SynthesisInput(yt, batch.log_s), &cache);
      std::fill(g_syn.begin(), g_syn.end(), 0.0);
      std::fill(g_small.begin(), g_small.end(), 0.0);
      Eigen::MatrixXd up(1, b);
      Eigen::RowVectorXd d_rate(b);
      CompensatedSum loss;
      for (int j = 0; j < b; ++j) {
        double r = 0.0;
        d_rate[j] = ScaleMixtureRate(sys, yt[j], batch.log_s[j], sigma0, &r, &g_small[2], inv_b);
        const double diff = xh(0, j) - batch.x[j];
        loss.add(r + lambda * diff * diff);
        up(0, j) = 2.0 * lambda * diff * inv_b;
      }
      Eigen::MatrixXd g_in;
      sys.synthesis.backward(cache, up, g_syn, &g_in);
      for (int j = 0; j < b; ++j) {
        // d y~ / d gain0 = y, d y~ / d gain1 = y log s.
        const double d_yt = d_rate[j] + g_in(0, j);
        g_small[0] += d_yt * y[j];
        g_small[1] += d_yt * y[j] * batch.log_s[j];
      }
      small = {sys.gain[0], sys.gain[1], sys.scale[0], sys.scale[1]};
      const double lr = sched.at(step, cfg.steps);
      adam_small.step(small, g_small, lr);
      adam_syn.step(sys.synthesis.params(), g_syn, lr);
      sys.gain[0] = small[0];
      sys.gain[1] = small[1];
      sys.scale[0] = small[2];
      sys.scale[1] = small[3];
      trace.add(loss.value() * inv_b);
    }
    trace.check(0.05, "lower-bound joint training");
  }

  auto quantized = [&](const ScaleMixtureBatch& batch) {
    Eigen::RowVectorXd yh(batch.x.size());
    for (Eigen::Index j = 0; j < yh.size(); ++j) {
      yh[j] = zero_center_quantize(
          std::exp(sys.gain[0] + sys.gain[1] * batch.log_s[j]) * batch.x[j], 0.0);
    }
    return yh;
  };

  // Post-training on rounded latents; the analysis gain is frozen.
  if (cfg.post_steps > 0) {
    Adam adam_syn(sys.synthesis.num_params());
    Adam adam_small(2);
    std::vector<double> small(2), g_small(2);
    const LrSchedule sched{cfg.lr, 0.8, 0.1};
    LossTrace trace;
    const Seed seed = cfg.seed.derive(kPostStream);
    for (int step = 0; step < cfg.post_steps; ++step) {
      Rng rng(seed.derive(static_cast<std::uint64_t>(step)));
      const ScaleMixtureBatch batch = SampleScaleMixture(cfg, rng, b);
      const Eigen::RowVectorXd yh = quantized(batch);
      const Eigen::MatrixXd xh = sys.synthesis.forward(SynthesisInput(yh, batch.log_s), &cache);
      std::fill(g_syn.begin(), g_syn.end(), 0.0);
      std::fill(g_small.begin(), g_small.end(), 0.0);
      Eigen::MatrixXd up(1, b);
      CompensatedSum loss;
      for (int j = 0; j < b; ++j) {
        double r = 0.0;
        ScaleMixtureRate(sys, yh[j], batch.log_s[j], cfg.post_sigma0, &r, g_small.data(), inv_b);
        const double diff = xh(0, j) - batch.x[j];
        loss.add(r + lambda * diff * diff);
        up(0, j) = 2.0 * lambda * diff * inv_b;
      }
      sys.synthesis.backward(cache, up, g_syn);
      small = {sys.scale[0], sys.scale[1]};
      const double lr = sched.at(step, cfg.post_steps);
      adam_small.step(small, g_small, lr);
      adam_syn.step(sys.synthesis.params(), g_syn, lr);
      sys.scale[0] = small[0];
      sys.scale[1] = small[1];
      trace.add(loss.value() * inv_b);
    }
    trace.check(0.05, "lower-bound post-training");
  }

  const double eval_floor = cfg.post_steps > 0 ? cfg.post_sigma0 : sigma0;
  RunningStats rate, mse, loss;
  Rng rng(cfg.seed.derive(kEvalStream));
  double unused[2] = {0.0, 0.0};
  for (int done = 0; done < cfg.eval_samples; done += kEvalChunk) {
    const int m = std::min(kEvalChunk, cfg.eval_samples - done);
    const ScaleMixtureBatch batch = SampleScaleMixture(cfg, rng, m);
    const Eigen::RowVectorXd yh = quantized(batch);
    const Eigen::MatrixXd xh = sys.synthesis.forward(SynthesisInput(yh, batch.log_s));
    for (int j = 0; j < m; ++j) {
      double r = 0.0;
      ScaleMixtureRate(sys, yh[j], batch.log_s[j], eval_floor, &r, unused, 0.0);
      const double d = (xh(0, j) - batch.x[j]) * (xh(0, j) - batch.x[j]);
      rate.add(r);
      mse.add(d);
      loss.add(r + lambda * d);
    }
  }
  return {sigma0, ToEstimate(rate), ToEstimate(mse), ToEstimate(loss)};
}

}  // namespace quantlab
