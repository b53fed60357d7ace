// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantlab/mlp.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>

#include "quantlab/error.h"

namespace quantlab {

namespace {

constexpr int kCheckpointVersion = 1;

// log(1 + e^x) without overflow.
double Softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void Activate(Activation a, Eigen::MatrixXd& m) {
  switch (a) {
    case Activation::kIdentity:
      return;
    case Activation::kRelu:
      m = m.cwiseMax(0.0);
      return;
    case Activation::kSoftplus:
      m = m.unaryExpr([](double v) { return Softplus(v); });
      return;
  }
}

// upstream .* act'(pre), in place on upstream.
void ActivateBackward(Activation a, const Eigen::MatrixXd& pre, Eigen::MatrixXd& upstream) {
  switch (a) {
    case Activation::kIdentity:
      return;
    case Activation::kRelu:
      upstream = upstream.cwiseProduct(
          pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
      return;
    case Activation::kSoftplus:
      upstream = upstream.cwiseProduct(pre.unaryExpr([](double v) { return Sigmoid(v); }));
      return;
  }
}

Activation ParseActivation(const std::string& s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "relu") return Activation::kRelu;
  if (s == "softplus") return Activation::kSoftplus;
  throw Error(ErrorCode::kInvalidParameter, "unknown activation '" + s + "'");
}

void Expect(std::istream& is, const std::string& token) {
  std::string got;
  is >> got;
  Require(static_cast<bool>(is) && got == token, ErrorCode::kInvalidParameter,
          "checkpoint: expected '" + token + "', got '" + got + "'");
}

}  // namespace

std::string_view ActivationName(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kSoftplus:
      return "softplus";
  }
  return "?";
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation hidden, Seed init_seed)
    : sizes_(std::move(layer_sizes)), hidden_(hidden) {
  Require(sizes_.size() >= 2, ErrorCode::kInvalidParameter, "Mlp needs at least two sizes");
  for (int s : sizes_) Require(s > 0, ErrorCode::kInvalidParameter, "Mlp layer sizes must be > 0");
  std::size_t total = 0;
  for (int l = 0; l + 1 < static_cast<int>(sizes_.size()); ++l) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
  Rng rng(init_seed);
  for (int l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    auto w = weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = bound * (2.0 * rng.uniform01() - 1.0);
    }
  }
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int l) const {
  return {params_.data() + weight_offset(l), sizes_[l + 1], sizes_[l]};
}
Eigen::Map<Eigen::MatrixXd> Mlp::weight(int l) {
  return {params_.data() + weight_offset(l), sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(int l) const {
  return {params_.data() + bias_offset(l), sizes_[l + 1]};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(int l) {
  return {params_.data() + bias_offset(l), sizes_[l + 1]};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, MlpCache* cache) const {
  Require(x.rows() == in_dim(), ErrorCode::kShapeMismatch,
          "Mlp input has " + std::to_string(x.rows()) + " rows, expected " +
              std::to_string(in_dim()));
  if (cache) {
    cache->inputs.resize(num_layers());
    cache->pre.resize(num_layers());
  }
  Eigen::MatrixXd h = x;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = weight(l) * h;
    z.colwise() += bias(l);
    if (cache) {
      cache->inputs[l] = std::move(h);
      cache->pre[l] = z;
    }
    if (l + 1 < num_layers()) Activate(hidden_, z);
    h = std::move(z);
  }
  return h;
}

void Mlp::backward(const MlpCache& cache, const Eigen::MatrixXd& upstream,
                   std::span<double> grad_params, Eigen::MatrixXd* grad_input) const {
  Require(grad_params.size() == num_params(), ErrorCode::kShapeMismatch,
          "gradient buffer has the wrong size");
  Require(static_cast<int>(cache.pre.size()) == num_layers(), ErrorCode::kShapeMismatch,
          "cache does not come from forward()");
  Require(upstream.rows() == out_dim() && upstream.cols() == cache.pre.back().cols(),
          ErrorCode::kShapeMismatch, "upstream gradient has the wrong shape");
  Eigen::MatrixXd g = upstream;
  for (int l = num_layers() - 1; l >= 0; --l) {
    if (l + 1 < num_layers()) ActivateBackward(hidden_, cache.pre[l], g);
    Eigen::Map<Eigen::MatrixXd> gw(grad_params.data() + weight_offset(l), sizes_[l + 1],
                                   sizes_[l]);
    Eigen::Map<Eigen::VectorXd> gb(grad_params.data() + bias_offset(l), sizes_[l + 1]);
    gw.noalias() += g * cache.inputs[l].transpose();
    gb += g.rowwise().sum();
    if (l > 0 || grad_input) {
      Eigen::MatrixXd next = weight(l).transpose() * g;
      g = std::move(next);
    }
  }
  if (grad_input) *grad_input = std::move(g);
}

void Mlp::save(std::ostream& os) const {
  os << "quantlab-mlp " << kCheckpointVersion << "\n";
  os << "layers " << sizes_.size();
  for (int s : sizes_) os << ' ' << s;
  os << "\nactivation " << ActivationName(hidden_) << "\n";
  os << "params " << params_.size() << "\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < params_.size(); ++i) os << params_[i] << "\n";
}

Mlp Mlp::load(std::istream& is) {
  Expect(is, "quantlab-mlp");
  int version = 0;
  is >> version;
  Require(version == kCheckpointVersion, ErrorCode::kInvalidParameter,
          "unsupported checkpoint version " + std::to_string(version));
  Expect(is, "layers");
  std::size_t n = 0;
  is >> n;
  std::vector<int> sizes(n);
  for (int& s : sizes) is >> s;
  Expect(is, "activation");
  std::string act;
  is >> act;
  Mlp net(sizes, ParseActivation(act), Seed{});
  Expect(is, "params");
  std::size_t np = 0;
  is >> np;
  Require(np == net.num_params(), ErrorCode::kInvalidParameter, "checkpoint parameter count");
  for (std::size_t i = 0; i < np; ++i) is >> net.params_[static_cast<Eigen::Index>(i)];
  Require(static_cast<bool>(is), ErrorCode::kInvalidParameter, "truncated checkpoint");
  return net;
}

Adam::Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  Require(params.size() == m_.size() && grad.size() == m_.size(), ErrorCode::kShapeMismatch,
          "Adam: parameter/gradient size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
  }
}

void Adam::save(std::ostream& os) const {
  os << "quantlab-adam " << kCheckpointVersion << "\n" << std::setprecision(17);
  os << cfg_.beta1 << ' ' << cfg_.beta2 << ' ' << cfg_.eps << ' ' << t_ << ' ' << m_.size()
     << "\n";
  for (std::size_t i = 0; i < m_.size(); ++i) os << m_[i] << ' ' << v_[i] << "\n";
}

Adam Adam::load(std::istream& is) {
  Expect(is, "quantlab-adam");
  int version = 0;
  is >> version;
  Require(version == kCheckpointVersion, ErrorCode::kInvalidParameter,
          "unsupported optimizer checkpoint version");
  AdamConfig cfg;
  std::int64_t t = 0;
  std::size_t n = 0;
  is >> cfg.beta1 >> cfg.beta2 >> cfg.eps >> t >> n;
  Adam adam(n, cfg);
  adam.t_ = t;
  for (std::size_t i = 0; i < n; ++i) is >> adam.m_[i] >> adam.v_[i];
  Require(static_cast<bool>(is), ErrorCode::kInvalidParameter, "truncated optimizer checkpoint");
  return adam;
}

double mlp_gradient_check(const Mlp& net, const Eigen::MatrixXd& x, int probes, Seed seed,
                          double h) {
  Rng rng(seed);
  Eigen::MatrixXd w(net.out_dim(), x.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.normal();
  }
  auto objective = [&](const Mlp& n, const Eigen::MatrixXd& in) {
    return n.forward(in).cwiseProduct(w).sum();
  };
  MlpCache cache;
  net.forward(x, &cache);
  std::vector<double> grad(net.num_params(), 0.0);
  Eigen::MatrixXd grad_x;
  net.backward(cache, w, grad, &grad_x);

  auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
  };
  double worst = 0.0;
  Mlp probe = net;
  Eigen::MatrixXd xp = x;
  for (int k = 0; k < probes; ++k) {
    if (k % 2 == 0) {
      const auto i = static_cast<std::size_t>(rng.next_u64() % net.num_params());
      const double orig = probe.params()[i];
      probe.params()[i] = orig + h;
      const double fp = objective(probe, x);
      probe.params()[i] = orig - h;
      const double fm = objective(probe, x);
      probe.params()[i] = orig;
      worst = std::max(worst, rel(grad[i], (fp - fm) / (2.0 * h)));
    } else {
      const auto r = static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(x.rows()));
      const auto c = static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(x.cols()));
      const double orig = xp(r, c);
      xp(r, c) = orig + h;
      const double fp = objective(net, xp);
      xp(r, c) = orig - h;
      const double fm = objective(net, xp);
      xp(r, c) = orig;
      worst = std::max(worst, rel(grad_x(r, c), (fp - fm) / (2.0 * h)));
    }
  }
  return worst;
}

}  // namespace quantlab
