// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

// Small dense networks with hand-written reverse mode. Samples are columns:
// an input batch is a (in_dim x batch) matrix.

#ifndef QUANTLAB_MLP_H_
#define QUANTLAB_MLP_H_

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "quantlab/numerics.h"

namespace quantlab {

enum class Activation { kIdentity, kRelu, kSoftplus };

std::string_view ActivationName(Activation a);

// Intermediate values kept by forward() for the backward pass.
struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;  // input of each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
};

// Dense network; every hidden layer uses `hidden`, the output layer is
// affine. Parameters live in one flat vector, layer by layer: the weight
// matrix (out x in, column-major) followed by the bias.
class Mlp {
 public:
  Mlp() = default;
  // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  Mlp(std::vector<int> layer_sizes, Activation hidden, Seed init_seed);

  int in_dim() const { return sizes_.front(); }
  int out_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation activation() const { return hidden_; }

  std::size_t num_params() const { return static_cast<std::size_t>(params_.size()); }
  std::span<double> params() { return {params_.data(), num_params()}; }
  std::span<const double> params() const { return {params_.data(), num_params()}; }

  // Views into the flat vector.
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);

  // Throws ShapeMismatch when x.rows() != in_dim().
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, MlpCache* cache = nullptr) const;

  // Reverse mode. Adds dLoss/dparams into grad_params (size num_params()) and,
  // when grad_input is given, writes dLoss/dx into it.
  void backward(const MlpCache& cache, const Eigen::MatrixXd& upstream,
                std::span<double> grad_params, Eigen::MatrixXd* grad_input = nullptr) const;

  // Structured-text checkpoint.
  void save(std::ostream& os) const;
  static Mlp load(std::istream& is);

 private:
  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const {
    return offsets_[layer] + static_cast<std::size_t>(sizes_[layer + 1] * sizes_[layer]);
  }

  std::vector<int> sizes_;
  Activation hidden_ = Activation::kSoftplus;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd params_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over one flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, AdamConfig cfg = {});

  void step(std::span<double> params, std::span<const double> grad, double lr);
  std::int64_t steps() const { return t_; }

  void save(std::ostream& os) const;
  static Adam load(std::istream& is);

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

// Central finite-difference check of Mlp::backward on a scalar objective
// sum(weights .* forward(x)). Returns the largest relative error over
// `probes` randomly chosen parameters and inputs.
double mlp_gradient_check(const Mlp& net, const Eigen::MatrixXd& x, int probes, Seed seed,
                          double h = 1e-4);

}  // namespace quantlab

#endif  // QUANTLAB_MLP_H_
