// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "quantlab/error.h"
#include "quantlab/mlp.h"
#include "quantlab/numerics.h"

namespace quantlab {
namespace {

Eigen::MatrixXd RandomInput(int rows, int cols, Seed seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) x(i, j) = rng.normal();
  }
  return x;
}

TEST(Mlp, SingleIdentityLayer) {
  Mlp net({1, 1}, Activation::kIdentity, {1, 0});
  net.weight(0)(0, 0) = 2.5;
  net.bias(0)(0) = 0.0;
  Eigen::MatrixXd x(1, 1);
  x(0, 0) = 3.0;
  MlpCache cache;
  EXPECT_DOUBLE_EQ(net.forward(x, &cache)(0, 0), 7.5);
  std::vector<double> grad(net.num_params(), 0.0);
  Eigen::MatrixXd up = Eigen::MatrixXd::Ones(1, 1);
  Eigen::MatrixXd gx;
  net.backward(cache, up, grad, &gx);
  EXPECT_DOUBLE_EQ(grad[0], 3.0);  // d/dw
  EXPECT_DOUBLE_EQ(grad[1], 1.0);  // d/db
  EXPECT_DOUBLE_EQ(gx(0, 0), 2.5);
}

TEST(Mlp, ZeroUpstreamGivesZeroGradients) {
  Mlp net({3, 8, 8, 2}, Activation::kSoftplus, {2, 0});
  const Eigen::MatrixXd x = RandomInput(3, 5, {2, 1});
  MlpCache cache;
  net.forward(x, &cache);
  std::vector<double> grad(net.num_params(), 0.0);
  Eigen::MatrixXd gx;
  net.backward(cache, Eigen::MatrixXd::Zero(2, 5), grad, &gx);
  for (double g : grad) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(gx.norm(), 0.0);
}

TEST(Mlp, FiniteDifferenceCheck) {
  for (Activation a : {Activation::kSoftplus, Activation::kIdentity}) {
    Mlp net({2, 16, 16, 3}, a, {3, static_cast<std::uint64_t>(a)});
    const Eigen::MatrixXd x = RandomInput(2, 7, {3, 9});
    EXPECT_LT(mlp_gradient_check(net, x, 100, {3, 10}), 1e-5) << ActivationName(a);
  }
}

TEST(Mlp, FiniteDifferenceCheckRelu) {
  // Kinks are measure-zero; random probes do not hit them.
  Mlp net({2, 16, 16, 1}, Activation::kRelu, {4, 0});
  const Eigen::MatrixXd x = RandomInput(2, 7, {4, 1});
  EXPECT_LT(mlp_gradient_check(net, x, 100, {4, 2}), 1e-5);
}

TEST(Mlp, ShapeMismatch) {
  Mlp net({2, 4, 1}, Activation::kSoftplus, {5, 0});
  try {
    net.forward(Eigen::MatrixXd::Zero(3, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(Mlp, DeterministicInitAndForward) {
  Mlp a({1, 8, 1}, Activation::kSoftplus, {6, 0});
  Mlp b({1, 8, 1}, Activation::kSoftplus, {6, 0});
  const Eigen::MatrixXd x = RandomInput(1, 10, {6, 1});
  EXPECT_EQ(a.forward(x), b.forward(x));
  Mlp c({1, 8, 1}, Activation::kSoftplus, {6, 1});
  EXPECT_NE(a.forward(x), c.forward(x));
}

TEST(Mlp, CheckpointRoundTrip) {
  Mlp net({2, 5, 1}, Activation::kRelu, {7, 0});
  std::stringstream ss;
  net.save(ss);
  const Mlp back = Mlp::load(ss);
  EXPECT_EQ(back.layer_sizes(), net.layer_sizes());
  EXPECT_EQ(back.activation(), net.activation());
  for (std::size_t i = 0; i < net.num_params(); ++i) EXPECT_EQ(back.params()[i], net.params()[i]);
}

TEST(Adam, MinimisesQuadraticAndRoundTrips) {
  std::vector<double> p{3.0, -2.0};
  Adam opt(2);
  for (int t = 0; t < 2000; ++t) {
    const std::vector<double> g{2 * (p[0] - 1.0), 2 * (p[1] + 0.5)};
    opt.step(p, g, 0.05);
  }
  EXPECT_NEAR(p[0], 1.0, 1e-3);
  EXPECT_NEAR(p[1], -0.5, 1e-3);
  std::stringstream ss;
  opt.save(ss);
  Adam back = Adam::load(ss);
  EXPECT_EQ(back.steps(), opt.steps());
  std::vector<double> p1 = p;
  std::vector<double> p2 = p;
  const std::vector<double> g{0.3, -0.1};
  opt.step(p1, g, 0.01);
  back.step(p2, g, 0.01);
  EXPECT_EQ(p1, p2);
}

}  // namespace
}  // namespace quantlab
