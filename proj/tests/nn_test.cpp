// Copyright 2026 The lfgrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lfgrec/nn.hpp"

namespace lfgrec::nn {
namespace {

Matrix RandomBatch(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Matrix x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  return x;
}

// 0.5 * sum((out - target)^2) against a fixed random target.
OutputLoss SquaredLoss(const Matrix& target) {
  return [target](const Matrix& out, Matrix* grad) {
    const Matrix diff = out - target;
    if (grad) *grad = diff;
    return 0.5 * diff.squaredNorm();
  };
}

TEST(Forward, ZeroLinearGivesZero) {
  Linear lin{Matrix::Zero(3, 4), Matrix::Zero(1, 3)};
  Network net(4, {lin});
  net.set_mode(Mode::kInfer);
  EXPECT_EQ(net.Forward(RandomBatch(5, 4, 1)), Matrix::Zero(5, 3));
}

TEST(Forward, LeakyReluAndTanh) {
  Network leaky(2, {LeakyRelu{0.01}});
  leaky.set_mode(Mode::kInfer);
  Matrix x(1, 2);
  x << -1, 2;
  Matrix expected(1, 2);
  expected << -0.01, 2;
  EXPECT_EQ(leaky.Forward(x), expected);

  Network tanh(3, {Tanh{}});
  tanh.set_mode(Mode::kInfer);
  Matrix t(1, 3);
  t << 0, 50, -50;
  const Matrix y = tanh.Forward(t);
  EXPECT_EQ(y(0, 0), 0.0);
  EXPECT_NEAR(y(0, 1), 1.0, 1e-6);
  EXPECT_NEAR(y(0, 2), -1.0, 1e-6);
}

TEST(Forward, ShapeChecks) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(Network(4, {MakeLinear(5, 3, rng)}), ShapeError);
  Network net(4, {MakeLinear(4, 3, rng)});
  ForwardCache cache;
  EXPECT_THROW(net.Forward(Matrix::Zero(2, 5), cache), ShapeError);
  // Mode contracts.
  EXPECT_THROW(net.Forward(Matrix::Zero(2, 4)), Error);
  net.set_mode(Mode::kInfer);
  EXPECT_THROW(net.Forward(Matrix::Zero(2, 4), cache), Error);
}

TEST(BatchNorm, SingleRowInTrainModeIsAnError) {
  Network net(3, {MakeBatchNorm(3)});
  ForwardCache cache;
  EXPECT_THROW(net.Forward(RandomBatch(1, 3, 2), cache), ShapeError);
}

TEST(BatchNorm, TrainOutputIsStandardized) {
  Network net(6, {MakeBatchNorm(6)});
  const Matrix x = RandomBatch(16, 6, 3, 5.0).array() + 3.0;
  ForwardCache cache;
  const Matrix y = net.Forward(x, cache);
  const RowVector mean = y.colwise().mean();
  const RowVector var = (y.rowwise() - mean).array().square().colwise().mean();
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 1e-10 * 5.0);
  for (int j = 0; j < 6; ++j) {
    // Normalization by sqrt(var + eps) shrinks the variance slightly.
    EXPECT_NEAR(var[j], 1.0, 1e-6);
  }
  const auto& bn = std::get<BatchNorm>(net.layers()[0]);
  EXPECT_TRUE((bn.running_var.array() >= 0.0).all());
  EXPECT_NE(bn.running_mean, Matrix::Zero(1, 6));
}

TEST(Forward, InferIsPure) {
  std::mt19937_64 rng(4);
  Network net(5, {MakeLinear(5, 8, rng), LeakyRelu{}, MakeBatchNorm(8), MakeLinear(8, 2, rng),
                  Tanh{}});
  ForwardCache cache;
  net.Forward(RandomBatch(10, 5, 5), cache);  // move the running statistics
  net.set_mode(Mode::kInfer);
  const Matrix x = RandomBatch(3, 5, 6);
  const Matrix a = net.Forward(x);
  const Matrix b = net.Forward(x);
  EXPECT_EQ(a, b);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 rng(7);
  Network net(4, {MakeLinear(4, 6, rng), LeakyRelu{}, MakeBatchNorm(6), MakeLinear(6, 3, rng),
                  Tanh{}});
  ForwardCache cache;
  const Matrix out = net.Forward(RandomBatch(5, 4, 8), cache);
  std::vector<Matrix> grads;
  const Matrix gin = net.Backward(cache, Matrix::Zero(out.rows(), out.cols()), grads);
  for (const Matrix& g : grads) EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(gin.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, WithoutCacheIsAnError) {
  std::mt19937_64 rng(7);
  Network net(4, {MakeLinear(4, 2, rng)});
  std::vector<Matrix> grads;
  EXPECT_THROW(net.Backward(ForwardCache{}, Matrix::Zero(1, 2), grads), Error);
}

TEST(Backward, LinearSumLossHandDerivation) {
  std::mt19937_64 rng(9);
  Network net(3, {MakeLinear(3, 2, rng)});
  const Matrix x = RandomBatch(4, 3, 10);
  ForwardCache cache;
  const Matrix out = net.Forward(x, cache);
  std::vector<Matrix> grads;
  net.Backward(cache, Matrix::Ones(out.rows(), out.cols()), grads);
  // d(sum XW^T + b)/dW[o][i] = sum_b X[b][i] for every output o.
  const RowVector colsum = x.colwise().sum();
  for (int o = 0; o < 2; ++o) EXPECT_LT((grads[0].row(o) - colsum).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(grads[1], Matrix::Constant(1, 2, 4.0));
}

TEST(GradCheck, ThreeLayerNetBatchOfEight) {
  std::mt19937_64 rng(11);
  Network net(6, {MakeLinear(6, 10, rng), LeakyRelu{}, MakeLinear(10, 7, rng), LeakyRelu{},
                  MakeLinear(7, 3, rng)});
  const Matrix x = RandomBatch(8, 6, 12);
  GradCheckOptions options;
  options.samples = 1000;  // covers every entry
  const auto report = CheckNetworkGradients(net, x, SquaredLoss(RandomBatch(8, 3, 13)), options);
  EXPECT_TRUE(report.passed) << "max rel error " << report.max_rel_error;
  EXPECT_LT(report.max_rel_error, 1e-4);
}

TEST(GradCheck, LinearTanh) {
  std::mt19937_64 rng(14);
  Network net(5, {MakeLinear(5, 4, rng), Tanh{}});
  const auto report =
      CheckNetworkGradients(net, RandomBatch(6, 5, 15), SquaredLoss(RandomBatch(6, 4, 16)), {});
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(GradCheck, BatchNormAtLooserTolerance) {
  std::mt19937_64 rng(17);
  Network net(5, {MakeLinear(5, 8, rng), LeakyRelu{0.01}, MakeBatchNorm(8), MakeLinear(8, 3, rng),
                  Tanh{}});
  GradCheckOptions options;
  options.tolerance = 1e-3;
  options.samples = 500;
  const auto report =
      CheckNetworkGradients(net, RandomBatch(7, 5, 18), SquaredLoss(RandomBatch(7, 3, 19)), options);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(GradCheck, DetectsSignFlippedBackward) {
  std::mt19937_64 rng(20);
  Network net(4, {MakeLinear(4, 3, rng), Tanh{}});
  const Matrix x = RandomBatch(5, 4, 21);
  const auto loss = SquaredLoss(RandomBatch(5, 3, 22));
  ForwardCache cache;
  Matrix grad_out;
  loss(net.Forward(x, cache), &grad_out);
  std::vector<Matrix> grads;
  net.Backward(cache, grad_out, grads, false);
  for (Matrix& g : grads) g = -g;
  auto params = net.Parameters();
  const auto report = CheckGradients(params, grads, [&] {
    ForwardCache c;
    return loss(net.Forward(x, c), nullptr);
  }, {});
  EXPECT_FALSE(report.passed);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Matrix w = RandomBatch(3, 2, 23);
  const Matrix before = w;
  Adam adam;
  std::vector<Matrix*> params = {&w};
  std::vector<Matrix> grads = {Matrix::Zero(3, 2)};
  for (int i = 0; i < 10; ++i) adam.Step(params, grads);
  EXPECT_EQ(w, before);
}

TEST(Adam, ConstantGradientMovesOpposite) {
  Matrix w = Matrix::Zero(1, 2);
  Matrix g(1, 2);
  g << 0.3, -2.0;
  Adam adam;
  std::vector<Matrix*> params = {&w};
  for (int i = 0; i < 50; ++i) adam.Step(params, std::vector<Matrix>{g});
  EXPECT_LT(w(0, 0), 0.0);
  EXPECT_GT(w(0, 1), 0.0);
}

TEST(Adam, QuadraticBowl) {
  Matrix w(1, 2);
  w << 0.6, -0.8;  // norm 1
  AdamOptions options;
  options.lr = 1e-2;
  Adam adam(options);
  std::vector<Matrix*> params = {&w};
  for (int i = 0; i < 500; ++i) adam.Step(params, std::vector<Matrix>{2.0 * w});
  EXPECT_LT(w.norm(), 1e-3);
}

TEST(Adam, NonFiniteGradientAbortsWithoutUpdate) {
  Matrix w = Matrix::Ones(1, 2);
  Matrix g(1, 2);
  g << 1.0, std::nan("");
  Adam adam;
  std::vector<Matrix*> params = {&w};
  EXPECT_THROW(adam.Step(params, std::vector<Matrix>{g}), DivergenceError);
  EXPECT_EQ(w, Matrix::Ones(1, 2));
  EXPECT_EQ(adam.step_count(), 0);
}

}  // namespace
}  // namespace lfgrec::nn
