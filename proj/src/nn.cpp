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

#include "lfgrec/nn.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace lfgrec::nn {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void CheckWidth(const Matrix& x, Eigen::Index width, const char* where) {
  if (x.cols() != width) {
    throw ShapeError(fmt::format("{}: input width {} != {}", where, x.cols(), width));
  }
}

Matrix LeakyForward(const Matrix& x, double slope) {
  return x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

}  // namespace

Linear MakeLinear(int in, int out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Linear layer;
  layer.weight.resize(out, in);
  layer.bias.resize(1, out);
  for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias.data()[i] = dist(rng);
  return layer;
}

BatchNorm MakeBatchNorm(int features, double eps, double momentum) {
  BatchNorm bn;
  bn.gamma = Matrix::Ones(1, features);
  bn.beta = Matrix::Zero(1, features);
  bn.running_mean = Matrix::Zero(1, features);
  bn.running_var = Matrix::Ones(1, features);
  bn.eps = eps;
  bn.momentum = momentum;
  return bn;
}

Network::Network(int input_dim, std::vector<Layer> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
  if (input_dim <= 0) throw ShapeError("network input dimension must be positive");
  Eigen::Index width = input_dim;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    std::visit(Overloaded{
                   [&](const Linear& lin) {
                     if (lin.weight.cols() != width || lin.bias.cols() != lin.weight.rows() ||
                         lin.bias.rows() != 1) {
                       throw ShapeError(fmt::format("layer {}: linear {}x{} after width {}", l,
                                                    lin.weight.rows(), lin.weight.cols(),
                                                    width));
                     }
                     width = lin.weight.rows();
                   },
                   [&](const BatchNorm& bn) {
                     for (const Matrix* m : {&bn.gamma, &bn.beta, &bn.running_mean,
                                             &bn.running_var}) {
                       if (m->rows() != 1 || m->cols() != width) {
                         throw ShapeError(fmt::format("layer {}: batch-norm width mismatch", l));
                       }
                     }
                     if ((bn.running_var.array() < 0.0).any()) {
                       throw ShapeError(fmt::format("layer {}: negative running variance", l));
                     }
                   },
                   [](const auto&) {},
               },
               layers_[l]);
  }
  output_dim_ = static_cast<int>(width);
}

Matrix Network::Forward(const Matrix& x) const {
  if (mode_ != Mode::kInfer) throw Error("const Forward requires infer mode");
  CheckWidth(x, input_dim_, "Forward");
  Matrix h = x;
  for (const Layer& layer : layers_) {
    h = std::visit(Overloaded{
                       [&](const Linear& lin) -> Matrix {
                         Matrix y = h * lin.weight.transpose();
                         y.rowwise() += lin.bias.row(0);
                         return y;
                       },
                       [&](const LeakyRelu& act) -> Matrix { return LeakyForward(h, act.slope); },
                       [&](const BatchNorm& bn) -> Matrix {
                         const RowVector scale =
                             bn.gamma.row(0).array() /
                             (bn.running_var.row(0).array() + bn.eps).sqrt();
                         const RowVector shift =
                             bn.beta.row(0).array() - bn.running_mean.row(0).array() * scale.array();
                         Matrix y = h.array().rowwise() * scale.array();
                         y.rowwise() += shift;
                         return y;
                       },
                       [&](const Tanh&) -> Matrix { return h.array().tanh().matrix(); },
                   },
                   layer);
  }
  return h;
}

Matrix Network::Forward(const Matrix& x, ForwardCache& cache) {
  if (mode_ != Mode::kTrain) throw Error("training Forward requires train mode");
  CheckWidth(x, input_dim_, "Forward");
  cache.layers.assign(layers_.size(), {});
  Matrix h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    ForwardCache::Entry& entry = cache.layers[l];
    entry.input = h;
    h = std::visit(
        Overloaded{
            [&](Linear& lin) -> Matrix {
              Matrix y = entry.input * lin.weight.transpose();
              y.rowwise() += lin.bias.row(0);
              return y;
            },
            [&](LeakyRelu& act) -> Matrix { return LeakyForward(entry.input, act.slope); },
            [&](BatchNorm& bn) -> Matrix {
              const Eigen::Index b = entry.input.rows();
              if (b < 2) throw ShapeError("batch-norm in train mode needs at least 2 rows");
              const RowVector mean = entry.input.colwise().mean();
              const Matrix centered = entry.input.rowwise() - mean;
              const RowVector var = centered.array().square().colwise().mean();
              entry.inv_std = (var.array() + bn.eps).rsqrt();
              entry.normalized = centered.array().rowwise() * entry.inv_std.array();
              Matrix y = entry.normalized.array().rowwise() * bn.gamma.row(0).array();
              y.rowwise() += bn.beta.row(0);
              const double unbias = static_cast<double>(b) / static_cast<double>(b - 1);
              bn.running_mean = (1.0 - bn.momentum) * bn.running_mean + bn.momentum * mean;
              bn.running_var =
                  (1.0 - bn.momentum) * bn.running_var + (bn.momentum * unbias) * var;
              return y;
            },
            [&](Tanh&) -> Matrix { return entry.input.array().tanh().matrix(); },
        },
        layers_[l]);
    entry.output = h;
  }
  return h;
}

Matrix Network::Backward(const ForwardCache& cache, const Matrix& grad_output,
                         std::vector<Matrix>& grads, bool input_grad) const {
  if (cache.layers.size() != layers_.size()) {
    throw Error("Backward called without a matching train-mode forward cache");
  }
  if (grad_output.cols() != output_dim_ ||
      grad_output.rows() != cache.layers.back().output.rows()) {
    throw ShapeError("Backward: upstream gradient shape mismatch");
  }
  const auto info = ParameterInfo();
  grads.resize(info.size());
  // Parameters are enumerated in layer order; walk them backwards.
  std::size_t slot = info.size();
  Matrix g = grad_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const ForwardCache::Entry& entry = cache.layers[l];
    const bool need_dx = input_grad || l > 0;
    std::visit(Overloaded{
                   [&](const Linear& lin) {
                     slot -= 2;
                     grads[slot] = g.transpose() * entry.input;
                     grads[slot + 1] = g.colwise().sum();
                     if (need_dx) g = g * lin.weight;
                   },
                   [&](const LeakyRelu& act) {
                     const double slope = act.slope;
                     g = g.cwiseProduct(entry.input.unaryExpr(
                         [slope](double v) { return v > 0.0 ? 1.0 : slope; }));
                   },
                   [&](const BatchNorm& bn) {
                     slot -= 2;
                     const double b = static_cast<double>(g.rows());
                     grads[slot] = g.cwiseProduct(entry.normalized).colwise().sum();
                     grads[slot + 1] = g.colwise().sum();
                     const Matrix dxhat = g.array().rowwise() * bn.gamma.row(0).array();
                     const RowVector sum_dxhat = dxhat.colwise().sum();
                     const RowVector sum_dxhat_xhat =
                         dxhat.cwiseProduct(entry.normalized).colwise().sum();
                     Matrix dx = (b * dxhat).rowwise() - sum_dxhat;
                     dx -= (entry.normalized.array().rowwise() * sum_dxhat_xhat.array()).matrix();
                     g = dx.array().rowwise() * (entry.inv_std.array() / b);
                   },
                   [&](const Tanh&) {
                     g = g.cwiseProduct(
                         (1.0 - entry.output.array().square()).matrix());
                   },
               },
               layers_[l]);
    if (!need_dx) return Matrix();
  }
  return g;
}

std::vector<Matrix*> Network::Parameters() {
  std::vector<Matrix*> params;
  for (Layer& layer : layers_) {
    std::visit(Overloaded{
                   [&](Linear& lin) {
                     params.push_back(&lin.weight);
                     params.push_back(&lin.bias);
                   },
                   [&](BatchNorm& bn) {
                     params.push_back(&bn.gamma);
                     params.push_back(&bn.beta);
                   },
                   [](auto&) {},
               },
               layer);
  }
  return params;
}

std::vector<const Matrix*> Network::Parameters() const {
  auto mutable_params = const_cast<Network*>(this)->Parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::vector<ParamInfo> Network::ParameterInfo() const {
  std::vector<ParamInfo> info;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (std::holds_alternative<Linear>(layers_[l])) {
      info.push_back({l, ParamKind::kWeight});
      info.push_back({l, ParamKind::kBias});
    } else if (std::holds_alternative<BatchNorm>(layers_[l])) {
      info.push_back({l, ParamKind::kGamma});
      info.push_back({l, ParamKind::kBeta});
    }
  }
  return info;
}

void Adam::Step(std::span<Matrix* const> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size()) throw ShapeError("Adam: params/grads count mismatch");
  if (first_moment_.empty()) {
    for (const Matrix* p : params) {
      first_moment_.push_back(Matrix::Zero(p->rows(), p->cols()));
      second_moment_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (first_moment_.size() != params.size()) throw ShapeError("Adam: parameter set changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols() ||
        first_moment_[i].rows() != grads[i].rows() || first_moment_[i].cols() != grads[i].cols()) {
      throw ShapeError(fmt::format("Adam: shape mismatch for parameter {}", i));
    }
    if (!grads[i].allFinite()) {
      throw DivergenceError(fmt::format("non-finite gradient for parameter {} at step {}", i,
                                        step_ + 1));
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(options_.beta1, t);
  const double correction2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = first_moment_[i];
    Matrix& v = second_moment_[i];
    m = options_.beta1 * m + (1.0 - options_.beta1) * grads[i];
    v = options_.beta2 * v + (1.0 - options_.beta2) * grads[i].cwiseAbs2();
    if (options_.weight_decay != 0.0) *params[i] *= 1.0 - options_.lr * options_.weight_decay;
    params[i]->array() -= options_.lr * (m.array() / correction1) /
                          ((v.array() / correction2).sqrt() + options_.eps);
  }
}

GradCheckReport CheckGradients(std::span<Matrix* const> params,
                               std::span<const Matrix> analytic,
                               const std::function<double()>& loss,
                               const GradCheckOptions& options) {
  if (params.size() != analytic.size()) throw ShapeError("grad check: count mismatch");
  std::vector<std::pair<std::size_t, Eigen::Index>> picks;
  Eigen::Index total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != analytic[i].rows() || params[i]->cols() != analytic[i].cols()) {
      throw ShapeError(fmt::format("grad check: shape mismatch for tensor {}", i));
    }
    total += params[i]->size();
  }
  if (total <= options.samples) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (Eigen::Index j = 0; j < params[i]->size(); ++j) picks.emplace_back(i, j);
    }
  } else {
    // Tensor first, then element, so small tensors (biases) are not starved.
    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> nonempty;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i]->size() > 0) nonempty.push_back(i);
    }
    std::uniform_int_distribution<std::size_t> pick_tensor(0, nonempty.size() - 1);
    for (int s = 0; s < options.samples; ++s) {
      const std::size_t i = nonempty[pick_tensor(rng)];
      std::uniform_int_distribution<Eigen::Index> pick_elem(0, params[i]->size() - 1);
      picks.emplace_back(i, pick_elem(rng));
    }
  }

  GradCheckReport report;
  for (const auto& [i, j] : picks) {
    double& value = params[i]->data()[j];
    const double saved = value;
    value = saved + options.step;
    const double plus = loss();
    value = saved - options.step;
    const double minus = loss();
    value = saved;
    GradCheckSample sample;
    sample.param = i;
    sample.index = j;
    sample.analytic = analytic[i].data()[j];
    sample.numeric = (plus - minus) / (2.0 * options.step);
    const double denom = std::max({std::abs(sample.analytic), std::abs(sample.numeric),
                                   options.denominator_floor});
    sample.rel_error = std::abs(sample.analytic - sample.numeric) / denom;
    report.max_rel_error = std::max(report.max_rel_error, sample.rel_error);
    report.samples.push_back(sample);
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

GradCheckReport CheckNetworkGradients(const Network& net, const Matrix& batch,
                                      const OutputLoss& loss,
                                      const GradCheckOptions& options) {
  Network work = net;
  work.set_mode(Mode::kTrain);
  Matrix input = batch;

  ForwardCache cache;
  const Matrix out = work.Forward(input, cache);
  Matrix grad_out;
  loss(out, &grad_out);
  std::vector<Matrix> grads;
  Matrix grad_in = work.Backward(cache, grad_out, grads);

  std::vector<Matrix*> params = work.Parameters();
  params.push_back(&input);
  grads.push_back(std::move(grad_in));
  // Batch statistics do not depend on running statistics, so repeated
  // train-mode passes are a pure function of (params, input).
  auto evaluate = [&]() {
    ForwardCache scratch;
    return loss(work.Forward(input, scratch), nullptr);
  };
  return CheckGradients(params, grads, evaluate, options);
}

}  // namespace lfgrec::nn
