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

// Small feed-forward network kernel: linear, leaky-ReLU, batch-norm and tanh
// layers with explicit forward/backward passes, an Adam optimizer and a
// central-difference gradient checker. Everything is double precision.

#ifndef LFGREC_NN_HPP_
#define LFGREC_NN_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "lfgrec/types.hpp"

namespace lfgrec::nn {

enum class Mode { kTrain, kInfer };

struct Linear {
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out
};

struct LeakyRelu {
  double slope = 0.01;
};

struct BatchNorm {
  Matrix gamma;  // 1 x features
  Matrix beta;
  Matrix running_mean;
  Matrix running_var;
  double eps = 1e-5;
  double momentum = 0.1;
};

struct Tanh {};

using Layer = std::variant<Linear, LeakyRelu, BatchNorm, Tanh>;

// Weights and bias ~ U(-1/sqrt(in), 1/sqrt(in)).
Linear MakeLinear(int in, int out, std::mt19937_64& rng);
BatchNorm MakeBatchNorm(int features, double eps = 1e-5, double momentum = 0.1);

// Activations retained by a train-mode forward pass.
struct ForwardCache {
  struct Entry {
    Matrix input;
    Matrix output;
    Matrix normalized;  // batch-norm only
    RowVector inv_std;  // batch-norm only
  };
  std::vector<Entry> layers;
};

enum class ParamKind { kWeight, kBias, kGamma, kBeta };

struct ParamInfo {
  std::size_t layer = 0;
  ParamKind kind = ParamKind::kWeight;
};

class Network {
 public:
  Network() = default;
  // Throws ShapeError when the layer dimensions do not chain from input_dim.
  Network(int input_dim, std::vector<Layer> layers);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }
  const std::vector<Layer>& layers() const { return layers_; }

  // Inference pass using running batch-norm statistics. Pure; requires
  // infer mode.
  Matrix Forward(const Matrix& x) const;
  // Training pass using batch statistics; updates running statistics and
  // fills `cache`. Requires train mode and, with batch-norm, >= 2 rows.
  Matrix Forward(const Matrix& x, ForwardCache& cache);
  // Gradients of a scalar loss given dL/d(output). `grads` is resized to
  // match Parameters(); the return value is dL/d(input), or an empty
  // matrix when `input_grad` is false.
  Matrix Backward(const ForwardCache& cache, const Matrix& grad_output,
                  std::vector<Matrix>& grads, bool input_grad = true) const;

  // Trainable tensors in layer order (linear: weight, bias; batch-norm:
  // gamma, beta).
  std::vector<Matrix*> Parameters();
  std::vector<const Matrix*> Parameters() const;
  std::vector<ParamInfo> ParameterInfo() const;

 private:
  int input_dim_ = 0;
  int output_dim_ = 0;
  Mode mode_ = Mode::kTrain;
  std::vector<Layer> layers_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  // Throws DivergenceError on a non-finite gradient (parameters untouched)
  // and ShapeError when shapes disagree with the first call.
  void Step(std::span<Matrix* const> params, std::span<const Matrix> grads);

  std::int64_t step_count() const { return step_; }
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  std::int64_t step_ = 0;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  int samples = 200;
  std::uint64_t seed = 0;
  // |a - n| / max(|a|, |n|, floor)
  double denominator_floor = 1e-6;
};

struct GradCheckSample {
  std::size_t param = 0;
  Eigen::Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckSample> samples;
  double max_rel_error = 0.0;
  bool passed = false;
};

// Compares `analytic` against central differences of `loss`, which must
// recompute the scalar loss from the current contents of `params`. Sampled
// entries are restored after perturbation.
GradCheckReport CheckGradients(std::span<Matrix* const> params,
                               std::span<const Matrix> analytic,
                               const std::function<double()>& loss,
                               const GradCheckOptions& options);

// Scalar loss of a network output; writes dL/d(output) when `grad` is set.
using OutputLoss = std::function<double(const Matrix& output, Matrix* grad)>;

// Gradient check of a train-mode network on one batch. The batch itself is
// appended as the last checked tensor, so input gradients are covered too.
GradCheckReport CheckNetworkGradients(const Network& net, const Matrix& batch,
                                      const OutputLoss& loss,
                                      const GradCheckOptions& options);

}  // namespace lfgrec::nn

#endif  // LFGREC_NN_HPP_
