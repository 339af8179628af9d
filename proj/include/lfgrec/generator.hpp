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

// Latent factor generator.
//
// A feed-forward network reads a user's demographic features next to the
// user's (randomly masked) rating row and emits k latent factors plus a bias
// for that user. Ratings are reconstructed against a trainable item-factor
// matrix M, initialized from the item side of a truncated SVD, and trainable
// item biases:
//
//   pred[u][i] = U_G[u] . M[:, i] + bu_G[u] + bi[i] + mu
//
// Training minimizes the mean squared error over observed positions only.
// A new user needs one forward pass; nothing is refit.
//
// The rating block of the network input holds centered ratings (r - mu at
// observed positions, 0 elsewhere), so a masked or unrated position reads
// as the global mean.

#ifndef LFGREC_GENERATOR_HPP_
#define LFGREC_GENERATOR_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "lfgrec/dataset.hpp"
#include "lfgrec/linalg.hpp"
#include "lfgrec/nn.hpp"
#include "lfgrec/types.hpp"

namespace lfgrec {

struct LfgConfig {
  int k = 50;
  double mask_p = 0.1;
  std::vector<int> hidden = {512, 256};
  double leaky_slope = 0.01;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
};

struct LfgTrainOptions {
  int epochs = 150;
  int batch_size = 64;
  nn::AdamOptions adam;
  // Coupled L2 penalty on linear-layer weights and on the M columns of items
  // that have training ratings (unrated items keep their initial factors).
  double l2 = 3e-3;
  std::uint64_t seed = 0;
  // Mask stream; defaults to a value derived from `seed`.
  std::optional<std::uint64_t> mask_seed;
  // Users that must never appear in a training batch (cold-start audit).
  std::vector<std::uint8_t> forbidden_users;
  // Optional early stopping: fraction of each user's training ratings held
  // out of the loss and scored after every epoch (0 disables).
  double validation_fraction = 0.0;
  int patience = 10;
};

struct LfgModel {
  nn::Network net;
  Matrix item_factors;   // k x n, M
  Matrix item_bias;      // 1 x n, bi_T
  double mu = 0.0;
  int k = 0;
  double mask_p = 0.1;
  FeatureCodec codec;
  std::vector<std::int64_t> item_ids;  // native id of each item index

  int num_items() const { return static_cast<int>(item_factors.cols()); }
  int feature_dim() const { return codec.dim(); }
};

struct MaskedRows {
  Matrix values;
  // 1 where an observed (non-zero) entry was zeroed.
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask;
  std::size_t masked = 0;
  std::size_t observed = 0;
};

// Zeroes every non-zero entry independently with probability p. Zero
// entries are untouched and draw nothing; p == 0 draws nothing at all.
MaskedRows MaskRows(const Matrix& rows, double p, std::mt19937_64& rng);

// [features | ratings], features first. Throws ShapeError on a row mismatch.
Matrix BuildInput(const Matrix& features, const Matrix& ratings);

// Dense centered rating rows for the given users (r - mu, 0 where unrated).
Matrix CenteredRows(const RatingMatrix& ratings, std::span<const int> users, double mu);

// Network layout: input -> [linear -> leaky-relu (-> batch-norm after the
// first)]* -> linear(k + 1) -> tanh.
nn::Network BuildGeneratorNetwork(int input_dim, const LfgConfig& config,
                                  std::mt19937_64& rng);

// M <- diag(sqrt S) Vt, bi_T <- 0, network freshly initialized from `seed`.
// Throws ShapeError when svd.rank() != config.k.
LfgModel InitLfg(const TruncatedSvd& svd, const FeatureCodec& codec, double mu,
                 const LfgConfig& config, std::uint64_t seed,
                 std::vector<std::int64_t> item_ids = {});

struct GeneratedFactors {
  Matrix user_factors;  // b x k, U_G
  Vector user_bias;     // b, bu_G
};

// First k columns are U_G, the last is bu_G.
GeneratedFactors SplitOutput(const Matrix& output, int k);

Matrix Reconstruct(const Matrix& user_factors, const Vector& user_bias,
                   const Matrix& item_factors, const RowVector& item_bias, double mu);

struct MaskedLoss {
  double loss = 0.0;
  Matrix grad;  // dLoss/dPred, zero off the observed set
  std::size_t count = 0;
};

// Mean squared error over observed[r] positions of each row r. Throws
// DataError when no position is observed.
MaskedLoss ComputeMaskedLoss(const Matrix& pred, const Matrix& target,
                             std::span<const std::vector<int>> observed);

// Trainable tensors: network parameters in layer order, then M, then bi_T.
std::vector<Matrix*> LfgParameters(LfgModel& model);

struct BatchGradients {
  double loss = 0.0;  // masked MSE plus the L2 penalty
  double mse = 0.0;
  std::size_t count = 0;
  std::vector<Matrix> grads;  // aligned with LfgParameters()
};

// One train-mode forward/backward pass over a batch. `input` is the full
// network input, `target`/`observed` the raw rating rows and their observed
// item indices. `l2_items` (length n, may be empty for all items) selects
// the M columns that carry the L2 penalty.
BatchGradients ComputeBatchGradients(LfgModel& model, const Matrix& input, const Matrix& target,
                                     std::span<const std::vector<int>> observed, double l2,
                                     std::span<const std::uint8_t> l2_items = {});

struct LfgTrainTrace {
  std::vector<double> epoch_loss;  // observed-weighted MSE per epoch
  std::vector<double> validation_rmse;
  int best_epoch = 0;
};

// Trains the model in place and leaves its network in infer mode. `features`
// is indexed by user. Throws DivergenceError on non-finite values and Error
// when a forbidden user reaches a batch.
LfgTrainTrace TrainLfg(LfgModel& model, const RatingMatrix& train, const Matrix& features,
                       const LfgTrainOptions& options);

// Batched inference: clamped predictions (b x n) for users described by
// their feature rows and centered history rows. Requires infer mode.
Matrix InferRows(const LfgModel& model, const Matrix& features, const Matrix& centered_history);

struct HistoryItem {
  int item = 0;  // item index
  double rating = 0.0;
};

// One forward pass for a single user. Throws RangeError for an item index
// out of range or a rating outside [1, 5], DataError for a repeated item.
RowVector InferUser(const LfgModel& model, std::span<const HistoryItem> history,
                    const RowVector& features);
// As above, encoding demographics with the model's codec
// (UnknownCategoryError for labels outside its vocabulary).
RowVector InferUser(const LfgModel& model, std::span<const HistoryItem> history, double age,
                    std::string_view gender, std::string_view occupation);

}  // namespace lfgrec

#endif  // LFGREC_GENERATOR_HPP_
