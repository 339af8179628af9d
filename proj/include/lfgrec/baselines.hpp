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

#ifndef LFGREC_BASELINES_HPP_
#define LFGREC_BASELINES_HPP_

#include <cstdint>
#include <vector>

#include "lfgrec/dataset.hpp"
#include "lfgrec/types.hpp"

namespace lfgrec {

enum class BaselineFlavor { kPlain, kBiased };

/**
 * Matrix-factorization baseline trained by SGD on observed ratings only.
 *
 * kPlain (FunkSVD) predicts mu + p_u . q_i; kBiased (BiasSVD) adds the user
 * and item biases. user_bias / item_bias are empty for kPlain.
 */
struct BaselineModel {
  BaselineFlavor flavor = BaselineFlavor::kPlain;
  Matrix user_factors;  // m x k
  Matrix item_factors;  // n x k (row i is item i's factor vector)
  Vector user_bias;
  Vector item_bias;
  double mu = 0.0;
  std::vector<std::int64_t> item_ids;  // optional native ids, index-aligned

  int rank() const { return static_cast<int>(user_factors.cols()); }
  int num_users() const { return static_cast<int>(user_factors.rows()); }
  int num_items() const { return static_cast<int>(item_factors.rows()); }
};

struct SgdOptions {
  int k = 50;
  double lr = 0.005;
  double reg = 0.05;
  int epochs = 30;
  double init_std = 0.1;
  std::uint64_t seed = 0;
};

struct BaselineFit {
  BaselineModel model;
  std::vector<double> train_rmse;  // per epoch, after the epoch's updates
};

BaselineModel InitBaseline(BaselineFlavor flavor, int num_users, int num_items, double mu,
                           const SgdOptions& options);

// Throws DivergenceError when any parameter becomes non-finite.
BaselineFit TrainFunkSvd(const RatingMatrix& train, const SgdOptions& options);
BaselineFit TrainBiasSvd(const RatingMatrix& train, const SgdOptions& options);
BaselineFit TrainBaseline(BaselineFlavor flavor, const RatingMatrix& train,
                          const SgdOptions& options);

// Unclamped model score.
double RawScore(const BaselineModel& model, int user, int item);
// Score clamped to [1, 5]. Throws RangeError for out-of-range indices.
double Predict(const BaselineModel& model, int user, int item);
// Prediction for a user unseen in training: mu (plain) or mu + b_i (biased).
double PredictCold(const BaselineModel& model, int item);

double TrainingRmse(const BaselineModel& model, const RatingMatrix& train);

}  // namespace lfgrec

#endif  // LFGREC_BASELINES_HPP_
