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

#include "lfgrec/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

namespace lfgrec {
namespace {

void CheckFinite(const BaselineModel& model, int epoch) {
  const bool finite = model.user_factors.allFinite() && model.item_factors.allFinite() &&
                      model.user_bias.allFinite() && model.item_bias.allFinite();
  if (!finite) {
    throw DivergenceError(fmt::format(
        "SGD diverged in epoch {} (non-finite parameters); lower the learning rate", epoch));
  }
}

}  // namespace

BaselineModel InitBaseline(BaselineFlavor flavor, int num_users, int num_items, double mu,
                           const SgdOptions& options) {
  if (options.k < 0) throw RangeError("negative rank");
  BaselineModel model;
  model.flavor = flavor;
  model.mu = mu;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, options.init_std);
  model.user_factors.resize(num_users, options.k);
  model.item_factors.resize(num_items, options.k);
  for (Eigen::Index i = 0; i < model.user_factors.size(); ++i) {
    model.user_factors.data()[i] = normal(rng);
  }
  for (Eigen::Index i = 0; i < model.item_factors.size(); ++i) {
    model.item_factors.data()[i] = normal(rng);
  }
  if (flavor == BaselineFlavor::kBiased) {
    model.user_bias = Vector::Zero(num_users);
    model.item_bias = Vector::Zero(num_items);
  }
  return model;
}

BaselineFit TrainBaseline(BaselineFlavor flavor, const RatingMatrix& train,
                          const SgdOptions& options) {
  if (!(options.lr > 0.0) || !(options.reg >= 0.0)) {
    throw RangeError("learning rate must be positive and regularization non-negative");
  }
  BaselineFit fit;
  fit.model = InitBaseline(flavor, train.num_users(), train.num_items(), train.Mean(), options);
  BaselineModel& model = fit.model;
  const bool biased = flavor == BaselineFlavor::kBiased;
  const auto entries = train.entries();
  const double lr = options.lr;
  const double reg = options.reg;
  const Eigen::Index k = options.k;

  // Shuffle stream is independent of the initialization stream.
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  RowVector user_old(k);
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const std::size_t p : order) {
      const RatingEntry& e = entries[p];
      auto pu = model.user_factors.row(e.user);
      auto qi = model.item_factors.row(e.item);
      double pred = model.mu + pu.dot(qi);
      if (biased) pred += model.user_bias[e.user] + model.item_bias[e.item];
      const double err = e.rating - pred;
      if (biased) {
        model.user_bias[e.user] += lr * (err - reg * model.user_bias[e.user]);
        model.item_bias[e.item] += lr * (err - reg * model.item_bias[e.item]);
      }
      user_old = pu;
      pu += lr * (err * qi - reg * pu);
      qi += lr * (err * user_old - reg * qi);
    }
    CheckFinite(model, epoch);
    fit.train_rmse.push_back(TrainingRmse(model, train));
  }
  return fit;
}

BaselineFit TrainFunkSvd(const RatingMatrix& train, const SgdOptions& options) {
  return TrainBaseline(BaselineFlavor::kPlain, train, options);
}

BaselineFit TrainBiasSvd(const RatingMatrix& train, const SgdOptions& options) {
  return TrainBaseline(BaselineFlavor::kBiased, train, options);
}

double RawScore(const BaselineModel& model, int user, int item) {
  if (user < 0 || user >= model.num_users() || item < 0 || item >= model.num_items()) {
    throw RangeError(fmt::format("prediction index ({}, {}) out of range", user, item));
  }
  double score = model.mu + model.user_factors.row(user).dot(model.item_factors.row(item));
  if (model.flavor == BaselineFlavor::kBiased) {
    score += model.user_bias[user] + model.item_bias[item];
  }
  return score;
}

double Predict(const BaselineModel& model, int user, int item) {
  return std::clamp(RawScore(model, user, item), 1.0, 5.0);
}

double PredictCold(const BaselineModel& model, int item) {
  if (item < 0 || item >= model.num_items()) {
    throw RangeError(fmt::format("item {} out of range", item));
  }
  double score = model.mu;
  if (model.flavor == BaselineFlavor::kBiased) score += model.item_bias[item];
  return std::clamp(score, 1.0, 5.0);
}

double TrainingRmse(const BaselineModel& model, const RatingMatrix& train) {
  if (train.empty()) return 0.0;
  double sum = 0.0;
  for (const RatingEntry& e : train.entries()) {
    const double d = RawScore(model, e.user, e.item) - e.rating;
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(train.size()));
}

}  // namespace lfgrec
