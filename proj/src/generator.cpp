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

#include "lfgrec/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace lfgrec {
namespace {

constexpr std::uint64_t kMaskStreamSalt = 0xd1b54a32d192ed03ULL;
constexpr std::uint64_t kValidationSalt = 0x8cb92ba72f3d8dd7ULL;
constexpr int kInferChunk = 256;

// Users with at least one rating, shuffled and cut into batches. A trailing
// single-row batch is merged into its predecessor: batch-norm needs two rows.
std::vector<std::vector<int>> MakeBatches(std::vector<int> users, int batch_size,
                                          std::mt19937_64& rng) {
  std::shuffle(users.begin(), users.end(), rng);
  std::vector<std::vector<int>> batches;
  for (std::size_t i = 0; i < users.size(); i += batch_size) {
    const std::size_t end = std::min(users.size(), i + batch_size);
    batches.emplace_back(users.begin() + i, users.begin() + end);
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

struct ModelState {
  nn::Network net;
  Matrix item_factors;
  Matrix item_bias;
};

double ValidationRmse(const LfgModel& model, const RatingMatrix& fit, const Matrix& features,
                      const RatingMatrix& held) {
  std::vector<int> users;
  for (int u = 0; u < held.num_users(); ++u) {
    if (!held.UserRow(u).empty()) users.push_back(u);
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < users.size(); i += kInferChunk) {
    const std::size_t end = std::min(users.size(), i + kInferChunk);
    std::span<const int> chunk(users.data() + i, end - i);
    Matrix feats(chunk.size(), features.cols());
    for (std::size_t r = 0; r < chunk.size(); ++r) feats.row(r) = features.row(chunk[r]);
    const Matrix pred = InferRows(model, feats, CenteredRows(fit, chunk, model.mu));
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      for (const RatingEntry& e : held.UserRow(chunk[r])) {
        const double d = pred(r, e.item) - e.rating;
        sum += d * d;
        ++count;
      }
    }
  }
  return count == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(count));
}

}  // namespace

MaskedRows MaskRows(const Matrix& rows, double p, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw RangeError(fmt::format("mask probability {} not in [0, 1]", p));
  MaskedRows out;
  out.values = rows;
  out.mask.setZero(rows.rows(), rows.cols());
  std::bernoulli_distribution drop(p);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      if (rows(r, c) == 0.0) continue;
      ++out.observed;
      if (p > 0.0 && drop(rng)) {
        out.values(r, c) = 0.0;
        out.mask(r, c) = 1;
        ++out.masked;
      }
    }
  }
  return out;
}

Matrix BuildInput(const Matrix& features, const Matrix& ratings) {
  if (features.rows() != ratings.rows()) {
    throw ShapeError(fmt::format("feature rows {} != rating rows {}", features.rows(),
                                 ratings.rows()));
  }
  Matrix input(features.rows(), features.cols() + ratings.cols());
  input << features, ratings;
  return input;
}

Matrix CenteredRows(const RatingMatrix& ratings, std::span<const int> users, double mu) {
  Matrix rows = Matrix::Zero(static_cast<Eigen::Index>(users.size()), ratings.num_items());
  for (std::size_t r = 0; r < users.size(); ++r) {
    const int u = users[r];
    if (u < 0 || u >= ratings.num_users()) throw RangeError(fmt::format("user {} out of range", u));
    for (const RatingEntry& e : ratings.UserRow(u)) rows(r, e.item) = e.rating - mu;
  }
  return rows;
}

nn::Network BuildGeneratorNetwork(int input_dim, const LfgConfig& config, std::mt19937_64& rng) {
  if (config.k <= 0) throw RangeError("latent dimension must be positive");
  std::vector<nn::Layer> layers;
  int width = input_dim;
  for (std::size_t h = 0; h < config.hidden.size(); ++h) {
    layers.emplace_back(nn::MakeLinear(width, config.hidden[h], rng));
    layers.emplace_back(nn::LeakyRelu{config.leaky_slope});
    if (h == 0) {
      layers.emplace_back(nn::MakeBatchNorm(config.hidden[h], config.bn_eps, config.bn_momentum));
    }
    width = config.hidden[h];
  }
  layers.emplace_back(nn::MakeLinear(width, config.k + 1, rng));
  layers.emplace_back(nn::Tanh{});
  return nn::Network(input_dim, std::move(layers));
}

LfgModel InitLfg(const TruncatedSvd& svd, const FeatureCodec& codec, double mu,
                 const LfgConfig& config, std::uint64_t seed,
                 std::vector<std::int64_t> item_ids) {
  if (svd.rank() != config.k) {
    throw ShapeError(fmt::format("SVD rank {} does not match k = {}", svd.rank(), config.k));
  }
  const int n = static_cast<int>(svd.vt.cols());
  if (!item_ids.empty() && static_cast<int>(item_ids.size()) != n) {
    throw ShapeError("item id list does not match the item count");
  }
  std::mt19937_64 rng(seed);
  LfgModel model;
  model.net = BuildGeneratorNetwork(codec.dim() + n, config, rng);
  model.item_factors = SplitFactors(svd).item_factors;
  model.item_bias = Matrix::Zero(1, n);
  model.mu = mu;
  model.k = config.k;
  model.mask_p = config.mask_p;
  model.codec = codec;
  model.item_ids = std::move(item_ids);
  return model;
}

GeneratedFactors SplitOutput(const Matrix& output, int k) {
  if (output.cols() != k + 1) {
    throw ShapeError(fmt::format("generator output has {} columns, expected {}", output.cols(),
                                 k + 1));
  }
  return {output.leftCols(k), output.col(k)};
}

Matrix Reconstruct(const Matrix& user_factors, const Vector& user_bias,
                   const Matrix& item_factors, const RowVector& item_bias, double mu) {
  if (user_factors.cols() != item_factors.rows() || user_bias.size() != user_factors.rows() ||
      item_bias.size() != item_factors.cols()) {
    throw ShapeError("reconstruction operands do not agree");
  }
  Matrix pred = user_factors * item_factors;
  pred.colwise() += user_bias;
  pred.rowwise() += item_bias;
  pred.array() += mu;
  return pred;
}

MaskedLoss ComputeMaskedLoss(const Matrix& pred, const Matrix& target,
                             std::span<const std::vector<int>> observed) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() ||
      static_cast<Eigen::Index>(observed.size()) != pred.rows()) {
    throw ShapeError("masked loss operands do not agree");
  }
  MaskedLoss out;
  for (const auto& row : observed) out.count += row.size();
  if (out.count == 0) throw DataError("masked loss over an empty observed set");
  out.grad = Matrix::Zero(pred.rows(), pred.cols());
  const double scale = 1.0 / static_cast<double>(out.count);
  double sum = 0.0;
  for (std::size_t r = 0; r < observed.size(); ++r) {
    for (const int c : observed[r]) {
      const double d = pred(r, c) - target(r, c);
      sum += d * d;
      out.grad(r, c) = 2.0 * d * scale;
    }
  }
  out.loss = sum * scale;
  return out;
}

std::vector<Matrix*> LfgParameters(LfgModel& model) {
  std::vector<Matrix*> params = model.net.Parameters();
  params.push_back(&model.item_factors);
  params.push_back(&model.item_bias);
  return params;
}

BatchGradients ComputeBatchGradients(LfgModel& model, const Matrix& input, const Matrix& target,
                                     std::span<const std::vector<int>> observed, double l2,
                                     std::span<const std::uint8_t> l2_items) {
  const int k = model.k;
  nn::ForwardCache cache;
  const Matrix out = model.net.Forward(input, cache);
  const GeneratedFactors gen = SplitOutput(out, k);
  const Matrix pred = Reconstruct(gen.user_factors, gen.user_bias, model.item_factors,
                                  model.item_bias, model.mu);
  const MaskedLoss loss = ComputeMaskedLoss(pred, target, observed);

  BatchGradients result;
  result.mse = loss.loss;
  result.loss = loss.loss;
  result.count = loss.count;

  Matrix grad_out(out.rows(), k + 1);
  grad_out.leftCols(k) = loss.grad * model.item_factors.transpose();
  grad_out.col(k) = loss.grad.rowwise().sum();
  model.net.Backward(cache, grad_out, result.grads, /*input_grad=*/false);

  if (l2 > 0.0) {
    const auto params = model.net.Parameters();
    const auto info = model.net.ParameterInfo();
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (info[i].kind != nn::ParamKind::kWeight) continue;
      result.loss += l2 * params[i]->squaredNorm();
      result.grads[i] += 2.0 * l2 * *params[i];
    }
  }
  Matrix grad_m = gen.user_factors.transpose() * loss.grad;
  if (l2 > 0.0) {
    if (!l2_items.empty() && static_cast<Eigen::Index>(l2_items.size()) != model.item_factors.cols()) {
      throw ShapeError("L2 item selector does not match the item count");
    }
    for (Eigen::Index j = 0; j < model.item_factors.cols(); ++j) {
      if (!l2_items.empty() && !l2_items[j]) continue;
      result.loss += l2 * model.item_factors.col(j).squaredNorm();
      grad_m.col(j) += 2.0 * l2 * model.item_factors.col(j);
    }
  }
  result.grads.push_back(std::move(grad_m));
  result.grads.push_back(loss.grad.colwise().sum());
  return result;
}

LfgTrainTrace TrainLfg(LfgModel& model, const RatingMatrix& train, const Matrix& features,
                       const LfgTrainOptions& options) {
  const int n = model.num_items();
  if (train.num_items() != n) throw ShapeError("training matrix item count differs from model");
  if (features.rows() != train.num_users() || features.cols() != model.feature_dim()) {
    throw ShapeError("feature matrix does not match the training users or the codec");
  }
  if (options.batch_size < 2) throw RangeError("batch size must be at least 2");
  if (!options.forbidden_users.empty() &&
      static_cast<int>(options.forbidden_users.size()) != train.num_users()) {
    throw ShapeError("forbidden user mask does not match the user count");
  }

  // Optional held-in validation slice for early stopping.
  RatingMatrix fit = train;
  RatingMatrix held;
  const bool early_stop = options.validation_fraction > 0.0;
  if (early_stop) {
    std::mt19937_64 vrng(options.seed ^ kValidationSalt);
    std::bernoulli_distribution pick(options.validation_fraction);
    std::vector<std::uint8_t> keep(train.size(), 1);
    for (int u = 0; u < train.num_users(); ++u) {
      const auto row = train.UserRow(u);
      if (row.size() < 2) continue;
      std::size_t held_count = 0;
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (held_count + 1 < row.size() && pick(vrng)) {
          keep[train.RowBegin(u) + j] = 0;
          ++held_count;
        }
      }
    }
    std::vector<std::uint8_t> inverse(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) inverse[i] = keep[i] ? 0 : 1;
    fit = train.Select(keep);
    held = train.Select(inverse);
  }

  std::vector<int> users;
  for (int u = 0; u < fit.num_users(); ++u) {
    if (fit.UserRow(u).empty()) continue;
    if (!options.forbidden_users.empty() && options.forbidden_users[u]) {
      throw Error(fmt::format("user {} is excluded from training but has training ratings", u));
    }
    users.push_back(u);
  }
  if (users.size() < 2) throw DataError("generator training needs at least two rated users");

  model.net.set_mode(nn::Mode::kTrain);
  std::mt19937_64 batch_rng(options.seed);
  std::mt19937_64 mask_rng(options.mask_seed.value_or(options.seed ^ kMaskStreamSalt));
  nn::Adam adam(options.adam);
  std::vector<std::uint8_t> rated_items(n, 0);
  for (const RatingEntry& e : fit.entries()) rated_items[e.item] = 1;

  LfgTrainTrace trace;
  double best_rmse = std::numeric_limits<double>::infinity();
  int since_best = 0;
  ModelState best{model.net, model.item_factors, model.item_bias};

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (const auto& batch : MakeBatches(users, options.batch_size, batch_rng)) {
      const auto b = static_cast<Eigen::Index>(batch.size());
      Matrix feats(b, features.cols());
      Matrix target = Matrix::Zero(b, n);
      std::vector<std::vector<int>> observed(batch.size());
      for (Eigen::Index r = 0; r < b; ++r) {
        feats.row(r) = features.row(batch[r]);
        for (const RatingEntry& e : fit.UserRow(batch[r])) {
          target(r, e.item) = e.rating;
          observed[r].push_back(e.item);
        }
      }
      const MaskedRows masked = MaskRows(CenteredRows(fit, batch, model.mu), model.mask_p,
                                         mask_rng);
      const BatchGradients step =
          ComputeBatchGradients(model, BuildInput(feats, masked.values), target, observed,
                                options.l2, rated_items);
      if (!std::isfinite(step.loss)) {
        throw DivergenceError(fmt::format("generator loss became non-finite in epoch {}", epoch));
      }
      loss_sum += step.mse * static_cast<double>(step.count);
      loss_count += step.count;
      adam.Step(LfgParameters(model), step.grads);
    }
    const double epoch_loss = loss_sum / static_cast<double>(loss_count);
    trace.epoch_loss.push_back(epoch_loss);
    if (!std::isfinite(epoch_loss) || !model.item_factors.allFinite()) {
      throw DivergenceError(fmt::format("generator diverged in epoch {}", epoch));
    }
    spdlog::debug("generator epoch {} loss {:.6f}", epoch, epoch_loss);

    if (early_stop && !held.empty()) {
      model.net.set_mode(nn::Mode::kInfer);
      const double rmse = ValidationRmse(model, fit, features, held);
      model.net.set_mode(nn::Mode::kTrain);
      trace.validation_rmse.push_back(rmse);
      if (rmse < best_rmse) {
        best_rmse = rmse;
        best = {model.net, model.item_factors, model.item_bias};
        trace.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= options.patience) {
        spdlog::info("generator early stop at epoch {} (best {})", epoch, trace.best_epoch);
        break;
      }
    } else {
      trace.best_epoch = epoch;
    }
  }
  if (early_stop && trace.best_epoch > 0) {
    model.net = std::move(best.net);
    model.item_factors = std::move(best.item_factors);
    model.item_bias = std::move(best.item_bias);
  }
  model.net.set_mode(nn::Mode::kInfer);
  return trace;
}

Matrix InferRows(const LfgModel& model, const Matrix& features, const Matrix& centered_history) {
  if (model.net.mode() != nn::Mode::kInfer) {
    throw Error("generator inference requires infer mode");
  }
  if (centered_history.cols() != model.num_items() || features.cols() != model.feature_dim()) {
    throw ShapeError("inference input does not match the model");
  }
  const Matrix out = model.net.Forward(BuildInput(features, centered_history));
  const GeneratedFactors gen = SplitOutput(out, model.k);
  Matrix pred = Reconstruct(gen.user_factors, gen.user_bias, model.item_factors, model.item_bias,
                            model.mu);
  return pred.cwiseMax(1.0).cwiseMin(5.0);
}

RowVector InferUser(const LfgModel& model, std::span<const HistoryItem> history,
                    const RowVector& features) {
  Matrix row = Matrix::Zero(1, model.num_items());
  std::vector<std::uint8_t> seen(model.num_items(), 0);
  for (const HistoryItem& h : history) {
    if (h.item < 0 || h.item >= model.num_items()) {
      throw RangeError(fmt::format("item index {} out of range", h.item));
    }
    if (!(h.rating >= 1.0 && h.rating <= 5.0)) {
      throw RangeError(fmt::format("rating {} not in [1, 5]", h.rating));
    }
    if (seen[h.item]) throw DataError(fmt::format("item index {} rated twice", h.item));
    seen[h.item] = 1;
    row(0, h.item) = h.rating - model.mu;
  }
  Matrix feats = features;
  return InferRows(model, feats, row).row(0);
}

RowVector InferUser(const LfgModel& model, std::span<const HistoryItem> history, double age,
                    std::string_view gender, std::string_view occupation) {
  return InferUser(model, history, model.codec.Encode(age, gender, occupation));
}

}  // namespace lfgrec
