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

// Cross-validation drivers and report output.
//
// Experiment 1 deals each user's ratings across the folds; every model is
// trained on four folds and scored on the fifth.
//
// Experiment 2 deals users across the folds. A fold's users are new: none of
// their ratings are trained on. Each new user's ratings are split once more;
// one part is scored and the rest is the history the generator sees at
// inference time. Baselines can only answer a new user with mu (SVD) or
// mu + b_i (BiasSVD).

#ifndef LFGREC_EVALUATION_HPP_
#define LFGREC_EVALUATION_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lfgrec/baselines.hpp"
#include "lfgrec/dataset.hpp"
#include "lfgrec/generator.hpp"
#include "lfgrec/linalg.hpp"
#include "lfgrec/model_io.hpp"

namespace lfgrec {

inline constexpr std::string_view kModelSvd = "SVD";
inline constexpr std::string_view kModelBiasSvd = "BiasSVD";
inline constexpr std::string_view kModelLfg = "LFG";

// Throws DataError on empty input, ShapeError on a length mismatch.
double Rmse(std::span<const double> truth, std::span<const double> pred);

struct ExperimentConfig {
  int folds = 5;
  std::uint64_t seed = 42;
  SgdOptions baseline;
  LfgConfig lfg;
  LfgTrainOptions lfg_train;
  SvdOptions svd;
  std::vector<std::string> models = {std::string(kModelSvd), std::string(kModelBiasSvd),
                                     std::string(kModelLfg)};
};

struct FoldRow {
  int fold = 0;  // 0-based
  std::string model;
  double rmse = 0.0;
};

struct EvalReport {
  int experiment = 1;
  std::string dataset;
  int folds = 0;
  std::vector<std::string> models;
  std::vector<FoldRow> rows;
  std::string config_json;

  // Throws Error when the pair is absent.
  double Get(int fold, std::string_view model) const;
  double Average(std::string_view model) const;
};

// Called after each (fold, model) result.
using ProgressFn = std::function<void(const FoldRow&)>;

EvalReport RunExperiment1(const Dataset& data, const ExperimentConfig& config,
                          const ProgressFn& progress = {});
EvalReport RunExperiment2(const Dataset& data, const ExperimentConfig& config,
                          const ProgressFn& progress = {});

// Trains one model on every rating of the dataset.
AnyModel TrainOnAll(const Dataset& data, std::string_view model, const ExperimentConfig& config);

// Columns experiment,dataset,fold,model,rmse; fold is 1-based, or "avg".
void WriteCsv(const EvalReport& report, std::ostream& out);
void WriteMarkdown(const EvalReport& report, std::ostream& out);
// Format chosen by extension: .csv or .md.
void WriteReport(const EvalReport& report, const std::filesystem::path& path);

struct CsvRow {
  std::string experiment;
  std::string dataset;
  std::string fold;
  std::string model;
  double rmse = 0.0;
};
std::vector<CsvRow> ReadCsv(std::istream& in);

std::string ConfigJson(const ExperimentConfig& config, std::string_view dataset);

}  // namespace lfgrec

#endif  // LFGREC_EVALUATION_HPP_
