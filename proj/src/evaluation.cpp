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

#include "lfgrec/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

namespace lfgrec {
namespace {

constexpr int kInferChunk = 256;

bool Wants(const ExperimentConfig& config, std::string_view model) {
  return std::find(config.models.begin(), config.models.end(), model) != config.models.end();
}

void ValidateConfig(const ExperimentConfig& config) {
  if (config.folds < 2) throw RangeError("at least two folds are required");
  for (const auto& m : config.models) {
    if (m != kModelSvd && m != kModelBiasSvd && m != kModelLfg) {
      throw RangeError(fmt::format("unknown model '{}'", m));
    }
  }
  if (config.models.empty()) throw RangeError("no models selected");
}

// The generator never gets to see a rating outside `train`; `forbidden`
// additionally asserts that those users have no training row at all.
LfgModel FitLfg(const Dataset& data, const RatingMatrix& train, const ExperimentConfig& config,
                std::uint64_t seed, std::vector<std::uint8_t> forbidden, int fold) {
  const double mu = train.Mean();
  const TruncatedSvd svd =
      ComputeTruncatedSvd(FillAndCenter(train, mu), config.lfg.k, seed, config.svd);
  LfgModel model = InitLfg(svd, data.features.codec, mu, config.lfg, seed, data.ids.item_ids());
  LfgTrainOptions options = config.lfg_train;
  options.seed = seed;
  if (options.mask_seed) *options.mask_seed += static_cast<std::uint64_t>(fold);
  options.forbidden_users = std::move(forbidden);
  TrainLfg(model, train, data.features.rows, options);
  return model;
}

// Scores `eval` with generator predictions computed from each user's
// `history` rows.
double ScoreLfg(const LfgModel& model, const Matrix& features, const RatingMatrix& history,
                const RatingMatrix& eval) {
  std::vector<int> users;
  for (int u = 0; u < eval.num_users(); ++u) {
    if (!eval.UserRow(u).empty()) users.push_back(u);
  }
  std::vector<double> truth;
  std::vector<double> pred;
  truth.reserve(eval.size());
  pred.reserve(eval.size());
  for (std::size_t i = 0; i < users.size(); i += kInferChunk) {
    const std::span<const int> chunk(users.data() + i, std::min(users.size() - i,
                                                                std::size_t{kInferChunk}));
    Matrix feats(static_cast<Eigen::Index>(chunk.size()), features.cols());
    for (std::size_t r = 0; r < chunk.size(); ++r) feats.row(r) = features.row(chunk[r]);
    const Matrix scores = InferRows(model, feats, CenteredRows(history, chunk, model.mu));
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      for (const RatingEntry& e : eval.UserRow(chunk[r])) {
        truth.push_back(e.rating);
        pred.push_back(scores(r, e.item));
      }
    }
  }
  return Rmse(truth, pred);
}

double ScoreBaseline(const BaselineModel& model, const RatingMatrix& eval, bool cold) {
  std::vector<double> truth;
  std::vector<double> pred;
  truth.reserve(eval.size());
  pred.reserve(eval.size());
  for (const RatingEntry& e : eval.entries()) {
    truth.push_back(e.rating);
    pred.push_back(cold ? PredictCold(model, e.item) : Predict(model, e.user, e.item));
  }
  return Rmse(truth, pred);
}

void AuditDisjoint(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b,
                   const char* what) {
  for (std::size_t p = 0; p < a.size(); ++p) {
    if (a[p] && b[p]) throw Error(fmt::format("leakage audit failed: {} overlap at {}", what, p));
  }
}

class Recorder {
 public:
  Recorder(EvalReport& report, const ProgressFn& progress) : report_(report), progress_(progress) {}

  template <typename Fn>
  void Run(int fold, std::string_view model, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    FoldRow row{fold, std::string(model), fn()};
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    spdlog::info("exp{} {} fold {} {}: rmse {:.4f} ({:.1f}s)", report_.experiment,
                 report_.dataset, fold + 1, model, row.rmse, secs);
    report_.rows.push_back(row);
    if (progress_) progress_(row);
  }

 private:
  EvalReport& report_;
  const ProgressFn& progress_;
};

EvalReport NewReport(int experiment, const Dataset& data, const ExperimentConfig& config) {
  EvalReport report;
  report.experiment = experiment;
  report.dataset = std::string(ToString(data.kind));
  report.folds = config.folds;
  for (const auto name : {kModelSvd, kModelBiasSvd, kModelLfg}) {
    if (Wants(config, name)) report.models.emplace_back(name);
  }
  report.config_json = ConfigJson(config, report.dataset);
  return report;
}

SgdOptions BaselineOptions(const ExperimentConfig& config, std::uint64_t seed) {
  SgdOptions options = config.baseline;
  options.seed = seed;
  return options;
}

std::string FormatRmse(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

double Rmse(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size()) throw ShapeError("RMSE inputs differ in length");
  if (truth.empty()) throw DataError("RMSE of an empty set");
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - pred[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(truth.size()));
}

double EvalReport::Get(int fold, std::string_view model) const {
  for (const FoldRow& row : rows) {
    if (row.fold == fold && row.model == model) return row.rmse;
  }
  throw Error(fmt::format("report has no row for fold {} model {}", fold, model));
}

double EvalReport::Average(std::string_view model) const {
  double sum = 0.0;
  int count = 0;
  for (const FoldRow& row : rows) {
    if (row.model == model) {
      sum += row.rmse;
      ++count;
    }
  }
  if (count == 0) throw Error(fmt::format("report has no rows for model {}", model));
  return sum / count;
}

EvalReport RunExperiment1(const Dataset& data, const ExperimentConfig& config,
                          const ProgressFn& progress) {
  ValidateConfig(config);
  EvalReport report = NewReport(1, data, config);
  Recorder recorder(report, progress);
  const FoldPlan plan =
      MakeFoldPlan(data.ratings, SplitMode::kPerUserRatings, config.seed, config.folds);
  for (int f = 0; f < config.folds; ++f) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(f);
    const auto train_mask = plan.TrainMask(f);
    const auto eval_mask = plan.EvalMask(f);
    AuditDisjoint(train_mask, eval_mask, "train/eval");
    const RatingMatrix train = data.ratings.Select(train_mask);
    const RatingMatrix eval = data.ratings.Select(eval_mask);

    if (Wants(config, kModelSvd)) {
      recorder.Run(f, kModelSvd, [&] {
        return ScoreBaseline(TrainFunkSvd(train, BaselineOptions(config, seed)).model, eval,
                             false);
      });
    }
    if (Wants(config, kModelBiasSvd)) {
      recorder.Run(f, kModelBiasSvd, [&] {
        return ScoreBaseline(TrainBiasSvd(train, BaselineOptions(config, seed)).model, eval,
                             false);
      });
    }
    if (Wants(config, kModelLfg)) {
      recorder.Run(f, kModelLfg, [&] {
        const LfgModel model = FitLfg(data, train, config, seed, {}, f);
        return ScoreLfg(model, data.features.rows, train, eval);
      });
    }
  }
  return report;
}

EvalReport RunExperiment2(const Dataset& data, const ExperimentConfig& config,
                          const ProgressFn& progress) {
  ValidateConfig(config);
  EvalReport report = NewReport(2, data, config);
  Recorder recorder(report, progress);
  const FoldPlan plan = MakeFoldPlan(data.ratings, SplitMode::kUserLevel, config.seed,
                                     config.folds);
  for (int f = 0; f < config.folds; ++f) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(f);
    const auto train_mask = plan.TrainMask(f);
    const auto eval_mask = plan.EvalMask(f);
    const auto history_mask = plan.HistoryMask(f);
    const auto new_users = plan.NewUsers(f);
    AuditDisjoint(train_mask, eval_mask, "train/eval");
    AuditDisjoint(train_mask, history_mask, "train/history");
    AuditDisjoint(history_mask, eval_mask, "history/eval");
    const RatingMatrix train = data.ratings.Select(train_mask);
    for (const RatingEntry& e : train.entries()) {
      if (new_users[e.user]) {
        throw Error(fmt::format("leakage audit failed: new user {} has a training rating",
                                e.user));
      }
    }
    const RatingMatrix eval = data.ratings.Select(eval_mask);
    const RatingMatrix history = data.ratings.Select(history_mask);

    if (Wants(config, kModelSvd)) {
      recorder.Run(f, kModelSvd, [&] {
        return ScoreBaseline(TrainFunkSvd(train, BaselineOptions(config, seed)).model, eval,
                             true);
      });
    }
    if (Wants(config, kModelBiasSvd)) {
      recorder.Run(f, kModelBiasSvd, [&] {
        return ScoreBaseline(TrainBiasSvd(train, BaselineOptions(config, seed)).model, eval,
                             true);
      });
    }
    if (Wants(config, kModelLfg)) {
      recorder.Run(f, kModelLfg, [&] {
        const LfgModel model = FitLfg(data, train, config, seed, new_users, f);
        return ScoreLfg(model, data.features.rows, history, eval);
      });
    }
  }
  return report;
}

AnyModel TrainOnAll(const Dataset& data, std::string_view model, const ExperimentConfig& config) {
  const std::uint64_t seed = config.seed;
  if (model == kModelSvd || model == kModelBiasSvd) {
    BaselineModel out = (model == kModelSvd ? TrainFunkSvd(data.ratings, BaselineOptions(config, seed))
                                            : TrainBiasSvd(data.ratings, BaselineOptions(config, seed)))
                            .model;
    out.item_ids = data.ids.item_ids();
    return out;
  }
  if (model == kModelLfg) return FitLfg(data, data.ratings, config, seed, {}, 0);
  throw RangeError(fmt::format("unknown model '{}'", model));
}

void WriteCsv(const EvalReport& report, std::ostream& out) {
  const std::string exp = fmt::format("exp{}", report.experiment);
  out << "experiment,dataset,fold,model,rmse\n";
  for (const FoldRow& row : report.rows) {
    out << exp << ',' << report.dataset << ',' << row.fold + 1 << ',' << row.model << ','
        << FormatRmse(row.rmse) << '\n';
  }
  for (const auto& model : report.models) {
    out << exp << ',' << report.dataset << ",avg," << model << ','
        << FormatRmse(report.Average(model)) << '\n';
  }
}

void WriteMarkdown(const EvalReport& report, std::ostream& out) {
  const bool exp2 = report.experiment == 2;
  out << fmt::format("# Experiment {}: {} ({})\n\n", report.experiment,
                     exp2 ? "new-user rating prediction" : "rating prediction", report.dataset);
  const char* column = exp2 ? "Test RMSE" : "Eval RMSE";
  out << "| Fold | Training Set | Evaluation Set";
  for (const auto& model : report.models) out << " | " << model << ' ' << column;
  out << " |\n|---|---|---";
  for (std::size_t i = 0; i < report.models.size(); ++i) out << "|---";
  out << "|\n";
  for (int f = 0; f < report.folds; ++f) {
    std::string others;
    for (int g = 0; g < report.folds; ++g) {
      if (g == f) continue;
      if (!others.empty()) others += ", ";
      others += std::to_string(g + 1);
    }
    if (exp2) {
      out << fmt::format("| {} | users of folds {} | new users of fold {}", f + 1, others, f + 1);
    } else {
      out << fmt::format("| {} | folds {} | fold {}", f + 1, others, f + 1);
    }
    for (const auto& model : report.models) out << fmt::format(" | {:.4f}", report.Get(f, model));
    out << " |\n";
  }
  out << "| Average | | ";
  for (const auto& model : report.models) out << fmt::format(" | {:.4f}", report.Average(model));
  out << " |\n\n";
  out << "Configuration:\n\n```json\n" << report.config_json << "\n```\n";
}

void WriteReport(const EvalReport& report, const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext != ".csv" && ext != ".md") {
    throw RangeError(fmt::format("report path {} must end in .csv or .md", path.string()));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  if (ext == ".csv") {
    WriteCsv(report, out);
  } else {
    WriteMarkdown(report, out);
  }
}

std::vector<CsvRow> ReadCsv(std::istream& in) {
  std::vector<CsvRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "experiment,dataset,fold,model,rmse") {
        throw ParseError("report", line_no, "unexpected CSV header");
      }
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) throw ParseError("report", line_no, "expected 5 fields");
    CsvRow row{fields[0], fields[1], fields[2], fields[3], 0.0};
    try {
      std::size_t used = 0;
      row.rmse = std::stod(fields[4], &used);
      if (used != fields[4].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError("report", line_no, "bad rmse value");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ConfigJson(const ExperimentConfig& config, std::string_view dataset) {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["folds"] = config.folds;
  j["seed"] = config.seed;
  j["models"] = config.models;
  j["baseline"] = {{"k", config.baseline.k},
                   {"lr", config.baseline.lr},
                   {"reg", config.baseline.reg},
                   {"epochs", config.baseline.epochs},
                   {"init_std", config.baseline.init_std}};
  j["svd"] = {{"oversample", config.svd.oversample},
              {"power_iterations", config.svd.power_iterations}};
  j["lfg"] = {{"k", config.lfg.k},
              {"mask_p", config.lfg.mask_p},
              {"hidden", config.lfg.hidden},
              {"leaky_slope", config.lfg.leaky_slope},
              {"bn_eps", config.lfg.bn_eps},
              {"bn_momentum", config.lfg.bn_momentum},
              {"input", "centered ratings"},
              {"epochs", config.lfg_train.epochs},
              {"batch_size", config.lfg_train.batch_size},
              {"adam_lr", config.lfg_train.adam.lr},
              {"adam_beta1", config.lfg_train.adam.beta1},
              {"adam_beta2", config.lfg_train.adam.beta2},
              {"l2", config.lfg_train.l2},
              {"validation_fraction", config.lfg_train.validation_fraction},
              {"patience", config.lfg_train.patience}};
  return j.dump(2);
}

}  // namespace lfgrec
