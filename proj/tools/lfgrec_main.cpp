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

// lfgrec command line: crossval, train, predict, serve.
//
// Exit codes: 0 success, 1 runtime/data error, 2 usage error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "lfgrec/evaluation.hpp"
#include "lfgrec/model_io.hpp"
#include "lfgrec/service.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lfgrec;

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
  std::string dataset = "ml100k";
  std::string data_dir;
  std::uint64_t seed = 42;
  int k = 50;
  double mask_p = 0.1;
  int epochs = 150;
  int batch_size = 64;
  double lr = 1e-3;
  double l2 = 3e-3;
  double validation_fraction = 0.0;
  int baseline_epochs = 30;
  double baseline_lr = 0.005;
  double baseline_reg = 0.05;
};

void AddCommon(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--dataset", a.dataset, "ml100k or ml1m")
      ->check(CLI::IsMember({"ml100k", "ml1m", "ml-100k", "ml-1m"}))
      ->capture_default_str();
  cmd->add_option("--data-dir", a.data_dir, "Dataset directory (default data/ml-100k or data/ml-1m)");
  cmd->add_option("--seed", a.seed, "Seed for every random stream")->capture_default_str();
  cmd->add_option("--k", a.k, "Latent dimension")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--mask-p", a.mask_p, "Input mask probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--epochs", a.epochs, "Generator epochs")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--batch-size", a.batch_size, "Generator batch size (users)")
      ->check(CLI::Range(2, 1 << 20))
      ->capture_default_str();
  cmd->add_option("--lr", a.lr, "Generator Adam learning rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--l2", a.l2, "Generator L2 penalty")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--validation-fraction", a.validation_fraction,
                  "Early-stopping slice of training ratings (0 = off)")
      ->check(CLI::Range(0.0, 0.5))
      ->capture_default_str();
  cmd->add_option("--baseline-epochs", a.baseline_epochs, "SGD epochs for SVD/BiasSVD")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--baseline-lr", a.baseline_lr, "SGD learning rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--baseline-reg", a.baseline_reg, "SGD regularization")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

ExperimentConfig MakeConfig(const CommonArgs& a, int folds) {
  ExperimentConfig c;
  c.folds = folds;
  c.seed = a.seed;
  c.baseline.k = a.k;
  c.baseline.epochs = a.baseline_epochs;
  c.baseline.lr = a.baseline_lr;
  c.baseline.reg = a.baseline_reg;
  c.lfg.k = a.k;
  c.lfg.mask_p = a.mask_p;
  c.lfg_train.epochs = a.epochs;
  c.lfg_train.batch_size = a.batch_size;
  c.lfg_train.adam.lr = a.lr;
  c.lfg_train.l2 = a.l2;
  c.lfg_train.validation_fraction = a.validation_fraction;
  return c;
}

Dataset Load(const CommonArgs& a) {
  const DatasetKind kind = ParseDatasetKind(a.dataset);
  fs::path dir = a.data_dir;
  if (dir.empty()) dir = fs::path("data") / (kind == DatasetKind::kMl100k ? "ml-100k" : "ml-1m");
  if (!fs::is_directory(dir)) throw DataError(fmt::format("data directory {} not found", dir.string()));
  return LoadDataset(kind, dir);
}

std::string CanonicalModel(std::string name) {
  for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (name == "lfg") return std::string(kModelLfg);
  if (name == "svd" || name == "funksvd") return std::string(kModelSvd);
  if (name == "biassvd") return std::string(kModelBiasSvd);
  throw RangeError(fmt::format("unknown model '{}'", name));
}

// "item=rating" pairs, native item ids.
std::vector<std::pair<std::int64_t, double>> ParsePairs(const std::vector<std::string>& raw) {
  std::vector<std::pair<std::int64_t, double>> out;
  for (const auto& s : raw) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--rate", "expected item=rating, got " + s);
    try {
      std::size_t used = 0;
      const std::int64_t item = std::stoll(s.substr(0, eq), &used);
      if (used != eq) throw std::invalid_argument("item");
      const std::string r = s.substr(eq + 1);
      const double rating = std::stod(r, &used);
      if (used != r.size()) throw std::invalid_argument("rating");
      out.emplace_back(item, rating);
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--rate", "expected item=rating, got " + s);
    }
  }
  return out;
}

std::atomic<int> g_signal{0};

void OnSignal(int sig) { g_signal.store(sig); }

int RunCrossval(const CommonArgs& a, int experiment, int folds, const std::vector<std::string>& models,
                const fs::path& out_dir, const std::string& format) {
  ExperimentConfig config = MakeConfig(a, folds);
  if (!models.empty()) {
    config.models.clear();
    for (const auto& m : models) config.models.push_back(CanonicalModel(m));
  }
  const Dataset data = Load(a);
  const EvalReport report =
      experiment == 1 ? RunExperiment1(data, config) : RunExperiment2(data, config);
  const std::string stem = fmt::format("exp{}_{}", experiment, ToString(data.kind));
  fs::create_directories(out_dir);
  if (format == "csv" || format == "both") WriteReport(report, out_dir / (stem + ".csv"));
  if (format == "md" || format == "both") WriteReport(report, out_dir / (stem + ".md"));
  for (const auto& m : report.models) {
    std::cout << fmt::format("{} average RMSE {:.4f}\n", m, report.Average(m));
  }
  std::cout << "reports written to " << (out_dir / stem).string() << ".{csv,md}\n";
  return 0;
}

int RunTrain(const CommonArgs& a, const std::string& model_name, const fs::path& output) {
  const ExperimentConfig config = MakeConfig(a, 5);
  const Dataset data = Load(a);
  const AnyModel model = TrainOnAll(data, CanonicalModel(model_name), config);
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  SaveModel(model, output);
  std::cout << "model written to " << output.string() << "\n";
  return 0;
}

int RunPredict(const fs::path& model_file, const std::vector<std::string>& rates, double age,
               const std::string& gender, const std::string& occupation, int top_n, bool as_json) {
  RecommendRequest request;
  request.ratings = ParsePairs(rates);
  request.age = age;
  request.gender = gender;
  request.occupation = occupation;
  request.top_n = top_n;
  AnyModel any = LoadModel(model_file);
  std::vector<ScoredItem> items;
  if (auto* lfg = std::get_if<LfgModel>(&any)) {
    const ModelSnapshot snapshot(std::move(*lfg), "");
    items = snapshot.Recommend(request);
  } else {
    // Baselines cannot place a new user; rank by the cold-start prediction.
    const auto& base = std::get<BaselineModel>(any);
    std::map<std::int64_t, int> index;
    for (int i = 0; i < base.num_items(); ++i) {
      index.emplace(base.item_ids.empty() ? i : base.item_ids[i], i);
    }
    std::vector<std::uint8_t> rated(base.num_items(), 0);
    for (const auto& [native, rating] : request.ratings) {
      const auto it = index.find(native);
      if (it == index.end()) throw RangeError(fmt::format("unknown item {}", native));
      if (!(rating >= 1.0 && rating <= 5.0)) throw RangeError(fmt::format("rating {} not in [1, 5]", rating));
      rated[it->second] = 1;
    }
    RowVector scores(base.num_items());
    for (int i = 0; i < base.num_items(); ++i) scores[i] = PredictCold(base, i);
    items = RankItems(scores, rated, top_n, base.item_ids);
  }
  if (as_json) {
    std::cout << FormatItems(items) << "\n";
  } else {
    for (std::size_t r = 0; r < items.size(); ++r) {
      std::cout << fmt::format("{}\t{}\t{:.6f}\n", r + 1, items[r].item, items[r].score);
    }
  }
  return 0;
}

int RunServe(const fs::path& model_file, const std::string& host, int port) {
  auto load = [&] {
    LfgModel model = LoadLfgModel(model_file);
    std::string version = ModelVersion(model);
    return std::make_shared<const ModelSnapshot>(std::move(model), std::move(version));
  };
  RecommendService service(load());
  HttpServer server(service);
  const int bound = server.Bind(host, port);
  std::cout << fmt::format("listening on {}:{} (model {})", host, bound,
                           service.snapshot()->version())
            << std::endl;

  std::signal(SIGINT, OnSignal);
  std::signal(SIGTERM, OnSignal);
#ifdef SIGHUP
  std::signal(SIGHUP, OnSignal);
#endif
  std::atomic<bool> done{false};
  std::thread watcher([&] {
    while (!done.load()) {
      const int sig = g_signal.exchange(0);
#ifdef SIGHUP
      if (sig == SIGHUP) {
        try {
          service.Swap(load());
          spdlog::info("reloaded model {}", service.snapshot()->version());
        } catch (const std::exception& e) {
          spdlog::error("reload failed, keeping current model: {}", e.what());
        }
        continue;
      }
#endif
      if (sig != 0) {
        server.Stop();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  });
  server.Run();
  done.store(true);
  watcher.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("lfgrec"));
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");

  CLI::App app{"Latent factor generator recommender"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  CommonArgs cv_args;
  int experiment = 1;
  int folds = 5;
  std::vector<std::string> models;
  std::string out_dir = "reports";
  std::string format = "both";
  auto* crossval = app.add_subcommand("crossval", "Cross-validated RMSE of SVD, BiasSVD and LFG");
  AddCommon(crossval, cv_args);
  crossval->add_option("--experiment", experiment, "1: per-user rating folds, 2: new users")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  crossval->add_option("--folds", folds, "Fold count")->check(CLI::Range(2, 100))->capture_default_str();
  crossval->add_option("--models", models, "Subset of svd,biassvd,lfg")->delimiter(',');
  crossval->add_option("--out-dir", out_dir, "Report directory")->capture_default_str();
  crossval->add_option("--format", format, "csv, md or both")
      ->check(CLI::IsMember({"csv", "md", "both"}))
      ->capture_default_str();

  CommonArgs train_args;
  std::string train_model = "lfg";
  std::string train_output;
  auto* train = app.add_subcommand("train", "Train one model on the whole dataset");
  AddCommon(train, train_args);
  train->add_option("--model", train_model, "lfg, svd (funksvd) or biassvd")
      ->check(CLI::IsMember({"lfg", "svd", "funksvd", "biassvd"}, CLI::ignore_case))
      ->capture_default_str();
  train->add_option("-o,--output", train_output, "Model file")->required();

  std::string predict_model;
  std::vector<std::string> rates;
  double age = 30;
  std::string gender = "M";
  std::string occupation = "other";
  int top_n = 10;
  bool as_json = false;
  auto* predict = app.add_subcommand("predict", "Rank unrated items for a new user");
  predict->add_option("-m,--model-file", predict_model, "Model file")->required();
  predict->add_option("--rate", rates, "item=rating (repeatable or comma separated)")
      ->delimiter(',');
  predict->add_option("--age", age, "Age in years")->capture_default_str();
  predict->add_option("--gender", gender, "M or F")->capture_default_str();
  predict->add_option("--occupation", occupation, "Occupation label")->capture_default_str();
  predict->add_option("--top-n", top_n, "Number of items")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  predict->add_flag("--json", as_json, "Emit JSON");

  std::string serve_model;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP recommendation endpoint (SIGHUP reloads the model)");
  serve->add_option("-m,--model-file", serve_model, "Generator model file")->required();
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Bind port (0 picks a free port)")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug
                    : quiet ? spdlog::level::warn
                            : spdlog::level::info);

  try {
    if (*crossval) return RunCrossval(cv_args, experiment, folds, models, out_dir, format);
    if (*train) return RunTrain(train_args, train_model, train_output);
    if (*predict) {
      if (!quiet && !verbose) spdlog::set_level(spdlog::level::warn);
      return RunPredict(predict_model, rates, age, gender, occupation, top_n, as_json);
    }
    if (*serve) return RunServe(serve_model, host, port);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
