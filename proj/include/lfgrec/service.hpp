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

// New-user recommendation serving.
//
//   GET  /health     -> {"status":"ok","model_version":"..."}
//   POST /recommend  {"ratings":[{"item":int,"rating":number}],"age":int,
//                     "gender":"M|F","occupation":string,"top_n":int}
//                 -> {"items":[{"item":int,"score":number}]}
//
// Items are native dataset ids. Malformed JSON, missing fields and unknown
// gender/occupation labels answer 400; a rating outside [1, 5] or an item
// the model does not know answers 422.

#ifndef LFGREC_SERVICE_HPP_
#define LFGREC_SERVICE_HPP_

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lfgrec/generator.hpp"

namespace lfgrec {

struct ScoredItem {
  std::int64_t item = 0;  // native id
  double score = 0.0;

  bool operator==(const ScoredItem&) const = default;
};

// Top `top_n` items by descending score, ties by ascending item index,
// skipping indices flagged in `exclude`. `item_ids` maps index -> native id
// (identity when empty).
std::vector<ScoredItem> RankItems(const RowVector& scores, std::span<const std::uint8_t> exclude,
                                  int top_n, std::span<const std::int64_t> item_ids = {});

struct RecommendRequest {
  std::vector<std::pair<std::int64_t, double>> ratings;  // native item id, rating
  double age = 0.0;
  std::string gender;
  std::string occupation;
  int top_n = 10;
};

// Immutable trained model plus lookup tables.
class ModelSnapshot {
 public:
  ModelSnapshot(LfgModel model, std::string version);

  const LfgModel& model() const { return model_; }
  const std::string& version() const { return version_; }
  std::optional<int> FindItem(std::int64_t native) const;

  // One inference pass; already-rated items are excluded from the ranking.
  // Throws RangeError (rating range, unknown item), DataError (repeated
  // item) or UnknownCategoryError.
  std::vector<ScoredItem> Recommend(const RecommendRequest& request) const;

 private:
  LfgModel model_;
  std::string version_;
  std::unordered_map<std::int64_t, int> item_index_;
};

struct HttpResponse {
  int status = 200;
  std::string body;
};

// Request handling against the current snapshot. Handlers never touch the
// model; Swap() replaces the snapshot atomically for subsequent requests.
class RecommendService {
 public:
  explicit RecommendService(std::shared_ptr<const ModelSnapshot> snapshot);

  std::shared_ptr<const ModelSnapshot> snapshot() const;
  void Swap(std::shared_ptr<const ModelSnapshot> snapshot);

  HttpResponse Health() const;
  HttpResponse Recommend(std::string_view body) const;

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const ModelSnapshot> snapshot_;
};

// Parses a /recommend body. Throws DataError on malformed input.
RecommendRequest ParseRecommendRequest(std::string_view body);
std::string FormatItems(std::span<const ScoredItem> items);

// HTTP transport over RecommendService.
class HttpServer {
 public:
  explicit HttpServer(RecommendService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws Error on failure.
  int Bind(const std::string& host, int port);
  // Blocks until Stop().
  void Run();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Hex digest identifying a model's serialized contents.
std::string ModelVersion(const LfgModel& model);

}  // namespace lfgrec

#endif  // LFGREC_SERVICE_HPP_
