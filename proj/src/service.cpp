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

#include "lfgrec/service.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json.hpp"
#include "lfgrec/model_io.hpp"

namespace lfgrec {
namespace {

using nlohmann::json;

HttpResponse ErrorResponse(int status, std::string_view message) {
  return {status, json{{"error", message}}.dump()};
}

}  // namespace

std::vector<ScoredItem> RankItems(const RowVector& scores, std::span<const std::uint8_t> exclude,
                                  int top_n, std::span<const std::int64_t> item_ids) {
  if (top_n < 0) throw RangeError("top_n must be non-negative");
  const auto n = static_cast<int>(scores.size());
  if (!exclude.empty() && static_cast<int>(exclude.size()) != n) {
    throw ShapeError("exclusion mask does not match the item count");
  }
  if (!item_ids.empty() && static_cast<int>(item_ids.size()) != n) {
    throw ShapeError("item id list does not match the item count");
  }
  std::vector<int> order;
  order.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (exclude.empty() || !exclude[i]) order.push_back(i);
  }
  const auto cut = std::min<std::size_t>(order.size(), static_cast<std::size_t>(top_n));
  std::partial_sort(order.begin(), order.begin() + cut, order.end(), [&](int a, int b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });
  std::vector<ScoredItem> out;
  out.reserve(cut);
  for (std::size_t r = 0; r < cut; ++r) {
    const int i = order[r];
    out.push_back({item_ids.empty() ? i : item_ids[i], scores[i]});
  }
  return out;
}

ModelSnapshot::ModelSnapshot(LfgModel model, std::string version)
    : model_(std::move(model)), version_(std::move(version)) {
  if (model_.net.mode() != nn::Mode::kInfer) throw Error("snapshot requires an infer-mode model");
  for (int i = 0; i < model_.num_items(); ++i) {
    item_index_.emplace(model_.item_ids.empty() ? i : model_.item_ids[i], i);
  }
}

std::optional<int> ModelSnapshot::FindItem(std::int64_t native) const {
  const auto it = item_index_.find(native);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<ScoredItem> ModelSnapshot::Recommend(const RecommendRequest& request) const {
  std::vector<HistoryItem> history;
  history.reserve(request.ratings.size());
  std::vector<std::uint8_t> rated(model_.num_items(), 0);
  for (const auto& [native, rating] : request.ratings) {
    const auto index = FindItem(native);
    if (!index) throw RangeError(fmt::format("unknown item {}", native));
    history.push_back({*index, rating});
    rated[*index] = 1;
  }
  const RowVector scores =
      InferUser(model_, history, request.age, request.gender, request.occupation);
  return RankItems(scores, rated, request.top_n, model_.item_ids);
}

RecommendService::RecommendService(std::shared_ptr<const ModelSnapshot> snapshot)
    : snapshot_(std::move(snapshot)) {
  if (!snapshot_) throw Error("service needs a model snapshot");
}

std::shared_ptr<const ModelSnapshot> RecommendService::snapshot() const {
  std::lock_guard lock(mutex_);
  return snapshot_;
}

void RecommendService::Swap(std::shared_ptr<const ModelSnapshot> snapshot) {
  if (!snapshot) throw Error("cannot swap in an empty snapshot");
  std::lock_guard lock(mutex_);
  snapshot_.swap(snapshot);
}

HttpResponse RecommendService::Health() const {
  return {200, json{{"status", "ok"}, {"model_version", snapshot()->version()}}.dump()};
}

HttpResponse RecommendService::Recommend(std::string_view body) const {
  const auto start = std::chrono::steady_clock::now();
  HttpResponse response;
  try {
    const RecommendRequest request = ParseRecommendRequest(body);
    const auto items = snapshot()->Recommend(request);
    response = {200, FormatItems(items)};
  } catch (const UnknownCategoryError& e) {
    response = ErrorResponse(400, e.what());
  } catch (const DataError& e) {
    response = ErrorResponse(400, e.what());
  } catch (const RangeError& e) {
    response = ErrorResponse(422, e.what());
  } catch (const std::exception& e) {
    spdlog::error("recommend failed: {}", e.what());
    response = ErrorResponse(500, "internal error");
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  spdlog::info("POST /recommend {} {:.3f} ms", response.status, ms);
  return response;
}

RecommendRequest ParseRecommendRequest(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    throw DataError("request body is not valid JSON");
  }
  if (!j.is_object()) throw DataError("request body must be a JSON object");
  RecommendRequest request;
  auto require = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw DataError(fmt::format("missing field '{}'", key));
    return j.at(key);
  };
  const json& ratings = j.contains("ratings") ? j.at("ratings") : json::array();
  if (!ratings.is_array()) throw DataError("'ratings' must be an array");
  for (const json& r : ratings) {
    if (!r.is_object() || !r.contains("item") || !r.contains("rating") ||
        !r.at("item").is_number_integer() || !r.at("rating").is_number()) {
      throw DataError("each rating needs an integer 'item' and a numeric 'rating'");
    }
    request.ratings.emplace_back(r.at("item").get<std::int64_t>(), r.at("rating").get<double>());
  }
  const json& age = require("age");
  if (!age.is_number()) throw DataError("'age' must be a number");
  request.age = age.get<double>();
  const json& gender = require("gender");
  const json& occupation = require("occupation");
  if (!gender.is_string() || !occupation.is_string()) {
    throw DataError("'gender' and 'occupation' must be strings");
  }
  request.gender = gender.get<std::string>();
  request.occupation = occupation.get<std::string>();
  if (j.contains("top_n")) {
    const json& top_n = j.at("top_n");
    if (!top_n.is_number_integer() || top_n.get<std::int64_t>() < 0 ||
        top_n.get<std::int64_t>() > 1'000'000) {
      throw DataError("'top_n' must be a non-negative integer");
    }
    request.top_n = top_n.get<int>();
  }
  return request;
}

std::string FormatItems(std::span<const ScoredItem> items) {
  json list = json::array();
  for (const ScoredItem& s : items) list.push_back({{"item", s.item}, {"score", s.score}});
  return json{{"items", list}}.dump();
}

struct HttpServer::Impl {
  explicit Impl(RecommendService& s) : service(s) {}
  RecommendService& service;
  httplib::Server server;
};

HttpServer::HttpServer(RecommendService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svc = impl_->service;
  impl_->server.Get("/health", [&svc](const httplib::Request&, httplib::Response& res) {
    const HttpResponse r = svc.Health();
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  impl_->server.Post("/recommend", [&svc](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = svc.Recommend(req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  impl_->server.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
        res.status = 500;
        res.set_content(R"({"error":"internal error"})", "application/json");
      });
}

HttpServer::~HttpServer() { Stop(); }

int HttpServer::Bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw Error(fmt::format("cannot bind {}:{}", host, port));
  return bound;
}

void HttpServer::Run() { impl_->server.listen_after_bind(); }

void HttpServer::Stop() {
  if (impl_) impl_->server.stop();
}

std::string ModelVersion(const LfgModel& model) {
  return fmt::format("{:016x}", Fnv1a64(SerializeModel(model)));
}

}  // namespace lfgrec
