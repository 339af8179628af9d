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

#include "lfgrec/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace lfgrec {
namespace {

std::vector<std::string_view> Split(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

std::string_view StripCr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

template <typename T>
T ParseNumber(std::string_view field, std::string_view what, std::string_view file,
              std::size_t line_no) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ParseError(std::string(file), line_no,
                     fmt::format("bad {} field '{}'", what, field));
  }
  return value;
}

std::string_view Separator(DatasetKind kind) {
  return kind == DatasetKind::kMl100k ? std::string_view("\t") : std::string_view("::");
}

std::ifstream OpenOrThrow(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("missing file: {}", path.string()));
  return in;
}

template <typename Fn>
void ForEachLine(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in = OpenOrThrow(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = StripCr(line);
    if (view.empty()) continue;
    fn(view, line_no);
  }
}

}  // namespace

std::string_view ToString(DatasetKind kind) {
  return kind == DatasetKind::kMl100k ? "ml100k" : "ml1m";
}

DatasetKind ParseDatasetKind(std::string_view name) {
  if (name == "ml100k" || name == "ml-100k") return DatasetKind::kMl100k;
  if (name == "ml1m" || name == "ml-1m") return DatasetKind::kMl1m;
  throw Error(fmt::format("unknown dataset '{}'", name));
}

RatingTriple ParseRatingLine(std::string_view line, DatasetKind kind,
                             std::size_t line_no, std::string_view file) {
  const auto fields = Split(StripCr(line), Separator(kind));
  if (fields.size() != 4) {
    throw ParseError(std::string(file), line_no,
                     fmt::format("expected 4 fields, got {}", fields.size()));
  }
  RatingTriple t;
  t.user_id = ParseNumber<std::int64_t>(fields[0], "user", file, line_no);
  t.item_id = ParseNumber<std::int64_t>(fields[1], "item", file, line_no);
  t.rating = ParseNumber<double>(fields[2], "rating", file, line_no);
  t.timestamp = ParseNumber<std::int64_t>(fields[3], "timestamp", file, line_no);
  if (t.user_id <= 0 || t.item_id <= 0) {
    throw ParseError(std::string(file), line_no, "ids must be positive");
  }
  if (!(t.rating >= 1.0 && t.rating <= 5.0)) {
    throw ParseError(std::string(file), line_no,
                     fmt::format("rating {} outside [1,5]", t.rating));
  }
  return t;
}

RawUser ParseUserLine(std::string_view line, DatasetKind kind, std::size_t line_no,
                      std::string_view file) {
  line = StripCr(line);
  const auto fields = kind == DatasetKind::kMl100k ? Split(line, "|") : Split(line, "::");
  if (fields.size() != 5) {
    throw ParseError(std::string(file), line_no,
                     fmt::format("expected 5 fields, got {}", fields.size()));
  }
  RawUser u;
  u.user_id = ParseNumber<std::int64_t>(fields[0], "user", file, line_no);
  if (kind == DatasetKind::kMl100k) {
    // user|age|gender|occupation|zip
    u.age = ParseNumber<int>(fields[1], "age", file, line_no);
    u.gender = std::string(fields[2]);
    u.occupation = std::string(fields[3]);
  } else {
    // UserID::Gender::Age::Occupation::Zip
    u.gender = std::string(fields[1]);
    u.age = ParseNumber<int>(fields[2], "age", file, line_no);
    u.occupation = std::to_string(ParseNumber<int>(fields[3], "occupation", file, line_no));
  }
  if (u.user_id <= 0) throw ParseError(std::string(file), line_no, "ids must be positive");
  return u;
}

std::string FormatRatingLine(const RatingTriple& t, DatasetKind kind) {
  const std::string_view sep = Separator(kind);
  return fmt::format("{}{}{}{}{}{}{}", t.user_id, sep, t.item_id, sep, t.rating, sep,
                     t.timestamp);
}

RawDataset Parse100k(const std::filesystem::path& data_dir) {
  RawDataset data;
  data.kind = DatasetKind::kMl100k;
  const auto ratings_path = data_dir / "u.data";
  const auto users_path = data_dir / "u.user";
  const auto occupations_path = data_dir / "u.occupation";
  for (const auto& p : {ratings_path, users_path, occupations_path}) {
    if (!std::filesystem::exists(p)) throw DataError(fmt::format("missing file: {}", p.string()));
  }
  const std::string ratings_name = ratings_path.string();
  ForEachLine(ratings_path, [&](std::string_view line, std::size_t n) {
    data.ratings.push_back(ParseRatingLine(line, DatasetKind::kMl100k, n, ratings_name));
  });
  const std::string users_name = users_path.string();
  ForEachLine(users_path, [&](std::string_view line, std::size_t n) {
    data.users.push_back(ParseUserLine(line, DatasetKind::kMl100k, n, users_name));
  });
  ForEachLine(occupations_path, [&](std::string_view line, std::size_t) {
    data.occupations.emplace_back(line);
  });
  return data;
}

RawDataset Parse1m(const std::filesystem::path& data_dir) {
  RawDataset data;
  data.kind = DatasetKind::kMl1m;
  const auto ratings_path = data_dir / "ratings.dat";
  const auto users_path = data_dir / "users.dat";
  for (const auto& p : {ratings_path, users_path}) {
    if (!std::filesystem::exists(p)) throw DataError(fmt::format("missing file: {}", p.string()));
  }
  const std::string ratings_name = ratings_path.string();
  ForEachLine(ratings_path, [&](std::string_view line, std::size_t n) {
    data.ratings.push_back(ParseRatingLine(line, DatasetKind::kMl1m, n, ratings_name));
  });
  const std::string users_name = users_path.string();
  std::set<int> codes;
  ForEachLine(users_path, [&](std::string_view line, std::size_t n) {
    data.users.push_back(ParseUserLine(line, DatasetKind::kMl1m, n, users_name));
    codes.insert(std::stoi(data.users.back().occupation));
  });
  for (int code : codes) data.occupations.push_back(std::to_string(code));
  return data;
}

RawDataset ParseDataset(DatasetKind kind, const std::filesystem::path& data_dir) {
  return kind == DatasetKind::kMl100k ? Parse100k(data_dir) : Parse1m(data_dir);
}

FeatureCodec::FeatureCodec(double age_min, double age_max, std::vector<std::string> genders,
                           std::vector<std::string> occupations)
    : age_min_(age_min),
      age_max_(age_max),
      genders_(std::move(genders)),
      occupations_(std::move(occupations)) {
  if (age_max_ < age_min_) throw DataError("age_max < age_min");
}

FeatureCodec FeatureCodec::Fit(const RawDataset& data) {
  if (data.users.empty()) throw DataError("no user records");
  if (data.occupations.empty()) throw DataError("empty occupation vocabulary");
  int lo = data.users.front().age;
  int hi = lo;
  for (const RawUser& u : data.users) {
    lo = std::min(lo, u.age);
    hi = std::max(hi, u.age);
  }
  return FeatureCodec(lo, hi, {"M", "F"}, data.occupations);
}

RowVector FeatureCodec::Encode(double age, std::string_view gender,
                               std::string_view occupation) const {
  RowVector row = RowVector::Zero(dim());
  const double span = age_max_ - age_min_;
  row[0] = span > 0.0 ? std::clamp((age - age_min_) / span, 0.0, 1.0) : 0.0;
  const auto g = std::find(genders_.begin(), genders_.end(), gender);
  if (g == genders_.end()) {
    throw UnknownCategoryError(fmt::format("unknown gender '{}'", gender));
  }
  row[1 + (g - genders_.begin())] = 1.0;
  const auto o = std::find(occupations_.begin(), occupations_.end(), occupation);
  if (o == occupations_.end()) {
    throw UnknownCategoryError(fmt::format("unknown occupation '{}'", occupation));
  }
  row[1 + static_cast<Eigen::Index>(genders_.size()) + (o - occupations_.begin())] = 1.0;
  return row;
}

IdRemap IdRemap::FromTriples(std::span<const RatingTriple> triples) {
  IdRemap remap;
  for (const RatingTriple& t : triples) {
    remap.user_ids_.push_back(t.user_id);
    remap.item_ids_.push_back(t.item_id);
  }
  for (auto* ids : {&remap.user_ids_, &remap.item_ids_}) {
    std::sort(ids->begin(), ids->end());
    ids->erase(std::unique(ids->begin(), ids->end()), ids->end());
  }
  for (std::size_t i = 0; i < remap.user_ids_.size(); ++i) {
    remap.user_index_.emplace(remap.user_ids_[i], static_cast<int>(i));
  }
  for (std::size_t i = 0; i < remap.item_ids_.size(); ++i) {
    remap.item_index_.emplace(remap.item_ids_[i], static_cast<int>(i));
  }
  return remap;
}

std::optional<int> IdRemap::FindUser(std::int64_t native) const {
  const auto it = user_index_.find(native);
  if (it == user_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> IdRemap::FindItem(std::int64_t native) const {
  const auto it = item_index_.find(native);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

RatingMatrix::RatingMatrix(int num_users, int num_items, std::vector<RatingEntry> entries)
    : num_users_(num_users), num_items_(num_items), entries_(std::move(entries)) {
  if (num_users < 0 || num_items < 0) throw RangeError("negative matrix shape");
  for (const RatingEntry& e : entries_) {
    if (e.user < 0 || e.user >= num_users_ || e.item < 0 || e.item >= num_items_) {
      throw RangeError(fmt::format("entry ({}, {}) outside {}x{}", e.user, e.item,
                                   num_users_, num_items_));
    }
  }
  std::sort(entries_.begin(), entries_.end(), [](const RatingEntry& a, const RatingEntry& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  for (std::size_t p = 1; p < entries_.size(); ++p) {
    if (entries_[p].user == entries_[p - 1].user && entries_[p].item == entries_[p - 1].item) {
      throw DataError(fmt::format("duplicate rating for (user {}, item {})", entries_[p].user,
                                  entries_[p].item));
    }
  }
  row_offsets_.assign(static_cast<std::size_t>(num_users_) + 1, 0);
  for (const RatingEntry& e : entries_) ++row_offsets_[e.user + 1];
  std::partial_sum(row_offsets_.begin(), row_offsets_.end(), row_offsets_.begin());
}

std::span<const RatingEntry> RatingMatrix::UserRow(int user) const {
  if (user < 0 || user >= num_users_) throw RangeError(fmt::format("user {} out of range", user));
  return std::span<const RatingEntry>(entries_).subspan(
      row_offsets_[user], row_offsets_[user + 1] - row_offsets_[user]);
}

std::optional<double> RatingMatrix::Find(int user, int item) const {
  const auto row = UserRow(user);
  const auto it = std::lower_bound(row.begin(), row.end(), item,
                                   [](const RatingEntry& e, int i) { return e.item < i; });
  if (it == row.end() || it->item != item) return std::nullopt;
  return it->rating;
}

double RatingMatrix::Mean() const {
  if (entries_.empty()) throw DataError("mean of an empty rating matrix");
  double sum = 0.0;
  for (const RatingEntry& e : entries_) sum += e.rating;
  return sum / static_cast<double>(entries_.size());
}

RatingMatrix RatingMatrix::Select(std::span<const std::uint8_t> keep) const {
  if (keep.size() != entries_.size()) throw ShapeError("selection mask length != |T|");
  std::vector<RatingEntry> kept;
  for (std::size_t p = 0; p < entries_.size(); ++p) {
    if (keep[p]) kept.push_back(entries_[p]);
  }
  return RatingMatrix(num_users_, num_items_, std::move(kept));
}

RatingMatrix BuildMatrix(std::span<const RatingTriple> triples, const IdRemap& ids) {
  if (triples.empty()) throw DataError("cannot build a rating matrix from zero ratings");
  std::vector<RatingEntry> entries;
  entries.reserve(triples.size());
  for (const RatingTriple& t : triples) {
    const auto u = ids.FindUser(t.user_id);
    const auto i = ids.FindItem(t.item_id);
    if (!u || !i) throw DataError(fmt::format("unmapped id in ({}, {})", t.user_id, t.item_id));
    entries.push_back({*u, *i, t.rating});
  }
  return RatingMatrix(ids.num_users(), ids.num_items(), std::move(entries));
}

UserFeatures EncodeFeatures(const RawDataset& data, const IdRemap& ids) {
  UserFeatures features;
  features.codec = FeatureCodec::Fit(data);
  features.rows = Matrix::Zero(ids.num_users(), features.codec.dim());
  std::vector<std::uint8_t> seen(ids.num_users(), 0);
  for (const RawUser& u : data.users) {
    const auto index = ids.FindUser(u.user_id);
    if (!index) continue;  // demographics of a user without ratings
    features.rows.row(*index) = features.codec.Encode(u.age, u.gender, u.occupation);
    seen[*index] = 1;
  }
  for (int u = 0; u < ids.num_users(); ++u) {
    if (!seen[u]) {
      throw DataError(fmt::format("no demographics for user {}", ids.user_ids()[u]));
    }
  }
  return features;
}

Dataset MakeDataset(std::string name, const RawDataset& raw) {
  Dataset ds;
  ds.name = std::move(name);
  ds.kind = raw.kind;
  ds.ids = IdRemap::FromTriples(raw.ratings);
  ds.ratings = BuildMatrix(raw.ratings, ds.ids);
  ds.features = EncodeFeatures(raw, ds.ids);
  return ds;
}

Dataset LoadDataset(DatasetKind kind, const std::filesystem::path& data_dir) {
  return MakeDataset(std::string(ToString(kind)), ParseDataset(kind, data_dir));
}

namespace {

// Shuffles one user's positions and deals them round-robin into `parts`,
// starting at a random part so the remainders spread across folds.
void DealUserPositions(const RatingMatrix& matrix, int user, int parts, std::mt19937_64& rng,
                       std::vector<int>& position_part) {
  const std::size_t begin = matrix.RowBegin(user);
  const std::size_t count = matrix.UserRow(user).size();
  std::vector<std::size_t> positions(count);
  std::iota(positions.begin(), positions.end(), begin);
  std::shuffle(positions.begin(), positions.end(), rng);
  const int offset = std::uniform_int_distribution<int>(0, parts - 1)(rng);
  for (std::size_t t = 0; t < count; ++t) {
    position_part[positions[t]] = static_cast<int>((t + offset) % parts);
  }
}

}  // namespace

FoldPlan MakeFoldPlan(const RatingMatrix& matrix, SplitMode mode, std::uint64_t seed,
                      int fold_count) {
  if (fold_count < 2) throw Error("fold_count must be at least 2");
  FoldPlan plan;
  plan.mode = mode;
  plan.fold_count = fold_count;
  plan.seed = seed;
  plan.position_part.assign(matrix.size(), -1);
  plan.position_user.resize(matrix.size());
  for (std::size_t p = 0; p < matrix.size(); ++p) plan.position_user[p] = matrix.entries()[p].user;

  std::mt19937_64 rng(seed);
  if (mode == SplitMode::kUserLevel) {
    std::vector<int> order(matrix.num_users());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    plan.user_fold.assign(matrix.num_users(), 0);
    for (std::size_t t = 0; t < order.size(); ++t) {
      plan.user_fold[order[t]] = static_cast<int>(t % fold_count);
    }
  }
  int sparse_users = 0;
  for (int u = 0; u < matrix.num_users(); ++u) {
    const std::size_t count = matrix.UserRow(u).size();
    if (count > 0 && count < static_cast<std::size_t>(fold_count)) ++sparse_users;
    DealUserPositions(matrix, u, fold_count, rng, plan.position_part);
  }
  if (sparse_users > 0) {
    spdlog::warn("{} users have fewer than {} ratings; some folds hold none of theirs",
                 sparse_users, fold_count);
  }
  return plan;
}

std::vector<std::uint8_t> FoldPlan::TrainMask(int fold) const {
  std::vector<std::uint8_t> mask(position_part.size());
  for (std::size_t p = 0; p < mask.size(); ++p) {
    mask[p] = mode == SplitMode::kPerUserRatings ? position_part[p] != fold
                                                 : user_fold[position_user[p]] != fold;
  }
  return mask;
}

std::vector<std::uint8_t> FoldPlan::EvalMask(int fold) const {
  std::vector<std::uint8_t> mask(position_part.size());
  for (std::size_t p = 0; p < mask.size(); ++p) {
    mask[p] = mode == SplitMode::kPerUserRatings
                  ? position_part[p] == fold
                  : user_fold[position_user[p]] == fold && position_part[p] == 0;
  }
  return mask;
}

std::vector<std::uint8_t> FoldPlan::HistoryMask(int fold) const {
  std::vector<std::uint8_t> mask(position_part.size(), 0);
  if (mode != SplitMode::kUserLevel) return mask;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    mask[p] = user_fold[position_user[p]] == fold && position_part[p] != 0;
  }
  return mask;
}

std::vector<std::uint8_t> FoldPlan::NewUsers(int fold) const {
  std::vector<std::uint8_t> mask(user_fold.size(), 0);
  for (std::size_t u = 0; u < user_fold.size(); ++u) mask[u] = user_fold[u] == fold;
  return mask;
}

}  // namespace lfgrec
