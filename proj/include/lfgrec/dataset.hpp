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

// MovieLens ingestion: file parsers, demographic feature encoding, the sparse
// rating matrix and the cross-validation fold plans.

#ifndef LFGREC_DATASET_HPP_
#define LFGREC_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lfgrec/types.hpp"

namespace lfgrec {

enum class DatasetKind { kMl100k, kMl1m };

std::string_view ToString(DatasetKind kind);
// Accepts "ml100k" / "ml1m" (also "ml-100k" / "ml-1m").
DatasetKind ParseDatasetKind(std::string_view name);

struct RatingTriple {
  std::int64_t user_id = 0;
  std::int64_t item_id = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  bool operator==(const RatingTriple&) const = default;
};

struct RawUser {
  std::int64_t user_id = 0;
  int age = 0;  // years for ml100k, bucket code for ml1m
  std::string gender;
  std::string occupation;  // label for ml100k, integer code for ml1m
};

struct RawDataset {
  DatasetKind kind = DatasetKind::kMl100k;
  std::vector<RatingTriple> ratings;
  std::vector<RawUser> users;
  // Occupation vocabulary in file order (ml100k) or ascending code (ml1m).
  std::vector<std::string> occupations;
};

// Single-line parsers. `line_no` is 1-based and only used for diagnostics.
RatingTriple ParseRatingLine(std::string_view line, DatasetKind kind,
                             std::size_t line_no, std::string_view file = "");
RawUser ParseUserLine(std::string_view line, DatasetKind kind,
                      std::size_t line_no, std::string_view file = "");
// Inverse of ParseRatingLine for the given layout.
std::string FormatRatingLine(const RatingTriple& t, DatasetKind kind);

// Reads u.data, u.user and u.occupation.
RawDataset Parse100k(const std::filesystem::path& data_dir);
// Reads ratings.dat and users.dat.
RawDataset Parse1m(const std::filesystem::path& data_dir);
RawDataset ParseDataset(DatasetKind kind, const std::filesystem::path& data_dir);

// Encoding of one user's demographics: [age, gender one-hot, occupation
// one-hot]. Age is min-max scaled with the bounds seen at fit time so that
// users encoded later land on the same scale.
class FeatureCodec {
 public:
  FeatureCodec() = default;
  FeatureCodec(double age_min, double age_max, std::vector<std::string> genders,
               std::vector<std::string> occupations);

  static FeatureCodec Fit(const RawDataset& data);

  int dim() const { return 1 + static_cast<int>(genders_.size() + occupations_.size()); }
  double age_min() const { return age_min_; }
  double age_max() const { return age_max_; }
  const std::vector<std::string>& genders() const { return genders_; }
  const std::vector<std::string>& occupations() const { return occupations_; }

  // Throws UnknownCategoryError for a gender or occupation outside the
  // vocabulary. Ages outside the fitted range are clamped into [0, 1].
  RowVector Encode(double age, std::string_view gender,
                   std::string_view occupation) const;

  bool operator==(const FeatureCodec&) const = default;

 private:
  double age_min_ = 0.0;
  double age_max_ = 0.0;
  std::vector<std::string> genders_;
  std::vector<std::string> occupations_;
};

// Dense 0-based remapping of dataset-native ids (ascending native order).
class IdRemap {
 public:
  static IdRemap FromTriples(std::span<const RatingTriple> triples);

  int num_users() const { return static_cast<int>(user_ids_.size()); }
  int num_items() const { return static_cast<int>(item_ids_.size()); }
  std::optional<int> FindUser(std::int64_t native) const;
  std::optional<int> FindItem(std::int64_t native) const;
  const std::vector<std::int64_t>& user_ids() const { return user_ids_; }
  const std::vector<std::int64_t>& item_ids() const { return item_ids_; }

 private:
  std::vector<std::int64_t> user_ids_;
  std::vector<std::int64_t> item_ids_;
  std::unordered_map<std::int64_t, int> user_index_;
  std::unordered_map<std::int64_t, int> item_index_;
};

struct RatingEntry {
  int user = 0;
  int item = 0;
  double rating = 0.0;
};

// Sparse m x n rating matrix. Entries are kept sorted by (user, item); the
// index of an entry in entries() identifies an observed position.
class RatingMatrix {
 public:
  RatingMatrix() = default;
  // Throws DataError on duplicate positions, RangeError on out-of-range
  // indices.
  RatingMatrix(int num_users, int num_items, std::vector<RatingEntry> entries);

  int num_users() const { return num_users_; }
  int num_items() const { return num_items_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::span<const RatingEntry> entries() const { return entries_; }
  std::span<const RatingEntry> UserRow(int user) const;
  std::size_t RowBegin(int user) const { return row_offsets_[user]; }
  std::optional<double> Find(int user, int item) const;

  double Mean() const;
  // Keeps the entries whose parallel flag is non-zero; shape is preserved.
  RatingMatrix Select(std::span<const std::uint8_t> keep) const;

 private:
  int num_users_ = 0;
  int num_items_ = 0;
  std::vector<RatingEntry> entries_;
  std::vector<std::size_t> row_offsets_{0};
};

// Throws DataError for an empty triple list or a duplicate (user, item) pair.
RatingMatrix BuildMatrix(std::span<const RatingTriple> triples, const IdRemap& ids);

struct UserFeatures {
  FeatureCodec codec;
  Matrix rows;  // num_users x codec.dim(), row u belongs to user index u
};

UserFeatures EncodeFeatures(const RawDataset& data, const IdRemap& ids);

// Everything a cross-validation run needs, indexed consistently.
struct Dataset {
  std::string name;
  DatasetKind kind = DatasetKind::kMl100k;
  IdRemap ids;
  RatingMatrix ratings;
  UserFeatures features;
};

Dataset LoadDataset(DatasetKind kind, const std::filesystem::path& data_dir);
Dataset MakeDataset(std::string name, const RawDataset& raw);

enum class SplitMode {
  kPerUserRatings,  // every user's ratings dealt across the folds
  kUserLevel,       // users dealt across the folds; a fold's users are new
};

// Assignment of observed positions (and, for kUserLevel, users) to folds.
//
// kPerUserRatings: position_part[p] is the fold that evaluates position p.
// kUserLevel: user_fold[u] is the fold in which user u is a new user;
// position_part[p] is the position's part within its user's own deal, with
// part 0 scored and the remaining parts forming the inference history.
struct FoldPlan {
  SplitMode mode = SplitMode::kPerUserRatings;
  int fold_count = 5;
  std::uint64_t seed = 0;
  std::vector<int> position_part;
  std::vector<int> position_user;
  std::vector<int> user_fold;

  std::vector<std::uint8_t> TrainMask(int fold) const;
  std::vector<std::uint8_t> EvalMask(int fold) const;
  // Inference-time history of new users (kUserLevel only; all zero otherwise).
  std::vector<std::uint8_t> HistoryMask(int fold) const;
  std::vector<std::uint8_t> NewUsers(int fold) const;
};

FoldPlan MakeFoldPlan(const RatingMatrix& matrix, SplitMode mode, std::uint64_t seed,
                      int fold_count = 5);

}  // namespace lfgrec

#endif  // LFGREC_DATASET_HPP_
