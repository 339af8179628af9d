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

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "lfgrec/dataset.hpp"
#include "test_support.hpp"

namespace lfgrec {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("lfgrec_ds_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  void Write(const std::string& name, const std::string& body) const {
    std::ofstream(path_ / name) << body;
  }

 private:
  fs::path path_;
};

TEST(ParseRatingLine, Ml100kTabSeparated) {
  const RatingTriple t = ParseRatingLine("1\t5\t4\t886397596", DatasetKind::kMl100k, 1);
  EXPECT_EQ(t, (RatingTriple{1, 5, 4.0, 886397596}));
}

TEST(ParseRatingLine, Ml1mDoubleColon) {
  const RatingTriple t = ParseRatingLine("1::1193::5::978300760", DatasetKind::kMl1m, 1);
  EXPECT_EQ(t, (RatingTriple{1, 1193, 5.0, 978300760}));
}

TEST(ParseRatingLine, CommaSeparatorIsMalformed) {
  EXPECT_THROW(ParseRatingLine("1,1193,5,978300760", DatasetKind::kMl1m, 7), ParseError);
}

TEST(ParseRatingLine, ReportsLineNumber) {
  try {
    ParseRatingLine("1\t5\tfour\t886397596", DatasetKind::kMl100k, 42, "u.data");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 42u);
    EXPECT_NE(std::string(e.what()).find("u.data:42"), std::string::npos);
  }
}

TEST(ParseRatingLine, RejectsOutOfRangeRatingsAndIds) {
  EXPECT_THROW(ParseRatingLine("1\t5\t6\t0", DatasetKind::kMl100k, 1), ParseError);
  EXPECT_THROW(ParseRatingLine("1\t5\t0\t0", DatasetKind::kMl100k, 1), ParseError);
  EXPECT_THROW(ParseRatingLine("0\t5\t3\t0", DatasetKind::kMl100k, 1), ParseError);
  EXPECT_THROW(ParseRatingLine("1\t5\t3", DatasetKind::kMl100k, 1), ParseError);
}

TEST(ParseUserLine, BothLayouts) {
  const RawUser a = ParseUserLine("1|24|M|technician|85711", DatasetKind::kMl100k, 1);
  EXPECT_EQ(a.user_id, 1);
  EXPECT_EQ(a.age, 24);
  EXPECT_EQ(a.gender, "M");
  EXPECT_EQ(a.occupation, "technician");

  const RawUser b = ParseUserLine("2::M::56::16::70072", DatasetKind::kMl1m, 1);
  EXPECT_EQ(b.user_id, 2);
  EXPECT_EQ(b.age, 56);
  EXPECT_EQ(b.gender, "M");
  EXPECT_EQ(b.occupation, "16");
}

TEST(FormatRatingLine, InvertsParse) {
  for (const auto kind : {DatasetKind::kMl100k, DatasetKind::kMl1m}) {
    const RatingTriple t{196, 242, 3.0, 881250949};
    EXPECT_EQ(ParseRatingLine(FormatRatingLine(t, kind), kind, 1), t);
  }
}

TEST(Parse100k, MissingFileIsDataError) {
  TempDir dir;
  EXPECT_THROW(Parse100k(dir.path()), DataError);
  EXPECT_THROW(Parse1m(dir.path()), DataError);
}

TEST(Parse100k, EmptyRatingsFileYieldsNoTriplesAndMatrixBuildFails) {
  TempDir dir;
  dir.Write("u.data", "");
  dir.Write("u.user", "1|24|M|technician|85711\n");
  dir.Write("u.occupation", "technician\n");
  const RawDataset raw = Parse100k(dir.path());
  EXPECT_TRUE(raw.ratings.empty());
  const IdRemap ids = IdRemap::FromTriples(raw.ratings);
  EXPECT_THROW(BuildMatrix(raw.ratings, ids), DataError);
}

TEST(Parse100k, MalformedLineCarriesLineNumber) {
  TempDir dir;
  dir.Write("u.data", "1\t1\t5\t10\n1\t2\t4\n");
  dir.Write("u.user", "1|24|M|technician|85711\n");
  dir.Write("u.occupation", "technician\n");
  try {
    Parse100k(dir.path());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Parse100k, FullFileCounts) {
  if (!testing::HaveMl100k()) GTEST_SKIP() << "ml-100k not present";
  const RawDataset raw = Parse100k(testing::Ml100kDir());
  EXPECT_EQ(raw.ratings.size(), 100000u);
  std::set<std::int64_t> users, items;
  for (const auto& t : raw.ratings) {
    users.insert(t.user_id);
    items.insert(t.item_id);
  }
  EXPECT_EQ(users.size(), 943u);
  EXPECT_EQ(items.size(), 1682u);
  EXPECT_EQ(raw.users.size(), 943u);
  EXPECT_EQ(raw.occupations.size(), 21u);
}

TEST(Parse100k, SerializeRoundTripReproducesEveryLine) {
  if (!testing::HaveMl100k()) GTEST_SKIP() << "ml-100k not present";
  std::ifstream in(testing::Ml100kDir() / "u.data");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const RatingTriple t = ParseRatingLine(line, DatasetKind::kMl100k, ++n);
    ASSERT_EQ(FormatRatingLine(t, DatasetKind::kMl100k), line);
  }
  EXPECT_EQ(n, 100000u);
}

TEST(FeatureCodec, AgeOneHotAndVocabulary) {
  if (!testing::HaveMl100k()) GTEST_SKIP() << "ml-100k not present";
  // Oracle: scan u.user directly for the age range.
  int lo = 1000, hi = -1;
  {
    std::ifstream in(testing::Ml100kDir() / "u.user");
    std::string line;
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string id, age;
      std::getline(ss, id, '|');
      std::getline(ss, age, '|');
      lo = std::min(lo, std::stoi(age));
      hi = std::max(hi, std::stoi(age));
    }
  }
  const RawDataset raw = Parse100k(testing::Ml100kDir());
  const FeatureCodec codec = FeatureCodec::Fit(raw);
  EXPECT_EQ(codec.age_min(), lo);
  EXPECT_EQ(codec.age_max(), hi);
  EXPECT_EQ(codec.dim(), 1 + 2 + 21);

  const RowVector row = codec.Encode(24, "M", "technician");
  EXPECT_NEAR(row[0], (24.0 - lo) / (hi - lo), 1e-15);
  if (lo == 7 && hi == 73) EXPECT_NEAR(row[0], 0.2576, 5e-5);
  EXPECT_EQ(row[1], 1.0);
  EXPECT_EQ(row[2], 0.0);
  const auto& occ = codec.occupations();
  const auto slot = std::find(occ.begin(), occ.end(), "technician") - occ.begin();
  for (int j = 0; j < static_cast<int>(occ.size()); ++j) {
    EXPECT_EQ(row[3 + j], j == slot ? 1.0 : 0.0);
  }
  EXPECT_EQ(codec.Encode(hi, "F", "writer")[0], 1.0);
  EXPECT_EQ(codec.Encode(24, "M", "technician"), row);
  EXPECT_THROW(codec.Encode(24, "M", "astronaut"), UnknownCategoryError);
  EXPECT_THROW(codec.Encode(24, "X", "technician"), UnknownCategoryError);
}

TEST(FeatureCodec, EveryRowHasOneGenderAndOneOccupation) {
  const Dataset data = testing::SyntheticDataset(30, 12, 0.5, 3);
  const Matrix& rows = data.features.rows;
  for (Eigen::Index u = 0; u < rows.rows(); ++u) {
    EXPECT_GE(rows(u, 0), 0.0);
    EXPECT_LE(rows(u, 0), 1.0);
    EXPECT_EQ(rows.row(u).segment(1, 2).sum(), 1.0);
    EXPECT_EQ(rows.row(u).tail(3).sum(), 1.0);
  }
}

TEST(BuildMatrix, CountsAndDuplicates) {
  const std::vector<RatingTriple> triples = {{10, 7, 4, 0}, {10, 9, 2, 0}, {20, 7, 5, 0}};
  const IdRemap ids = IdRemap::FromTriples(triples);
  const RatingMatrix h = BuildMatrix(triples, ids);
  EXPECT_EQ(h.num_users(), 2);
  EXPECT_EQ(h.num_items(), 2);
  EXPECT_EQ(h.size(), 3u);
  EXPECT_EQ(h.Find(*ids.FindUser(10), *ids.FindItem(9)), 2.0);
  EXPECT_FALSE(h.Find(*ids.FindUser(20), *ids.FindItem(9)).has_value());

  auto dup = triples;
  dup.push_back({10, 7, 1, 5});
  EXPECT_THROW(BuildMatrix(dup, IdRemap::FromTriples(dup)), DataError);
}

TEST(BuildMatrix, FullMl100kSize) {
  if (!testing::HaveMl100k()) GTEST_SKIP() << "ml-100k not present";
  const Dataset data = LoadDataset(DatasetKind::kMl100k, testing::Ml100kDir());
  EXPECT_EQ(data.ratings.size(), 100000u);
  EXPECT_EQ(data.ratings.num_users(), 943);
  EXPECT_EQ(data.ratings.num_items(), 1682);
}

TEST(RatingMatrix, RejectsOutOfRangeIndices) {
  EXPECT_THROW(RatingMatrix(2, 2, {{0, 2, 3.0}}), RangeError);
  EXPECT_THROW(RatingMatrix(2, 2, {{0, 1, 3.0}, {0, 1, 4.0}}), DataError);
}

TEST(FoldPlan, TenRatingsGiveTwoPerFold) {
  std::vector<RatingEntry> entries;
  for (int i = 0; i < 10; ++i) entries.push_back({0, i, 3.0});
  const RatingMatrix h(1, 10, entries);
  const FoldPlan plan = MakeFoldPlan(h, SplitMode::kPerUserRatings, 5);
  std::vector<int> count(5, 0);
  for (const int f : plan.position_part) ++count[f];
  EXPECT_EQ(count, std::vector<int>(5, 2));
}

TEST(FoldPlan, PerUserFoldsPartitionAndAreProportional) {
  const Dataset data = testing::SyntheticDataset(40, 30, 0.6, 11);
  const RatingMatrix& h = data.ratings;
  const FoldPlan plan = MakeFoldPlan(h, SplitMode::kPerUserRatings, 9);
  std::vector<int> covered(h.size(), 0);
  for (int f = 0; f < 5; ++f) {
    const auto eval = plan.EvalMask(f);
    const auto train = plan.TrainMask(f);
    for (std::size_t p = 0; p < h.size(); ++p) {
      EXPECT_FALSE(eval[p] && train[p]);
      EXPECT_TRUE(eval[p] || train[p]);
      covered[p] += eval[p];
    }
  }
  EXPECT_TRUE(std::all_of(covered.begin(), covered.end(), [](int c) { return c == 1; }));
  for (int u = 0; u < h.num_users(); ++u) {
    const auto c = static_cast<int>(h.UserRow(u).size());
    std::vector<int> per(5, 0);
    for (std::size_t j = 0; j < h.UserRow(u).size(); ++j) ++per[plan.position_part[h.RowBegin(u) + j]];
    for (const int n : per) {
      EXPECT_GE(n, c / 5);
      EXPECT_LE(n, (c + 4) / 5);
    }
  }
}

TEST(FoldPlan, SameSeedSamePlan) {
  const Dataset data = testing::SyntheticDataset(25, 20, 0.5, 4);
  for (const auto mode : {SplitMode::kPerUserRatings, SplitMode::kUserLevel}) {
    const FoldPlan a = MakeFoldPlan(data.ratings, mode, 77);
    const FoldPlan b = MakeFoldPlan(data.ratings, mode, 77);
    EXPECT_EQ(a.position_part, b.position_part);
    EXPECT_EQ(a.user_fold, b.user_fold);
    const FoldPlan c = MakeFoldPlan(data.ratings, mode, 78);
    EXPECT_NE(a.position_part, c.position_part);
  }
}

TEST(FoldPlan, UserLevelNewUsersNeverTrain) {
  const Dataset data = testing::SyntheticDataset(43, 20, 0.5, 5);
  const RatingMatrix& h = data.ratings;
  const FoldPlan plan = MakeFoldPlan(h, SplitMode::kUserLevel, 1);
  int total_new = 0;
  for (int f = 0; f < 5; ++f) {
    const auto fresh = plan.NewUsers(f);
    const auto train = plan.TrainMask(f);
    const auto eval = plan.EvalMask(f);
    const auto hist = plan.HistoryMask(f);
    for (std::size_t p = 0; p < h.size(); ++p) {
      const int u = plan.position_user[p];
      if (fresh[u]) {
        EXPECT_FALSE(train[p]);
        EXPECT_TRUE(eval[p] != hist[p]);
      } else {
        EXPECT_TRUE(train[p]);
        EXPECT_FALSE(eval[p] || hist[p]);
      }
    }
    total_new += static_cast<int>(std::count(fresh.begin(), fresh.end(), 1));
  }
  EXPECT_EQ(total_new, h.num_users());
}

TEST(FoldPlan, Ml100kNewUserCount) {
  if (!testing::HaveMl100k()) GTEST_SKIP() << "ml-100k not present";
  const Dataset data = LoadDataset(DatasetKind::kMl100k, testing::Ml100kDir());
  const FoldPlan plan = MakeFoldPlan(data.ratings, SplitMode::kUserLevel, 42);
  const auto fresh = plan.NewUsers(0);
  EXPECT_EQ(std::count(fresh.begin(), fresh.end(), 1), 189);
  EXPECT_EQ(std::count(fresh.begin(), fresh.end(), 0), 754);
  // Roughly 20% of each new user's ratings are scored.
  const auto eval = plan.EvalMask(0);
  const auto hist = plan.HistoryMask(0);
  const double scored = static_cast<double>(std::count(eval.begin(), eval.end(), 1));
  const double history = static_cast<double>(std::count(hist.begin(), hist.end(), 1));
  EXPECT_NEAR(scored / (scored + history), 0.2, 0.01);
}

}  // namespace
}  // namespace lfgrec
