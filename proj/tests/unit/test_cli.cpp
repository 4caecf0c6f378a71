/*
 * Copyright 2026 The cpshap Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cpshap/cli.hpp"
#include "cpshap/errors.hpp"
#include "cpshap/rng.hpp"
#include "json.hpp"

namespace cpshap::cli {
namespace {

namespace fs = std::filesystem;

TEST(ParseCsv, BasicColumnsAndTarget) {
  const auto t = parse_csv("a,y,b\n1,2,3\n4,5,6\n", {"y", {}});
  ASSERT_EQ(t.data.rows(), 2u);
  EXPECT_EQ(t.data.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.data.target, (std::vector<double>{2, 5}));
  EXPECT_EQ(t.data.features(1, 1), 6.0);
  EXPECT_EQ(t.dropped_rows, 0u);
}

TEST(ParseCsv, QuotesBomAndCrlf) {
  const auto t = parse_csv("\xEF\xBB\xBF\"a\",\"y\"\r\n\"1.5\",2\r\n", {"y", {}});
  EXPECT_EQ(t.data.feature_names.front(), "a");
  EXPECT_EQ(t.data.features(0, 0), 1.5);
}

TEST(ParseCsv, MissingCellsDropRows) {
  const auto t = parse_csv("a,y\n1,2\n,3\nNA,4\n5,nan\n6,null\n7,8\n", {"y", {}});
  EXPECT_EQ(t.data.rows(), 2u);
  EXPECT_EQ(t.dropped_rows, 4u);
  EXPECT_EQ(t.source_rows, (std::vector<std::size_t>{0, 5}));
}

TEST(ParseCsv, CategoricalsOneHotInSortedOrder) {
  const auto t = parse_csv("c,y\nred,1\nblue,2\n\"a,b\",3\n", {"y", {"c"}});
  EXPECT_EQ(t.data.feature_names,
            (std::vector<std::string>{"c=a,b", "c=blue", "c=red"}));
  EXPECT_EQ(t.data.features(0, 2), 1.0);
  EXPECT_EQ(t.data.features(0, 0), 0.0);
  EXPECT_EQ(t.data.features(2, 0), 1.0);
}

TEST(ParseCsv, Errors) {
  EXPECT_THROW(parse_csv("", {"y", {}}), EmptyDataError);
  EXPECT_THROW(parse_csv("a,b\n1,2\n", {"y", {}}), DataError);
  EXPECT_THROW(parse_csv("a,y\nx,2\n", {"y", {}}), DataError);
  EXPECT_THROW(parse_csv("a,y\n1,2,3\n", {"y", {}}), DataError);
  EXPECT_THROW(parse_csv("a,a,y\n1,2,3\n", {"y", {}}), DataError);
  EXPECT_THROW(parse_csv("a,y\n\"1,2\n", {"y", {}}), DataError);
  EXPECT_THROW(parse_csv("a,y\n1,2\n", {"y", {"y"}}), DataError);
  EXPECT_THROW(parse_csv("a,y\n,2\n", {"y", {}}), EmptyDataError);
}

TEST(ParseCsv, FingerprintCoversRawBytes) {
  const auto a = parse_csv("a,y\n1,2\n", {"y", {}});
  const auto b = parse_csv("a,y\n1,2.0\n", {"y", {}});
  EXPECT_NE(a.fingerprint, b.fingerprint);
  EXPECT_EQ(a.fingerprint, fingerprint_bytes("a,y\n1,2\n"));
}

TEST(SplitList, TrimsAndKeepsEmpty) {
  EXPECT_EQ(split_list(" a, b ,c"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(split_list("  ").empty());
  EXPECT_EQ(split_list("1;2", ';').size(), 2u);
}

class CliRun : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cpshap_cli_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream csv(dir_ / "data.csv");
    csv << "x1,x2,x3,y\n";
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
      const double x1 = rng.uniform(), x2 = rng.uniform(), x3 = rng.uniform();
      const double y = 2 * x1 + x2 + (0.2 + x3) * (rng.uniform() - 0.5);
      csv << x1 << "," << x2 << "," << x3 << "," << y << "\n";
    }
  }
  void TearDown() override { fs::remove_all(dir_); }

  int call(std::vector<std::string> args) {
    args.insert(args.begin(), "cpshap");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  static nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliRun, NoSubcommandIsAConfigError) { EXPECT_EQ(call({}), kExitConfig); }

TEST_F(CliRun, HelpExitsCleanly) { EXPECT_EQ(call({"--help"}), kExitOk); }

TEST_F(CliRun, AttributeWritesOutputs) {
  const auto out = dir_ / "run";
  ASSERT_EQ(call({"attribute", "--data", (dir_ / "data.csv").string(), "--target", "y",
                  "--max-test", "5", "--out-dir", out.string()}),
            kExitOk)
      << err_.str();
  for (const char* f : {"allocations.json", "rank_matrix.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const auto alloc = read_json(out / "allocations.json");
  EXPECT_EQ(alloc.at("schema_version").get<int>(), kSchemaVersion);
  EXPECT_EQ(alloc.at("feature_names").size(), 3u);
  // Default value width with both allocation kinds over five points.
  EXPECT_EQ(alloc.at("entries").size(), 10u);
  const auto manifest = read_json(out / "manifest.json");
  EXPECT_EQ(manifest.at("command").get<std::string>(), "attribute");
  EXPECT_EQ(manifest.at("trained_count").get<std::size_t>(), 8u);
}

TEST_F(CliRun, RerunFromManifestIsIdentical) {
  const auto a = dir_ / "a";
  const auto b = dir_ / "b";
  ASSERT_EQ(call({"attribute", "--data", (dir_ / "data.csv").string(), "--target", "y",
                  "--max-test", "3", "--estimator", "mc", "--m", "20", "--out-dir",
                  a.string()}),
            kExitOk)
      << err_.str();
  ASSERT_EQ(call({"attribute", "--from-manifest", (a / "manifest.json").string(),
                  "--out-dir", b.string()}),
            kExitOk)
      << err_.str();
  EXPECT_EQ(read_json(a / "allocations.json").at("entries"),
            read_json(b / "allocations.json").at("entries"));
}

TEST_F(CliRun, ReportWritesAgreementOnlyWithBothKinds) {
  const auto both = dir_ / "both";
  ASSERT_EQ(call({"attribute", "--data", (dir_ / "data.csv").string(), "--target", "y",
                  "--max-test", "4", "--out-dir", both.string()}),
            kExitOk);
  ASSERT_EQ(call({"report", "--input", (both / "allocations.json").string(), "--out-dir",
                  both.string()}),
            kExitOk)
      << err_.str();
  EXPECT_TRUE(fs::exists(both / "top5.csv"));
  EXPECT_TRUE(fs::exists(both / "agreement.csv"));
  EXPECT_NE(out_.str().find("agreement width"), std::string::npos);

  const auto one = dir_ / "one";
  ASSERT_EQ(call({"attribute", "--data", (dir_ / "data.csv").string(), "--target", "y",
                  "--max-test", "4", "--alloc", "shap", "--out-dir", one.string()}),
            kExitOk);
  ASSERT_EQ(call({"report", "--input", (one / "allocations.json").string(), "--out-dir",
                  one.string()}),
            kExitOk);
  EXPECT_TRUE(fs::exists(one / "top5.csv"));
  EXPECT_FALSE(fs::exists(one / "agreement.csv"));
}

TEST_F(CliRun, ExitCodesByCategory) {
  EXPECT_EQ(call({"attribute", "--data", (dir_ / "missing.csv").string(), "--target", "y"}),
            kExitData);
  EXPECT_EQ(call({"attribute", "--data", (dir_ / "data.csv").string(), "--target", "y",
                  "--method", "bogus", "--out-dir", (dir_ / "x").string()}),
            kExitConfig);
  EXPECT_EQ(call({"attribute", "--data", (dir_ / "data.csv").string(), "--target", "nope",
                  "--out-dir", (dir_ / "x").string()}),
            kExitData);
  EXPECT_EQ(call({"report", "--input", (dir_ / "data.csv").string()}), kExitData);
  EXPECT_EQ(call({"benchmark", "nosuch"}), kExitConfig);
}

}  // namespace
}  // namespace cpshap::cli
