#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "annotaudit/cli.hpp"
#include "json.hpp"

using annotaudit::cli::run;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("annotaudit_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void make_data(const std::string& sub, const std::string& seed = "5") {
    auto r = call({"synth", "--preset", "smoke", "--seed", seed, "--respondents", "900", "--out", path(sub)});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path dir_;
};

}  // namespace

TEST(Cli, NoSubcommandIsUsageError) {
  auto r = call({});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("audit"), std::string::npos);  // help lists the subcommands
}

TEST(Cli, UnknownSubcommand) {
  auto r = call({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("UnknownSubcommand"), std::string::npos);
}

TEST(Cli, BadFlagValues) {
  EXPECT_EQ(call({"synth", "--preset", "huge"}).code, 2);
  EXPECT_EQ(call({"mrp", "--annotations", "x.csv", "--engine", "gibbs"}).code, 2);
  EXPECT_EQ(call({"mrp"}).code, 2);  // --annotations is required
}

TEST(Cli, HelpAndVersion) {
  auto h = call({"--help"});
  EXPECT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("synth"), std::string::npos);
  auto v = call({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_FALSE(v.out.empty());
}

TEST_F(CliTest, MissingInputFileFails) {
  auto r = call({"validate", "--annotations", path("nope.csv"), "--out", path("v")});
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, SynthIsDeterministic) {
  make_data("a");
  make_data("b");
  for (const char* f : {"annotations.csv", "strata.csv", "hofstede.csv"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  auto manifest = nlohmann::json::parse(slurp(dir_ / "a" / "manifest.json"));
  EXPECT_TRUE(manifest.contains("pairs"));
}

TEST_F(CliTest, ValidateReportsCleanSyntheticData) {
  make_data("d");
  auto r = call({"validate", "--annotations", path("d/annotations.csv"), "--strata", path("d/strata.csv"),
                 "--hofstede", path("d/hofstede.csv"), "--out", path("v")});
  EXPECT_EQ(r.code, 0) << r.err << r.out;
  auto j = nlohmann::json::parse(slurp(dir_ / "v" / "validation.json"));
  EXPECT_TRUE(j["valid"].get<bool>());
  EXPECT_EQ(j["row_errors"].get<int>(), 0);
}

TEST_F(CliTest, ValidateFlagsBadRows) {
  std::ofstream f(path("bad.csv"));
  f << "respondent_id,country,gender,age_group,survey_language,item_id,label_id,annotated,play_frequency,"
       "english_play_frequency,ambassador\n"
    << "r1,DE,female,18-24,de,i1,l1,1,3,4,0\n"
    << "r1,DE,female,18-24,de,i1,l1,0,3,4,0\n";
  f.close();
  auto r = call({"validate", "--annotations", path("bad.csv"), "--out", path("v")});
  EXPECT_EQ(r.code, 2);
  auto j = nlohmann::json::parse(slurp(dir_ / "v" / "validation.json"));
  EXPECT_FALSE(j["valid"].get<bool>());
  EXPECT_GE(j["issues"].size(), 1u);
}

TEST_F(CliTest, MrpThenClassifyFromEstimates) {
  make_data("d");
  auto m = call({"mrp", "--annotations", path("d/annotations.csv"), "--strata", path("d/strata.csv"), "--engine",
                 "laplace", "--seed", "2", "--out", path("m")});
  ASSERT_EQ(m.code, 0) << m.err;
  ASSERT_TRUE(fs::exists(dir_ / "m" / "estimates.csv"));
  auto c = call({"classify", "--estimates", path("m/estimates.csv"), "--out", path("c")});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_TRUE(fs::exists(dir_ / "c" / "verdicts.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "c" / "heatmap.csv"));
  auto j = nlohmann::json::parse(slurp(dir_ / "c" / "classification.json"));
  EXPECT_TRUE(j.is_object());
}

TEST_F(CliTest, ClassifyNeedsAnInput) {
  auto r = call({"classify", "--out", path("c")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ConfigError"), std::string::npos);
}
