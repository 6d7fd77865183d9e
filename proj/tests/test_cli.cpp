#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string output;  // stdout and stderr
};

Run run(const std::string& args) {
  const std::string cmd = std::string(PPM_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 512> buf{};
  while (fgets(buf.data(), static_cast<int>(buf.size()), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ppm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    // The shipped config, shrunk so each invocation is quick.
    auto j = nlohmann::json::parse(slurp(fs::path(PPM_CONFIG_DIR) / "synthetic.json"));
    j["data"]["synthetic"]["n_cases"] = 300;
    j["sweep"]["ratios"] = {1, 20};
    j["sweep"]["eff"] = {0, 1};
    j["sweep"]["com"] = {0, 5};
    config_ = (dir_ / "config.json").string();
    std::ofstream(config_) << j.dump(2);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& name) const { return (dir_ / name).string(); }
  std::string common(const std::string& out_name) const { return config_ + " --out-dir " + out(out_name); }

  fs::path dir_;
  std::string config_;
};

}  // namespace

TEST_F(CliTest, PipelineWritesArtifacts) {
  const auto r = run("pipeline " + common("p") + " --seed 4");
  ASSERT_EQ(r.status, 0) << r.output;
  for (const char* f : {"model.json", "threshold.json", "summary.json", "cases.csv", "sweep_rq1.csv", "sweep_rq2.csv",
                        "sweep_rq3.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "p" / f)) << f;
  }
}

TEST_F(CliTest, StagedRunMatchesPipeline) {
  ASSERT_EQ(run("pipeline " + common("p")).status, 0);
  for (const char* stage : {"generate", "prepare", "train", "threshold", "evaluate", "roi"}) {
    const auto r = run(std::string(stage) + " " + common("s"));
    ASSERT_EQ(r.status, 0) << stage << ": " << r.output;
  }
  const auto r = run("sweep " + common("s") + " --rq RQ2");
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(slurp(dir_ / "s" / "sweep_rq2.csv"), slurp(dir_ / "p" / "sweep_rq2.csv"));
  EXPECT_EQ(slurp(dir_ / "s" / "threshold.json"), slurp(dir_ / "p" / "threshold.json"));
  const auto roi = nlohmann::json::parse(slurp(dir_ / "s" / "roi.json"));
  EXPECT_TRUE(roi.contains("roi"));
}

TEST_F(CliTest, SameSeedSameOutput) {
  ASSERT_EQ(run("pipeline " + common("a") + " --seed 11").status, 0);
  ASSERT_EQ(run("pipeline " + common("b") + " --seed 11").status, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "sweep_rq1.csv"), slurp(dir_ / "b" / "sweep_rq1.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "summary.json"), slurp(dir_ / "b" / "summary.json"));
}

TEST_F(CliTest, MissingConfigFailsInConfigStage) {
  const auto r = run("pipeline " + out("nope.json") + " --out-dir " + out("x"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("[config]"), std::string::npos) << r.output;
}

TEST_F(CliTest, StageWithoutInputsFailsWithItsTag) {
  const auto r = run("train " + common("empty"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("[train]"), std::string::npos) << r.output;
}

TEST_F(CliTest, UnknownResearchQuestionFails) {
  ASSERT_EQ(run("pipeline " + common("p")).status, 0);
  const auto r = run("sweep " + common("p") + " --rq RQ7");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("RQ7"), std::string::npos) << r.output;
}

TEST_F(CliTest, BadArgumentsFail) {
  EXPECT_NE(run("").status, 0);
  EXPECT_NE(run("frobnicate " + config_).status, 0);
  EXPECT_NE(run("pipeline " + config_ + " --seed notanumber").status, 0);
}
