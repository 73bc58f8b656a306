#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dyfulm/cli.hpp"

using namespace dyfulm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  EXPECT_TRUE(in.good()) << "missing file " << p;
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("dyfulm_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
    config_path_ = (dir_ / "config.json").string();
    std::ofstream cfg(config_path_);
    cfg << R"({
      "model": {"width": 8, "depth": 1, "ffn_hidden": 16, "t_max": 12, "fusion_hidden": 4},
      "train": {"epochs": 2, "batch_size": 10, "seed": 3},
      "data": {"synth_rows": 60, "synth_vocab": 20}
    })";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& name) { return (dir_ / name).string(); }

  fs::path dir_;
  std::string config_path_;
};

TEST_F(CliTest, SynthIsByteDeterministicPerSeed) {
  ASSERT_EQ(run_cli({"synth", "--config", config_path_, "--seed", "7", "--out", out("a")}), 0);
  ASSERT_EQ(run_cli({"synth", "--config", config_path_, "--seed", "7", "--out", out("b")}), 0);
  ASSERT_EQ(run_cli({"synth", "--config", config_path_, "--seed", "8", "--out", out("c")}), 0);
  const std::string a = slurp(dir_ / "a" / "synthetic.csv");
  EXPECT_EQ(a, slurp(dir_ / "b" / "synthetic.csv"));
  EXPECT_NE(a, slurp(dir_ / "c" / "synthetic.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "a" / "manifest.json"));
}

TEST_F(CliTest, PreprocessWritesRecordsAndReports) {
  const std::string csv_path = out("toy.csv");
  std::ofstream csv(csv_path);
  csv << "text,score,year\nGreat stay,9.5,2016\nAwful room,1.0,2016\nJust okay,6.0,2017\n";
  csv.close();
  ASSERT_EQ(run_cli({"preprocess", csv_path, "--config", config_path_, "--out", out("pre")}), 0);
  EXPECT_TRUE(fs::exists(dir_ / "pre" / "records.json"));
  const std::string stats = slurp(dir_ / "pre" / "stats.csv");
  EXPECT_EQ(stats.rfind("group,max,q25,mean,median\noverall,", 0), 0u);
  EXPECT_NE(stats.find("\n2016,"), std::string::npos);
  EXPECT_NE(stats.find("\n2017,"), std::string::npos);
  const std::string hist = slurp(dir_ / "pre" / "label_histogram.csv");
  EXPECT_EQ(hist.rfind("task,class,count\n", 0), 0u);
  RecordsFile f = load_records((dir_ / "pre" / "records.json").string());
  EXPECT_EQ(f.records.size(), 3u);
  EXPECT_EQ(f.t_max, 12);
}

TEST_F(CliTest, PreprocessRejectsDirtyInputUnlessAllowed) {
  const std::string csv_path = out("dirty.csv");
  std::ofstream csv(csv_path);
  csv << "text,score\ngood room,8.0\nbroken score,12.0\n";
  csv.close();
  EXPECT_EQ(run_cli({"preprocess", csv_path, "--config", config_path_, "--out", out("p1")}), 1);
  EXPECT_EQ(run_cli({"preprocess", csv_path, "--config", config_path_, "--out", out("p2"),
                     "--allow-dirty"}),
            0);
  // the kept record is still written either way
  EXPECT_TRUE(fs::exists(dir_ / "p1" / "records.json"));
}

TEST_F(CliTest, TrainEvalRoundTrip) {
  ASSERT_EQ(run_cli({"synth", "--config", config_path_, "--seed", "7", "--out", out("s")}), 0);
  ASSERT_EQ(run_cli({"preprocess", (dir_ / "s" / "synthetic.csv").string(), "--config", config_path_,
                     "--out", out("pre")}),
            0);
  const std::string records = (dir_ / "pre" / "records.json").string();
  ASSERT_EQ(run_cli({"train", records, "--config", config_path_, "--seed", "3", "--out", out("t")}), 0);
  EXPECT_TRUE(fs::exists(dir_ / "t" / "checkpoint.json"));
  EXPECT_TRUE(fs::exists(dir_ / "t" / "checkpoint.json.bin"));
  const std::string curve = slurp(dir_ / "t" / "loss_curve.csv");
  EXPECT_EQ(curve.rfind("epoch,loss\n1,", 0), 0u);
  EXPECT_NE(curve.find("\n2,"), std::string::npos);

  ASSERT_EQ(run_cli({"eval", records, (dir_ / "t" / "checkpoint.json").string(), "--config",
                     config_path_, "--out", out("e")}),
            0);
  const std::string metrics = slurp(dir_ / "e" / "metrics.csv");
  EXPECT_EQ(metrics.rfind(std::string(metrics_csv_header()) + "\n", 0), 0u);
  EXPECT_NE(metrics.find(",full,"), std::string::npos);
}

TEST_F(CliTest, TrainingIsByteDeterministicPerSeed) {
  ASSERT_EQ(run_cli({"synth", "--config", config_path_, "--seed", "7", "--out", out("s")}), 0);
  ASSERT_EQ(run_cli({"preprocess", (dir_ / "s" / "synthetic.csv").string(), "--config", config_path_,
                     "--out", out("pre")}),
            0);
  const std::string records = (dir_ / "pre" / "records.json").string();
  ASSERT_EQ(run_cli({"train", records, "--config", config_path_, "--seed", "5", "--out", out("t1")}), 0);
  ASSERT_EQ(run_cli({"train", records, "--config", config_path_, "--seed", "5", "--out", out("t2")}), 0);
  ASSERT_EQ(run_cli({"train", records, "--config", config_path_, "--seed", "6", "--out", out("t3")}), 0);
  EXPECT_EQ(slurp(dir_ / "t1" / "checkpoint.json.bin"), slurp(dir_ / "t2" / "checkpoint.json.bin"));
  EXPECT_EQ(slurp(dir_ / "t1" / "loss_curve.csv"), slurp(dir_ / "t2" / "loss_curve.csv"));
  EXPECT_NE(slurp(dir_ / "t1" / "checkpoint.json.bin"), slurp(dir_ / "t3" / "checkpoint.json.bin"));
}

TEST_F(CliTest, SeedFlagBeatsConfigSeed) {
  ASSERT_EQ(run_cli({"synth", "--config", config_path_, "--out", out("cfgseed")}), 0);
  ASSERT_EQ(run_cli({"synth", "--config", config_path_, "--seed", "3", "--out", out("flagseed")}), 0);
  // config seed is 3, so an explicit --seed 3 lands on the same bytes
  EXPECT_EQ(slurp(dir_ / "cfgseed" / "synthetic.csv"), slurp(dir_ / "flagseed" / "synthetic.csv"));
  ASSERT_EQ(run_cli({"synth", "--config", config_path_, "--seed", "9", "--out", out("other")}), 0);
  EXPECT_NE(slurp(dir_ / "cfgseed" / "synthetic.csv"), slurp(dir_ / "other" / "synthetic.csv"));
}

TEST_F(CliTest, GradcheckImpossibleThresholdFails) {
  EXPECT_EQ(run_cli({"gradcheck", "--threshold", "0"}), 1);
}

TEST_F(CliTest, RejectsBadArguments) {
  EXPECT_NE(run_cli({}), 0);
  EXPECT_NE(run_cli({"not-a-command"}), 0);
  EXPECT_NE(run_cli({"train"}), 0);  // records argument is required
  EXPECT_NE(run_cli({"train", "whatever.json", "--variant", "bogus"}), 0);
  EXPECT_NE(run_cli({"preprocess", "x.csv", "--schema", "mystery"}), 0);
  EXPECT_NE(run_cli({"train", out("missing.json"), "--out", out("t")}), 0);
  EXPECT_NE(run_cli({"synth", "--config", out("no_config.json"), "--out", out("s")}), 0);
}

TEST_F(CliTest, VariantNamesRoundTrip) {
  for (const std::string name : {"full", "wo-dl", "wo-hg-dl", "wo-gf-hg-dl"})
    EXPECT_EQ(variant_name(toggles_for_variant(name)), name);
  EXPECT_THROW(toggles_for_variant("nope"), std::invalid_argument);
}

TEST_F(CliTest, RunIdDependsOnInputsOnly) {
  Config cfg;
  const std::string a = make_run_id("train", cfg, 7, "full", {"r.json"});
  const std::string b = make_run_id("train", cfg, 7, "full", {"r.json"});
  EXPECT_EQ(a, b);
  EXPECT_NE(a, make_run_id("train", cfg, 8, "full", {"r.json"}));
  EXPECT_NE(a, make_run_id("train", cfg, 7, "wo-dl", {"r.json"}));
  EXPECT_NE(a, make_run_id("eval", cfg, 7, "full", {"r.json"}));
  Config other;
  other.model.width = 16;
  EXPECT_NE(a, make_run_id("train", other, 7, "full", {"r.json"}));
}

}  // namespace
