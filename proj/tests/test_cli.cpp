#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "../tools/commands.hpp"
#include "hyloc/errors.hpp"

using namespace hyloc;
using namespace hyloc::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("hyloc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  int call(std::vector<std::string> args) {
    args.insert(args.begin(), "hyloc");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run(static_cast<int>(argv.size()), argv.data());
  }

  fs::path dir;
};

}  // namespace

TEST(Manifest, PathAndJson) {
  EXPECT_EQ(manifest_path("a/trace.jsonl", false), fs::path("a/trace.jsonl.manifest.json"));
  EXPECT_EQ(manifest_path("a/out", true), fs::path("a/out/manifest.json"));
  RunManifest m{"simulate", "x.ini", 7, {"in"}, {"out"}};
  const auto j = nlohmann::json::parse(m.to_json());
  EXPECT_EQ(j.at("command"), "simulate");
  EXPECT_EQ(j.at("seed"), 7);
  EXPECT_EQ(j.at("tool_version"), kToolVersion);
  EXPECT_TRUE(j.contains("wall_time_s"));
  m.seed.reset();
  EXPECT_TRUE(nlohmann::json::parse(m.to_json()).at("seed").is_null());
}

TEST_F(CliTest, SimulateIsDeterministic) {
  SimulateArgs a;
  a.preset = "mixed";
  a.duration = 10.0;
  a.seed = 3;
  a.out = dir / "a.jsonl";
  a.config_out = dir / "a.ini";
  const auto m = cmd_simulate(a);
  EXPECT_EQ(m.command, "simulate");
  ASSERT_TRUE(m.seed.has_value());
  EXPECT_EQ(*m.seed, 3u);
  EXPECT_TRUE(fs::exists(manifest_path(a.out, false)));

  // Re-running from the written INI gives the same bytes.
  SimulateArgs b;
  b.config = dir / "a.ini";
  b.seed = 3;
  b.out = dir / "b.jsonl";
  cmd_simulate(b);
  EXPECT_EQ(slurp(a.out), slurp(b.out));

  SimulateArgs c = a;
  c.seed = 4;
  c.out = dir / "c.jsonl";
  c.config_out.reset();
  cmd_simulate(c);
  EXPECT_NE(slurp(a.out), slurp(c.out));
}

TEST_F(CliTest, PipelineRuns) {
  ASSERT_EQ(call({"simulate", "--preset", "practical", "--duration", "60", "--seed", "5", "--out",
                  (dir / "t.jsonl").string()}),
            0);
  ASSERT_EQ(call({"label-anchors", "--trace", (dir / "t.jsonl").string(), "--out", (dir / "l.jsonl").string()}), 0);
  ASSERT_EQ(call({"train-selector", "--labels", (dir / "l.jsonl").string(), "--epochs", "20", "--seed", "1", "--out",
                  (dir / "sel.json").string()}),
            0);
  ASSERT_EQ(call({"train", "--trace", (dir / "t.jsonl").string(), "--selector", (dir / "sel.json").string(),
                  "--epochs", "1", "--seed", "1", "--out", (dir / "f.bin").string()}),
            0);
  EXPECT_TRUE(fs::exists(dir / "f.bin.log.csv"));
  ASSERT_EQ(call({"ablate", "--trace", (dir / "t.jsonl").string(), "--selector", (dir / "sel.json").string(),
                  "--epochs", "1", "--seed", "1", "--out", (dir / "ablation" / "run").string()}),
            0);
  EXPECT_TRUE(fs::exists(dir / "ablation" / "run" / "ablation.csv"));
  EXPECT_TRUE(fs::exists(dir / "ablation" / "run" / "no-attention.log.csv"));
  for (const char* method : {"rf", "ekf"})
    ASSERT_EQ(call({"evaluate", "--method", method, "--trace", (dir / "t.jsonl").string(), "--out",
                    (dir / method).string()}),
              0);
  ASSERT_EQ(call({"evaluate", "--method", "fusion", "--trace", (dir / "t.jsonl").string(), "--model",
                  (dir / "f.bin").string(), "--selector", (dir / "sel.json").string(), "--out",
                  (dir / "fusion").string()}),
            0);
  EXPECT_TRUE(fs::exists(dir / "fusion" / "attention.csv"));
  const auto summary = nlohmann::json::parse(slurp(dir / "ekf" / "summary.json"));
  EXPECT_GT(summary.at("count").get<int>(), 0);
  ASSERT_EQ(call({"compare", "--result", (dir / "rf").string(), "--result", (dir / "ekf").string(), "--result",
                  (dir / "fusion").string(), "--out", (dir / "cmp.csv").string()}),
            0);
  const auto cmp = slurp(dir / "cmp.csv");
  EXPECT_NE(cmp.find("fusion"), std::string::npos);
  // A fusion checkpoint is not a blackbox model.
  EXPECT_EQ(call({"evaluate", "--method", "blackbox", "--trace", (dir / "t.jsonl").string(), "--model",
                  (dir / "f.bin").string(), "--out", (dir / "bad").string()}),
            2);
}

TEST_F(CliTest, GradcheckPasses) {
  GradcheckArgs a;
  a.out = dir / "gc.csv";
  const auto m = cmd_gradcheck(a);
  EXPECT_EQ(m.outputs.size(), 1u);
  const auto csv = slurp(a.out);
  EXPECT_NE(csv.find("lstm_cell"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(call({}), 2);
  EXPECT_EQ(call({"no-such-command"}), 2);
  EXPECT_EQ(call({"simulate", "--preset", "mixed", "--out", (dir / "x").string()}), 2);  // missing --seed
  EXPECT_EQ(call({"simulate", "--preset", "nowhere", "--seed", "1", "--out", (dir / "x").string()}), 2);
  EXPECT_EQ(call({"label-anchors", "--trace", (dir / "missing.jsonl").string(), "--out", (dir / "l").string()}), 3);
  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << "{not json\n";
  }
  EXPECT_EQ(call({"label-anchors", "--trace", (dir / "bad.jsonl").string(), "--out", (dir / "l").string()}), 2);
  {
    std::ofstream ini(dir / "bad.ini");
    ini << "[scenario]\nduration = -4\n";
  }
  EXPECT_EQ(call({"simulate", "--config", (dir / "bad.ini").string(), "--seed", "1", "--out", (dir / "x").string()}),
            2);
  EXPECT_EQ(call({"simulate", "--preset", "mixed", "--duration", "2", "--seed", "1", "--out",
                  (dir / "sub" / "ok.jsonl").string()}),
            0);
}
