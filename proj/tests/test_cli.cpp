#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#ifndef IGT_CLI_PATH
#error "IGT_CLI_PATH must point at the igt executable"
#endif

namespace fs = std::filesystem;

namespace {

struct Run {
  int rc = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string("\"") + IGT_CLI_PATH + "\" " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  std::size_t got;
  while ((got = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(p);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path work_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("igt_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const std::string kSmallData = " --bags 16 --dim 8 --n-min 48 --n-max 64 ";
const std::string kTinyModel = " --d 16 --set n_heads=2 --set d_att=8 --epochs 2 ";

}  // namespace

TEST(Cli, GenDataIsByteIdenticalForTheSameSeed) {
  const auto dir = work_dir("gen");
  const auto a = run("gen-data --task hybrid --seed 3" + kSmallData + "--out " + (dir / "a").string());
  const auto b = run("gen-data --task hybrid --seed 3" + kSmallData + "--out " + (dir / "b").string());
  ASSERT_EQ(a.rc, 0) << a.out;
  ASSERT_EQ(b.rc, 0) << b.out;
  EXPECT_NE(a.out.find("class 0: 8, class 1: 8"), std::string::npos) << a.out;
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), dir / "a");
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / rel)) << rel;
  }
  EXPECT_EQ(files, 17u);
  fs::remove_all(dir);
}

TEST(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run("gen-data --task bogus --out /tmp/igt_unused").rc, 1);
  EXPECT_EQ(run("train --no-such-flag").rc, 1);
  EXPECT_EQ(run("").rc, 1);
  EXPECT_EQ(run("bench-attn --n-list 8 --d 10 --heads 4").rc, 1);
}

TEST(Cli, MissingDatasetIsARuntimeError) {
  const auto r = run("train --data /nonexistent/manifest.json --out /tmp/igt_unused");
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.out.find("manifest.json"), std::string::npos);
}

TEST(Cli, TrainThenEvalReproducesTestMetrics) {
  const auto dir = work_dir("train");
  ASSERT_EQ(run("gen-data --task spatial-motif" + kSmallData + "--out " + (dir / "data").string()).rc, 0);
  const auto t = run("train --data " + (dir / "data").string() + kTinyModel + "--out " + (dir / "run").string());
  ASSERT_EQ(t.rc, 0) << t.out;
  for (const char* f : {"checkpoint.igt", "config.cfg", "run.json"}) EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  const auto e = run("eval --config " + (dir / "run" / "config.cfg").string() + " --data " +
                     (dir / "data").string() + " --checkpoint " + (dir / "run" / "checkpoint.igt").string() +
                     " --out " + (dir / "eval.json").string());
  ASSERT_EQ(e.rc, 0) << e.out;
  const auto run_json = nlohmann::json::parse(slurp(dir / "run" / "run.json"));
  const auto eval_json = nlohmann::json::parse(slurp(dir / "eval.json"));
  EXPECT_EQ(run_json["test"], eval_json);
  EXPECT_EQ(run_json["optimizer_steps"].get<int>(), 2 * 10);
  fs::remove_all(dir);
}

TEST(Cli, ModeFlagMatchesSetOverride) {
  const auto dir = work_dir("mode");
  ASSERT_EQ(run("gen-data --task long-range" + kSmallData + "--out " + (dir / "data").string()).rc, 0);
  const std::string data = " --data " + (dir / "data").string();
  ASSERT_EQ(run("train" + data + kTinyModel + "--mode no-gcn --out " + (dir / "a").string()).rc, 0);
  ASSERT_EQ(run("train" + data + kTinyModel + "--set mode=no-gcn --out " + (dir / "b").string()).rc, 0);
  auto a = nlohmann::json::parse(slurp(dir / "a" / "run.json"));
  auto b = nlohmann::json::parse(slurp(dir / "b" / "run.json"));
  a.erase("wall_clock_seconds");
  b.erase("wall_clock_seconds");
  EXPECT_EQ(a, b);
  EXPECT_NE(a["config"].get<std::string>().find("mode = no-gcn"), std::string::npos);
  EXPECT_EQ(slurp(dir / "a" / "checkpoint.igt"), slurp(dir / "b" / "checkpoint.igt"));
  fs::remove_all(dir);
}

TEST(Cli, PrecisionEnvironmentOverridesConfig) {
  const auto dir = work_dir("precision");
  ASSERT_EQ(run("gen-data" + kSmallData + "--out " + (dir / "data").string()).rc, 0);
  const auto r = run("train --data " + (dir / "data").string() + kTinyModel + "--precision f32 --out " +
                     (dir / "run").string());
  ASSERT_EQ(r.rc, 0);
  EXPECT_EQ(slurp(dir / "run" / "checkpoint.igt")[4], 4);
  setenv("IGT_PRECISION", "f64", 1);
  const auto r64 = run("train --data " + (dir / "data").string() + kTinyModel + "--precision f32 --out " +
                       (dir / "run64").string());
  unsetenv("IGT_PRECISION");
  ASSERT_EQ(r64.rc, 0) << r64.out;
  EXPECT_EQ(slurp(dir / "run64" / "checkpoint.igt")[4], 8);
  fs::remove_all(dir);
}

TEST(Cli, AblateWritesThreeRows) {
  const auto dir = work_dir("ablate");
  ASSERT_EQ(run("gen-data" + kSmallData + "--out " + (dir / "data").string()).rc, 0);
  const auto r = run("ablate --data " + (dir / "data").string() + " --d 16 --set n_heads=2 --set d_att=8 --epochs 1 --repeats 2 --out " +
                     (dir / "ab").string());
  ASSERT_EQ(r.rc, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(dir / "ab" / "ablation.json"));
  ASSERT_EQ(j["rows"].size(), 3u);
  EXPECT_EQ(j["rows"][0]["backbone"], "full");
  EXPECT_EQ(j["rows"][1]["backbone"], "no-attn");
  EXPECT_EQ(j["rows"][2]["backbone"], "no-gcn");
  for (const auto& row : j["rows"]) EXPECT_EQ(row["runs"].size(), 2u);
  EXPECT_EQ(slurp(dir / "ab" / "ablation.txt").empty(), false);
  fs::remove_all(dir);
}

TEST(Cli, GradcheckPasses) {
  const auto r = run("gradcheck");
  EXPECT_EQ(r.rc, 0) << r.out;
  EXPECT_NE(r.out.find("all 24 checks passed"), std::string::npos) << r.out;
}

TEST(Cli, BenchAttnReportsEquivalenceAndFootprint) {
  const auto r = run("bench-attn --n-list 64,256 --d 32 --heads 4 --block-list 16,32,N");
  EXPECT_EQ(r.rc, 0) << r.out;
  EXPECT_NE(r.out.find("tiled_aux"), std::string::npos);
  const auto r64 = run("bench-attn --n-list 40 --d 16 --heads 2 --block-list 7 --precision f64");
  EXPECT_EQ(r64.rc, 0) << r64.out;
}
