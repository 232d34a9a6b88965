#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "urbanpos/io/solution_csv.hpp"
#include "urbanpos_cli/commands.hpp"

namespace fs = std::filesystem;
using namespace urbanpos;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "urbanpos");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("urbanpos_cli_" + std::to_string(rd()));
    fs::create_directories(dir_);
    std::ofstream(dir_ / "short.json") << R"({"duration": 10, "rate": 2})";
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path simulate(const std::string& name, const std::string& seed = "4") {
    const fs::path out = dir_ / name;
    const Result r = run_cli({"simulate", "--preset", "open-sky", "--config", (dir_ / "short.json").string(),
                          "--seed", seed, "--out-dir", out.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return out;
  }

  fs::path dir_;
};

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string item; std::getline(ss, item, ',');) f.push_back(item);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    rows.push_back(f);
  }
  return rows;
}

}  // namespace

TEST_F(CliTest, SimulateWritesOneLinePerEpoch) {
  const fs::path out = simulate("a");
  for (const char* f : {"rover.jsonl", "ref.jsonl", "truth.jsonl", "prc.jsonl"}) {
    EXPECT_EQ(count_lines(out / f), 20u) << f;
  }
  const auto lock = nlohmann::json::parse(slurp(out / "scenario.lock.json"));
  EXPECT_EQ(lock["epochs"], 20);
  EXPECT_EQ(lock["seed"], 4);
  EXPECT_TRUE(fs::exists(out / "pipeline.json"));
}

TEST_F(CliTest, SimulateIsDeterministic) {
  const fs::path a = simulate("a");
  const fs::path b = simulate("b");
  const fs::path c = simulate("c", "5");
  for (const char* f : {"rover.jsonl", "ref.jsonl", "truth.jsonl", "prc.jsonl"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_NE(slurp(a / "rover.jsonl"), slurp(c / "rover.jsonl"));
}

TEST_F(CliTest, SolveWithoutCorrectionsNeverValidates) {
  const fs::path s = simulate("a");
  const fs::path csv = dir_ / "sol.csv";
  const Result r = run_cli({"solve", "--obs", (s / "rover.jsonl").string(), "--out", csv.string()});
  // No corrections and no known start: nothing is ever validated.
  EXPECT_EQ(r.code, cli::kEmpty) << r.err;
  const auto rows = csv_rows(csv);
  ASSERT_EQ(rows.size(), 20u);
  for (const auto& f : rows) {
    ASSERT_EQ(f.size(), 15u);
    EXPECT_TRUE(f[2] == "BOOT" || f[2] == "OUT" || f[2] == "SM") << f[2];
    EXPECT_NE(f[2], "MF");
    EXPECT_TRUE(f[6].empty() && f[7].empty() && f[8].empty());
  }
}

TEST_F(CliTest, SolveAndEvaluateWithTruth) {
  const fs::path s = simulate("a");
  const fs::path csv = dir_ / "sol.csv";
  const fs::path rep = dir_ / "rep.json";
  Result r = run_cli({"solve", "--obs", (s / "rover.jsonl").string(), "--prc", (s / "prc.jsonl").string(),
                  "--truth", (s / "truth.jsonl").string(), "--out", csv.string(), "--report", rep.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(csv);
  ASSERT_EQ(rows.size(), 20u);
  std::size_t mf = 0;
  for (const auto& f : rows) {
    if (f[2] == "MF" || f[2] == "SM") {
      EXPECT_FALSE(f[3].empty());
      EXPECT_FALSE(f[6].empty());
    }
    mf += f[2] == "MF";
  }
  EXPECT_GT(mf, 0u);
  const auto j = nlohmann::json::parse(slurp(rep));
  EXPECT_EQ(j["epochs"], 20);

  const fs::path eval = dir_ / "eval.json";
  const fs::path geo = dir_ / "track.geojson";
  r = run_cli({"evaluate", "--solution", csv.string(), "--truth", (s / "truth.jsonl").string(), "--out",
           eval.string(), "--geojson", geo.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto e = nlohmann::json::parse(slurp(eval));
  EXPECT_NEAR(e["horizontal"]["rms"].get<double>(), j["horizontal"]["rms"].get<double>(), 1e-3);
  EXPECT_EQ(nlohmann::json::parse(slurp(geo))["type"], "FeatureCollection");
}

TEST_F(CliTest, KnownStartGivesPositionsWithoutCorrections) {
  const fs::path s = simulate("a");
  const fs::path csv = dir_ / "sol.csv";
  const Result r = run_cli({"solve", "--obs", (s / "rover.jsonl").string(), "--config",
                        (s / "pipeline.json").string(), "--out", csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& f : csv_rows(csv)) EXPECT_EQ(f[2], "SM");
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run_cli({}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"bogus"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"simulate", "--out-dir", (dir_ / "x").string()}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"simulate", "--preset", "nowhere", "--out-dir", (dir_ / "x").string()}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"solve", "--out", (dir_ / "o.csv").string()}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"solve", "--obs", (dir_ / "missing.jsonl").string(), "--out", (dir_ / "o.csv").string()}).code,
            cli::kInput);
  std::ofstream(dir_ / "bad.jsonl") << "{\"schema\": 1}\n";
  const Result bad = run_cli({"solve", "--obs", (dir_ / "bad.jsonl").string(), "--out", (dir_ / "o.csv").string()});
  EXPECT_EQ(bad.code, cli::kInput);
  EXPECT_NE(bad.err.find("line 1"), std::string::npos) << bad.err;

  const fs::path s = simulate("a");
  EXPECT_EQ(run_cli({"solve", "--obs", (s / "rover.jsonl").string(), "--known-start", "1,2",
                 "--out", (dir_ / "o.csv").string()})
                .code,
            cli::kUsage);
  // Truth from a different run does not join.
  const fs::path csv = dir_ / "sol.csv";
  run_cli({"solve", "--obs", (s / "rover.jsonl").string(), "--prc", (s / "prc.jsonl").string(), "--out",
       csv.string()});
  std::ofstream(dir_ / "empty_truth.jsonl") << "";
  EXPECT_EQ(run_cli({"evaluate", "--solution", csv.string(), "--truth", (dir_ / "empty_truth.jsonl").string(),
                 "--out", (dir_ / "e.json").string()})
                .code,
            cli::kInput);
}

TEST_F(CliTest, SolveReadsRinexWithSatelliteStates) {
  const Result r = run_cli({"solve", "--obs", std::string(URBANPOS_FIXTURE_DIR) + "/minimal.rnx", "--out",
                        (dir_ / "o.csv").string()});
  EXPECT_EQ(r.code, cli::kUsage);  // RINEX without --satstate
  std::ofstream(dir_ / "states.jsonl") << "";
  const Result r2 = run_cli({"solve", "--obs", std::string(URBANPOS_FIXTURE_DIR) + "/minimal.rnx", "--satstate",
                         (dir_ / "states.jsonl").string(), "--out", (dir_ / "o.csv").string()});
  EXPECT_EQ(r2.code, cli::kEmpty);
  EXPECT_NE(r2.err.find("without state"), std::string::npos);
  EXPECT_EQ(csv_rows(dir_ / "o.csv").size(), 2u);
}
