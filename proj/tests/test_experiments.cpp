#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "radshoot/errors.hpp"
#include "radshoot/experiments.hpp"

using namespace radshoot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("radshoot-test-" + name);
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig example(int ex, const fs::path& out) {
  auto c = builtin_example(ex);
  c.output.directory = out.string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t data_rows(const fs::path& csv) {
  const auto text = slurp(csv);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) - 1;
}

}  // namespace

TEST(Verify, ExitCodesFollowTheVerdicts) {
  const auto out = scratch("verify");
  std::ostringstream log;
  EXPECT_EQ(cmd_verify(example(1, out), log), kExitOk);
  EXPECT_EQ(cmd_verify(example(2, out), log), kExitOk);
  EXPECT_EQ(cmd_verify(example(3, out), log), kExitFail);
  EXPECT_NE(log.str().find("H6  fail"), std::string::npos);
  const auto json = slurp(out / "example-3-verify.json");
  EXPECT_NE(json.find("\"overall\""), std::string::npos);
}

TEST(GroundStates, RowCountsPerExample) {
  const auto out = scratch("gs");
  std::ostringstream log;
  for (auto [ex, lo, hi] : {std::tuple{1, 1u, 1u}, {2, 3u, 99u}, {4, 5u, 99u}}) {
    ASSERT_EQ(cmd_ground_states(example(ex, out), log), kExitOk);
    const std::string name = builtin_example(ex).name;
    const auto rows = data_rows(out / (name + "-ground-states.csv"));
    EXPECT_GE(rows, lo) << ex;
    EXPECT_LE(rows, hi) << ex;
    EXPECT_EQ(data_rows(out / (name + "-undetermined.csv")), 0u) << ex;
    EXPECT_TRUE(fs::exists(out / (name + "-ground-states.svg")));
    EXPECT_TRUE(fs::exists(out / (name + "-ground-states.json")));
  }
}

TEST(GroundStates, OutputsAreByteIdenticalAcrossRuns) {
  const auto a = scratch("det-a"), b = scratch("det-b");
  std::ostringstream log;
  auto ca = example(2, a);
  auto cb = example(2, b);
  ca.name = cb.name = "det";
  ASSERT_EQ(cmd_ground_states(ca, log), kExitOk);
  ASSERT_EQ(cmd_ground_states(cb, log), kExitOk);
  for (const char* f : {"det-ground-states.csv", "det-scan.csv", "det-ground-states.json", "det-ground-states.svg"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  ASSERT_EQ(cmd_sweep(ca, log), kExitOk);
  ASSERT_EQ(cmd_sweep(cb, log), kExitOk);
  EXPECT_EQ(slurp(a / "det-sweep.csv"), slurp(b / "det-sweep.csv"));
}

TEST(Sweep, TagFlipsFromNToPAsAGrows) {
  const auto rows = run_sweep(builtin_example(2));
  ASSERT_EQ(rows.size(), 20u);
  EXPECT_EQ(rows.front().tag, Tag::N);
  EXPECT_EQ(rows.back().tag, Tag::P);
  // A single flip: once P, every larger A stays P.
  const auto first_p = std::find_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.tag == Tag::P; });
  EXPECT_TRUE(std::all_of(first_p, rows.end(), [](const SweepRow& r) { return r.tag == Tag::P; }));
  for (const auto& r : rows) EXPECT_DOUBLE_EQ(r.probe, r.alpha1 + 2.0 * r.eps);
}

TEST(Sweep, SinglePointGivesOneRow) {
  auto c = builtin_example(2);
  c.sweep.amplitudes = {10.0};
  c.sweep.eps = {0.1};
  const auto rows = run_sweep(c);
  ASSERT_EQ(rows.size(), 1u);
  std::ostringstream os;
  write_sweep_csv(os, rows);
  const std::string text = os.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST(Sweep, EpsilonGuardAgainstGamma) {
  auto c = builtin_example(2);
  c.gamma = 9.0;  // (gamma - alpha*)/4 is about 0.082
  c.sweep.amplitudes = {10.0};
  c.sweep.eps = {0.05, 0.1};
  EXPECT_THROW(run_sweep(c), ConfigError);
  c.sweep.eps = {0.05};
  EXPECT_EQ(run_sweep(c).size(), 1u);
  c.blocks.clear();
  EXPECT_THROW(run_sweep(c), ConfigError);
}

TEST(Sweep, PerPointFailuresAreRecordedInline) {
  auto c = builtin_example(2);
  c.blocks[0].kind = AffineSineBlock{0.5, 0.0, 1.0};  // 0.5 + sin(s) dips below zero
  c.sweep.amplitudes = {1.0, 2.0};
  c.sweep.eps = {0.1};
  const auto rows = run_sweep(c);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) EXPECT_FALSE(r.error.empty());
  std::ostringstream os;
  write_sweep_csv(os, rows);
  EXPECT_NE(os.str().find('"'), std::string::npos);
}

TEST(Reproduce, ExamplesTwoAndFourPass) {
  for (int ex : {2, 4}) {
    const auto checks = reproduce_checks(ex, SolverSection{});
    for (const auto& c : checks) EXPECT_TRUE(c.ok) << ex << ": " << c.name << " " << c.actual;
  }
  EXPECT_THROW(reproduce_checks(1, SolverSection{}), ConfigError);
}

TEST(Reproduce, ExampleThreeFailsOnlyOnTheConstant) {
  const auto checks = reproduce_checks(3, SolverSection{});
  std::vector<std::string> failed;
  for (const auto& c : checks) {
    if (!c.ok) failed.push_back(c.name);
  }
  ASSERT_EQ(failed.size(), 1u);
  EXPECT_EQ(failed[0], "C(4,5)");
  std::ostringstream os;
  write_report(os, "example 3", checks);
  EXPECT_NE(os.str().find("- 0.5\n+ 0.93"), std::string::npos);
  const auto out = scratch("repro");
  std::ostringstream log;
  EXPECT_EQ(cmd_reproduce(3, example(1, out), log), kExitFail);
  EXPECT_TRUE(fs::exists(out / "reproduce-example-3.txt"));
}

TEST(Tune, WritesAChainThatRechecks) {
  const auto out = scratch("tune");
  std::ostringstream log;
  const auto c = example(1, out);
  ASSERT_EQ(cmd_tune(c, 4, log), kExitOk);
  const auto path = out / "base-tune-k4.json";
  ASSERT_TRUE(fs::exists(path));
  EXPECT_EQ(cmd_recheck_chain(path, c, log), kExitOk);
  EXPECT_THROW(run_tune(c, 1), ConfigError);
}

TEST(InitExamples, WrittenFilesParseBack) {
  const auto out = scratch("init");
  std::ostringstream log;
  ASSERT_EQ(cmd_init_examples(out, log), kExitOk);
  for (int ex = 1; ex <= 4; ++ex) {
    const auto c = ExperimentConfig::load((out / ("example-" + std::to_string(ex) + ".ini")).string());
    EXPECT_EQ(c.emit(), builtin_example(ex).emit());
  }
}

TEST(Classify, UndeterminedExitsThree) {
  const auto out = scratch("classify");
  std::ostringstream log;
  auto c = example(1, out);
  EXPECT_EQ(cmd_classify(c, 3.0, log), kExitOk);
  EXPECT_GT(data_rows(out / "base-classify.csv"), 10u);
  c.solver.r_max = 1e-3;
  EXPECT_EQ(cmd_classify(c, 20.0, log), kExitInconclusive);
}
