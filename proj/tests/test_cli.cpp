#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "test_support.hpp"

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args) {
  const auto log = rvb::test::scratch("cli-out") / "stdout.txt";
  const std::string cmd = std::string(RVB_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, rvb::test::read_file(log)};
}

std::string fx(const std::string& rel) { return rvb::test::fixture(rel).string(); }

}  // namespace

TEST(Cli, RunMetricsReplayExport) {
  const auto dir = rvb::test::scratch("cli");
  const auto run_dir = (dir / "run").string();
  auto r = cli("run --config " + fx("cyber_basic.cfg") + " --out " + run_dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("stop=MaxEpochs epoch=5"), std::string::npos) << r.out;

  r = cli("metrics " + run_dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("epoch,tdsr,fdsr,sdr,asc\n", 0), 0u) << r.out;

  r = cli("metrics " + run_dir + " --format records");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\"metric\":\"tdsr\""), std::string::npos) << r.out;

  r = cli("replay " + run_dir);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);

  r = cli("export " + run_dir + " --out " + (dir / "export").string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "export" / "metrics.csv"));

  r = cli("report " + run_dir + " --prices " + fx("price_table.json"));
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("run --config /nonexistent.cfg --out /tmp/none").code, 2);
  EXPECT_EQ(cli("bogus").code, 2);
  EXPECT_EQ(cli("metrics /nonexistent").code, 2);
  const auto dir = rvb::test::scratch("cli-exec");
  EXPECT_EQ(cli("run --config " + fx("execfail.cfg") + " --out " + (dir / "run").string()).code, 3);
  EXPECT_EQ(cli("validate-scenario " + fx("scenarios/latent.json")).code, 0);
}

TEST(Cli, SeedOverrideChangesDefaultDirectory) {
  const auto dir = rvb::test::scratch("cli-seed");
  const std::string cmd = "cd " + dir.string() + " && " + RVB_CLI_PATH + " run --config " + fx("nullprod.cfg") +
                          " --seed 3 > /dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "runs" / "nullprod-seed3" / "archive.jsonl"));
}
