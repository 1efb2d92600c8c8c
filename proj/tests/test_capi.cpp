#include <gtest/gtest.h>

#include <string>

#include "rvb.h"
#include "test_support.hpp"

namespace {

struct Str {
  char* p = nullptr;
  ~Str() { rvb_string_free(p); }
  std::string s() const { return p ? p : ""; }
};

std::string fx(const std::string& rel) { return rvb::test::fixture(rel).string(); }

}  // namespace

TEST(CApi, RunSummaryAndMetrics) {
  rvb_config* cfg = nullptr;
  ASSERT_EQ(rvb_config_load(fx("cyber_basic.cfg").c_str(), &cfg), RVB_OK);
  rvb_run* run = nullptr;
  ASSERT_EQ(rvb_run_execute(cfg, nullptr, &run), RVB_OK);
  Str kind, summary, csv;
  ASSERT_EQ(rvb_run_stop_kind(run, &kind.p), RVB_OK);
  EXPECT_EQ(kind.s(), "MaxEpochs");
  ASSERT_EQ(rvb_run_summary(run, &summary.p), RVB_OK);
  EXPECT_EQ(summary.s().rfind("stop=MaxEpochs epoch=5", 0), 0u) << summary.s();
  ASSERT_EQ(rvb_run_metrics(run, "tabular", nullptr, &csv.p), RVB_OK);
  EXPECT_EQ(csv.s().rfind("epoch,tdsr,fdsr,sdr,asc\n", 0), 0u);
  Str bad;
  EXPECT_EQ(rvb_run_metrics(run, "xml", nullptr, &bad.p), RVB_ERR_INPUT);
  EXPECT_EQ(bad.p, nullptr);
  rvb_run_free(run);
  rvb_config_free(cfg);
}

TEST(CApi, OverridesAreValidated) {
  rvb_config* cfg = nullptr;
  ASSERT_EQ(rvb_config_load(fx("cyber_basic.cfg").c_str(), &cfg), RVB_OK);
  EXPECT_EQ(rvb_config_set_max_epoch(cfg, 0), RVB_ERR_INPUT);
  EXPECT_EQ(rvb_config_set_count_delay(cfg, 0), RVB_ERR_INPUT);
  ASSERT_EQ(rvb_config_set_max_epoch(cfg, 2), RVB_OK);
  rvb_run* run = nullptr;
  ASSERT_EQ(rvb_run_execute(cfg, nullptr, &run), RVB_OK);
  Str summary;
  ASSERT_EQ(rvb_run_summary(run, &summary.p), RVB_OK);
  EXPECT_NE(summary.s().find("epoch=2"), std::string::npos);
  rvb_run_free(run);
  rvb_config_free(cfg);
}

TEST(CApi, InputErrorsCarryKindAndMessage) {
  rvb_config* cfg = nullptr;
  EXPECT_EQ(rvb_config_load("/nonexistent/x.cfg", &cfg), RVB_ERR_INPUT);
  EXPECT_EQ(cfg, nullptr);
  EXPECT_STRNE(rvb_last_error(), "");
  EXPECT_EQ(rvb_config_load(nullptr, &cfg), RVB_ERR_INPUT);
  rvb_run* run = nullptr;
  EXPECT_EQ(rvb_run_load("/nonexistent/archive.jsonl", &run), RVB_ERR_INPUT);
  EXPECT_STREQ(rvb_last_error_kind(), "ArchiveIOError");
  Str s;
  EXPECT_EQ(rvb_run_summary(nullptr, &s.p), RVB_ERR_INPUT);
}

TEST(CApi, ExecutionFailureIsStillOk) {
  rvb_config* cfg = nullptr;
  ASSERT_EQ(rvb_config_load(fx("execfail.cfg").c_str(), &cfg), RVB_OK);
  rvb_run* run = nullptr;
  ASSERT_EQ(rvb_run_execute(cfg, nullptr, &run), RVB_OK);
  Str kind;
  ASSERT_EQ(rvb_run_stop_kind(run, &kind.p), RVB_OK);
  EXPECT_EQ(kind.s(), "ExecutionFailure");
  rvb_run_free(run);
  rvb_config_free(cfg);
}

TEST(CApi, SaveLoadReplayExport) {
  const auto dir = rvb::test::scratch("capi");
  rvb_config* cfg = nullptr;
  ASSERT_EQ(rvb_config_load(fx("content_basic.cfg").c_str(), &cfg), RVB_OK);
  rvb_run* run = nullptr;
  ASSERT_EQ(rvb_run_execute(cfg, (dir / "run").c_str(), &run), RVB_OK);
  rvb_run_free(run);
  rvb_config_free(cfg);

  int pass = 0;
  Str detail;
  ASSERT_EQ(rvb_replay((dir / "run").c_str(), &pass, &detail.p), RVB_OK);
  EXPECT_EQ(pass, 1) << detail.s();

  rvb_run* loaded = nullptr;
  ASSERT_EQ(rvb_run_load((dir / "run").c_str(), &loaded), RVB_OK);
  ASSERT_EQ(rvb_run_export(loaded, (dir / "out").c_str(), "inner"), RVB_OK);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "metrics.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "crde.csv"));
  Str report;
  ASSERT_EQ(rvb_run_report(loaded, nullptr, fx("price_table.json").c_str(), &report.p), RVB_OK);
  EXPECT_FALSE(report.s().empty());
  rvb_run_free(loaded);
}

TEST(CApi, ValidateScenario) {
  Str summary;
  ASSERT_EQ(rvb_validate_scenario(fx("scenarios/pharmacy.json").c_str(), &summary.p), RVB_OK);
  EXPECT_FALSE(summary.s().empty());
  Str none;
  EXPECT_EQ(rvb_validate_scenario(fx("price_table.json").c_str(), &none.p), RVB_ERR_INPUT);
  EXPECT_STREQ(rvb_last_error_kind(), "ScenarioError");
}
