#include <gtest/gtest.h>

#include "rvb/archive.hpp"
#include "rvb/errors.hpp"
#include "rvb/metrics.hpp"
#include "rvb/orchestrator.hpp"
#include "test_support.hpp"

using namespace rvb;
using namespace rvb::orchestrator;
using nlohmann::json;

namespace {

// History from a C sequence C_0, C_1, ..., C_k.
std::vector<EpochRecord> history(const std::vector<int>& c) {
  std::vector<EpochRecord> out;
  for (std::size_t k = 1; k < c.size(); ++k) {
    EpochRecord r;
    r.epoch = static_cast<int>(k);
    r.c_before = c[k - 1];
    r.c_after = c[k];
    out.push_back(r);
  }
  return out;
}

std::vector<double> column(const archive::RunArchive& run, std::optional<double> metrics::Row::*field) {
  std::vector<double> out;
  for (const auto& row : metrics::compute(run).rows) out.push_back(row.*field ? *(row.*field) : -1.0);
  return out;
}

void expect_near_all(const std::vector<double>& got, const std::vector<double>& want) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12) << "row " << i;
}

}  // namespace

TEST(Stopping, ConvergenceAfterDelayComparisons) {
  RunConfig cfg;
  cfg.max_epoch = 10;
  cfg.count_delay = 3;
  const auto h = history({10, 7, 7, 7, 7});
  EXPECT_FALSE(check_stopping(std::span(h).first(3), cfg));
  auto s = check_stopping(h, cfg);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->kind, StopKind::kMetricConvergence);
  EXPECT_EQ(s->epoch, 4);
}

TEST(Stopping, EpochsModeCountsObservations) {
  RunConfig cfg;
  cfg.max_epoch = 10;
  cfg.count_delay = 3;
  cfg.convergence = ConvergenceMode::kEpochs;
  const auto h = history({10, 7, 7, 7});
  auto s = check_stopping(h, cfg);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->kind, StopKind::kMetricConvergence);
  EXPECT_EQ(s->epoch, 3);
}

TEST(Stopping, MaxEpochsAndPrecedence) {
  RunConfig cfg;
  cfg.max_epoch = 3;
  cfg.count_delay = 3;
  auto h = history({9, 8, 7, 6});
  EXPECT_EQ(check_stopping(h, cfg)->kind, StopKind::kMaxEpochs);
  EXPECT_FALSE(check_stopping(std::span(h).first(2), cfg));

  h.back().red_null = true;
  h.back().blue_null = true;
  EXPECT_EQ(check_stopping(h, cfg)->kind, StopKind::kNullProduction);

  h.back().red_null = false;
  h.back().failure = "RemediationFailure: boom";
  EXPECT_EQ(check_stopping(h, cfg)->kind, StopKind::kExecutionFailure);
  EXPECT_FALSE(check_stopping({}, cfg));
}

TEST(Fixtures, CyberTrajectory) {
  const auto run = run_game(test::load_config("cyber_basic.cfg"));
  ASSERT_TRUE(run.stop);
  EXPECT_EQ(run.stop->kind, StopKind::kMaxEpochs);
  EXPECT_EQ(run.stop->epoch, 5);
  expect_near_all(column(run, &metrics::Row::tdsr), {0.2, 0.4, 0.6, 0.8, 1.0});
  expect_near_all(column(run, &metrics::Row::sdr), {0, 0, 0, 0, 0});
  std::vector<int> asc;
  for (const auto& row : metrics::compute(run).rows) asc.push_back(*row.asc);
  EXPECT_EQ(asc, (std::vector<int>{2, 4, 6, 8, 10}));
  for (const auto& r : run.records) {
    EXPECT_LE(r.red_turns, 30);
    EXPECT_LE(r.c_after, r.c_before);
  }
}

TEST(Fixtures, DestructiveDefenderShowsServiceDisruption) {
  const auto run = run_game(test::load_config("cyber_destructive.cfg"));
  const auto tdsr = column(run, &metrics::Row::tdsr);
  const auto sdr = column(run, &metrics::Row::sdr);
  ASSERT_EQ(tdsr.size(), 5u);
  // Endpoint removal only breaks the service once a required page goes.
  expect_near_all(tdsr, {0.2, 0.4, 0.0, 0.0, 0.0});
  expect_near_all(sdr, {0.0, 0.0, 0.7, 0.9, 1.0});
  const auto fdsr = column(run, &metrics::Row::fdsr);
  EXPECT_GT(fdsr.back(), tdsr.back());
}

TEST(Fixtures, BaselineUnion) {
  const auto run = run_game(test::load_config("cyber_baseline.cfg"));
  const auto s = metrics::compute(run);
  ASSERT_TRUE(s.union_rates);
  EXPECT_NEAR(s.union_rates->tdsr, 0.4, 1e-12);
  EXPECT_NEAR(s.union_rates->fdsr, 1.0, 1e-12);
  EXPECT_NEAR(s.union_rates->sdr, 0.6, 1e-12);
}

TEST(Fixtures, EachStopKindFires) {
  struct Case {
    const char* config;
    StopKind kind;
    int epoch;
  };
  for (const auto& c : {Case{"convergence.cfg", StopKind::kMetricConvergence, 4},
                        Case{"nullprod.cfg", StopKind::kNullProduction, 2},
                        Case{"execfail.cfg", StopKind::kExecutionFailure, 2},
                        Case{"cyber_basic.cfg", StopKind::kMaxEpochs, 5}}) {
    const auto run = run_game(test::load_config(c.config));
    ASSERT_TRUE(run.stop) << c.config;
    EXPECT_EQ(run.stop->kind, c.kind) << c.config;
    EXPECT_EQ(run.stop->epoch, c.epoch) << c.config;
    EXPECT_EQ(static_cast<int>(run.records.size()), c.epoch) << c.config;
  }
}

TEST(Fixtures, ConvergenceHoldsAtSeven) {
  const auto run = run_game(test::load_config("convergence.cfg"));
  EXPECT_EQ(run.records.back().c_after, 7);
}

TEST(Fixtures, ExecutionFailureEpochIsArchived) {
  const auto run = run_game(test::load_config("execfail.cfg"));
  ASSERT_TRUE(run.records.back().failure);
  EXPECT_TRUE(run.records.back().patches.empty());
  EXPECT_NE(run.records.back().failure->find("RemediationFailure"), std::string::npos);
}

TEST(Fixtures, LatentVulnerabilitiesRaiseAsc) {
  const auto run = run_game(test::load_config("latent.cfg"));
  std::vector<int> asc;
  for (const auto& row : metrics::compute(run).rows) asc.push_back(*row.asc);
  EXPECT_EQ(asc, (std::vector<int>{5, 7, 7, 7, 7}));
  EXPECT_EQ(run.stop->kind, StopKind::kMetricConvergence);
}

TEST(Fixtures, ContentTrajectory) {
  const auto run = run_game(test::load_config("content_basic.cfg"));
  ASSERT_TRUE(run.stop);
  EXPECT_EQ(run.stop->kind, StopKind::kMaxEpochs);
  expect_near_all(column(run, &metrics::Row::dsr), {0.0, 0.25, 0.5, 0.75});
  expect_near_all(column(run, &metrics::Row::aat), {1, 2, 3, 4});
  for (const auto fpr : column(run, &metrics::Row::fpr)) EXPECT_LE(fpr, 0.05);
  for (std::size_t i = 0; i < run.records.size(); ++i) {
    EXPECT_EQ(run.records[i].guard.version(), static_cast<int>(i) + 1);
    if (i > 0) {
      // Additive updates: every earlier rule survives.
      for (const auto& r : run.records[i - 1].guard.rules()) EXPECT_TRUE(run.records[i].guard.has_predicate(r.predicate));
    }
  }
  for (const auto& cell : metrics::compute(run).crde) {
    ASSERT_TRUE(cell.value);
    EXPECT_EQ(*cell.value, 1.0);
  }
}

TEST(Fixtures, ContentCBeforeStartsAtTaskCount) {
  const auto run = run_game(test::load_config("content_basic.cfg"));
  EXPECT_EQ(run.records.front().c_before, 4);
  for (std::size_t i = 1; i < run.records.size(); ++i) EXPECT_EQ(run.records[i].c_before, run.records[i - 1].c_after);
}

TEST(Digest, ChainsOverHistory) {
  const auto run = run_game(test::load_config("cyber_basic.cfg"));
  for (std::size_t k = 0; k < run.records.size(); ++k) {
    const auto& r = run.records[k];
    EXPECT_EQ(r.digest_before, encode_state(std::span(run.records).first(k)));
    EXPECT_EQ(r.digest_after, encode_state(std::span(run.records).first(k + 1)));
    EXPECT_EQ(r.digest_after.round, r.epoch);
    if (k > 0) {
      EXPECT_EQ(r.digest_before, run.records[k - 1].digest_after);
    }
  }
}

TEST(Determinism, SameSeedSameBytes) {
  for (const char* name : {"cyber_basic.cfg", "cyber_baseline.cfg", "content_basic.cfg", "latent.cfg"}) {
    const auto cfg = test::load_config(name);
    EXPECT_EQ(archive::serialize(run_game(cfg)), archive::serialize(run_game(cfg))) << name;
  }
}

TEST(Replay, ReproducesAndNamesFirstDivergentEpoch) {
  const auto cfg = test::load_config("cyber_basic.cfg");
  const auto dir = test::scratch("replay");
  {
    archive::ArchiveWriter writer(dir, archive::make_header(cfg.name, cfg.domain, cfg.seed, cfg.to_json()));
    run_game(cfg, &writer);
  }
  auto verdict = replay_archive(dir);
  EXPECT_TRUE(verdict.pass) << verdict.detail;
  EXPECT_FALSE(verdict.metrics_only);

  // Flip one bit inside epoch 3.
  const auto file = dir / "archive.jsonl";
  auto text = test::read_file(file);
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) pos = text.find('\n', pos) + 1;
  pos = text.find("\"c_after\"", pos);
  ASSERT_NE(pos, std::string::npos);
  text[pos + 3] ^= 0x01;
  test::write_file(file, text);
  verdict = replay_archive(dir);
  EXPECT_FALSE(verdict.pass);
  ASSERT_TRUE(verdict.epoch);
  EXPECT_EQ(*verdict.epoch, 3);
  EXPECT_NE(verdict.detail.find("epoch 3"), std::string::npos) << verdict.detail;
}

TEST(Replay, ContentArchiveReproduces) {
  const auto cfg = test::load_config("content_basic.cfg");
  const auto dir = test::scratch("replay-content");
  archive::save_run(dir, run_game(cfg));
  EXPECT_TRUE(replay_archive(dir).pass);
}

TEST(Config, RoundTripsThroughHeader) {
  const auto cfg = test::load_config("latent.cfg");
  const auto back = config_from_header(archive::make_header(cfg.name, cfg.domain, cfg.seed, cfg.to_json()));
  EXPECT_EQ(back.to_json(), cfg.to_json());
}

TEST(Config, BadFieldsRejected) {
  auto j = json::parse(test::read_file(test::fixture("cyber_basic.cfg")));
  auto kind = [&](const json& doc) {
    try {
      RunConfig::from_json(doc, test::fixture("")).validate();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kInvalidSpace;  // sentinel: nothing thrown
  };
  auto bad = j;
  bad["max_epoch"] = 0;
  EXPECT_EQ(kind(bad), ErrorKind::kConfigError);
  bad = j;
  bad["count_delay"] = -1;
  EXPECT_EQ(kind(bad), ErrorKind::kConfigError);
  bad = j;
  bad["domain"] = "chemistry";
  EXPECT_EQ(kind(bad), ErrorKind::kConfigError);
  bad = j;
  bad["scenario"] = "scenarios/missing.json";
  EXPECT_NE(kind(bad), ErrorKind::kInvalidSpace);
  EXPECT_THROW(RunConfig::load_file(test::fixture("nope.cfg")), Error);
}

TEST(ContentScenario, Validation) {
  auto doc = json::parse(test::read_file(test::fixture("scenarios/guardrail.json")));
  EXPECT_EQ(ContentScenario::load(doc).tasks.size(), 4u);
  auto bad = doc;
  bad["min_support"] = 0.0;
  EXPECT_THROW(ContentScenario::load(bad), Error);
  bad = doc;
  bad["tasks"] = json::array();
  EXPECT_THROW(ContentScenario::load(bad), Error);
}
