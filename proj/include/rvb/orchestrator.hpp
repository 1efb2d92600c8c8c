#pragma once

// Multi-epoch game loop for both domains, stopping rules and replay.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rvb/agents.hpp"
#include "rvb/archive.hpp"
#include "rvb/content_env.hpp"
#include "rvb/metrics.hpp"
#include "rvb/records.hpp"

namespace rvb::orchestrator {

// kBaseline is the cooperative comparison: Blue sweeps endpoints without
// red reports, Red only evaluates each resulting state.
enum class RunMode { kRvb, kBaseline };

// kComparisons: C_k == C_{k-1} for count_delay consecutive epochs.
// kEpochs: the same C observed at count_delay consecutive epochs.
enum class ConvergenceMode { kComparisons, kEpochs };

std::string_view to_string(RunMode m);
std::string_view to_string(ConvergenceMode m);

// Content-domain scenario document (kind "content").
struct ContentScenario {
  std::string name;
  std::vector<content::Prompt> tasks;  // sorted by id
  content::TargetStub stub;
  std::vector<agents::Transform> transforms;
  content::GuardRuleSet initial_guard;
  content::FeatureSet harm_tags;
  std::vector<std::string> benign_topics;
  int benign_per_positive = 3;
  double min_support = 0.5;
  double fpr_threshold = 0.05;

  // Throws ScenarioError.
  static ContentScenario load(const nlohmann::json& doc);
};

struct RunConfig {
  std::string name = "run";
  Domain domain = Domain::kCyber;
  RunMode mode = RunMode::kRvb;
  int max_epoch = 5;
  int count_delay = 3;
  ConvergenceMode convergence = ConvergenceMode::kComparisons;
  std::uint64_t seed = 0;
  agents::AgentConfig red;
  agents::AgentConfig blue;
  // Endpoints the baseline defender reviews per epoch.
  int baseline_sweep = 2;
  // Embedded scenario document.
  nlohmann::json scenario;

  // Throws ConfigError (bad fields) or ScenarioError (bad scenario).
  void validate() const;

  nlohmann::json to_json() const;
  // A string "scenario" field is a path resolved against base_dir.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig load_file(const std::filesystem::path& path);
};

// Criteria in order: null production, execution failure, metric
// convergence, epoch limit. Returns the first that fires for the history
// as of its last epoch.
std::optional<StopReason> check_stopping(std::span<const EpochRecord> history, const RunConfig& cfg);

// Runs the game. When `writer` is given, every completed epoch is streamed
// to disk before the next one starts.
archive::RunArchive run_cyber_game(const RunConfig& cfg, archive::ArchiveWriter* writer = nullptr);
archive::RunArchive run_content_game(const RunConfig& cfg, archive::ArchiveWriter* writer = nullptr);
archive::RunArchive run_game(const RunConfig& cfg, archive::ArchiveWriter* writer = nullptr);

RunConfig config_from_header(const nlohmann::json& header);

struct ReplayVerdict {
  bool pass = false;
  bool metrics_only = false;
  std::optional<int> epoch;  // first divergent epoch, when one is known
  std::string detail;
};

// Re-executes a scripted archive and compares it line by line. Archives
// with RemoteLLM agents are checked by metric recomputation only.
ReplayVerdict replay_archive(const std::filesystem::path& path);

}  // namespace rvb::orchestrator
