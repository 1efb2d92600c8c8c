#pragma once

// Per-epoch artifacts shared by the orchestrator, the archive and metrics.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rvb/content_env.hpp"
#include "rvb/cyber_env.hpp"
#include "rvb/game_core.hpp"

namespace rvb {

enum class Domain { kCyber, kContent };

std::string_view to_string(Domain d);
Domain domain_from_string(std::string_view text);

struct AttackLogEntry {
  std::string file;
  std::string code;
  std::string bug;
  std::string payload;

  friend bool operator==(const AttackLogEntry&, const AttackLogEntry&) = default;
};

struct TokenUsage {
  std::string agent;
  std::string model;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  bool usage_missing = false;

  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct CyberFinding {
  cyber::Exploit exploit;
  AttackLogEntry log;
  // Planner / executor / reporter trace labels.
  std::vector<std::string> phases;

  friend bool operator==(const CyberFinding&, const CyberFinding&) = default;
};

struct AppliedPatch {
  cyber::Patch patch;
  int attempts = 1;

  friend bool operator==(const AppliedPatch&, const AppliedPatch&) = default;
};

struct CaseOutcome {
  std::string case_id;
  cyber::CyberOutcome outcome;

  friend bool operator==(const CaseOutcome&, const CaseOutcome&) = default;
};

struct JailbreakEpisode {
  std::string task_id;
  int attempts_used = 0;
  // Inner attempts spent inside the outer round that ended the episode.
  int final_inner_attempts = 0;
  bool success = false;
  content::Prompt final_prompt;
  std::vector<std::string> strategy_trace;

  friend bool operator==(const JailbreakEpisode&, const JailbreakEpisode&) = default;
};

struct EpochRecord {
  Domain domain = Domain::kCyber;
  int epoch = 0;
  game::StateDigest digest_before;
  game::StateDigest digest_after;
  int c_before = 0;
  int c_after = 0;
  bool red_null = false;
  bool blue_null = false;
  std::optional<std::string> failure;
  std::vector<TokenUsage> token_usage;

  // Cyber domain.
  std::vector<CyberFinding> red_findings;
  std::vector<AppliedPatch> patches;
  std::vector<CaseOutcome> outcomes;
  int red_turns = 0;
  std::string red_belief;
  double red_entropy = 0.0;

  // Content domain.
  std::vector<JailbreakEpisode> episodes;
  std::vector<content::GuardRule> rules_added;
  std::vector<content::RuleVerdict> rules_rejected;
  std::vector<content::Prompt> benign;
  content::GuardRuleSet guard;

  // State-mutating actions of this epoch in canonical form.
  std::vector<game::StateMutation> mutations() const;
};

// Digest over every mutation in the history; round = last epoch index.
game::StateDigest encode_state(std::span<const EpochRecord> history);

enum class StopKind { kNullProduction, kExecutionFailure, kMetricConvergence, kMaxEpochs };

std::string_view to_string(StopKind k);
StopKind stop_kind_from_string(std::string_view text);

struct StopReason {
  StopKind kind = StopKind::kMaxEpochs;
  int epoch = 0;
  std::string detail;

  friend bool operator==(const StopReason&, const StopReason&) = default;
};

// JSON codecs. Key names are part of the archive schema.
void to_json(nlohmann::json& j, const AttackLogEntry& e);
void from_json(const nlohmann::json& j, AttackLogEntry& e);
void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);
void to_json(nlohmann::json& j, const StopReason& s);
void from_json(const nlohmann::json& j, StopReason& s);
void to_json(nlohmann::json& j, const TokenUsage& u);
void from_json(const nlohmann::json& j, TokenUsage& u);

nlohmann::json prompt_to_json(const content::Prompt& p);
content::Prompt prompt_from_json(const nlohmann::json& j);
nlohmann::json rule_to_json(const content::GuardRule& r);
content::GuardRule rule_from_json(const nlohmann::json& j);
nlohmann::json guard_to_json(const content::GuardRuleSet& g);
content::GuardRuleSet guard_from_json(const nlohmann::json& j);
nlohmann::json exploit_to_json(const cyber::Exploit& e);
cyber::Exploit exploit_from_json(const nlohmann::json& j);
nlohmann::json patch_to_json(const cyber::Patch& p);
cyber::Patch patch_from_json(const nlohmann::json& j);

}  // namespace rvb
