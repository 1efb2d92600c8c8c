#pragma once

// Red and Blue agents. Scripted agents are deterministic state machines;
// RemoteLLM agents route their decisions through the chat-completion adapter.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rvb/content_env.hpp"
#include "rvb/cyber_env.hpp"
#include "rvb/game_core.hpp"
#include "rvb/llm_adapter.hpp"
#include "rvb/records.hpp"

namespace rvb::agents {

enum class AgentKind { kScriptedRed, kScriptedBlue, kScriptedJailbreaker, kScriptedGuardPatcher, kRemoteLLM };

std::string_view to_string(AgentKind k);
AgentKind agent_kind_from_string(std::string_view text);

// Scripted defender behaviour. kDestructive deletes whole endpoints and
// exists to reproduce the service-disruption baseline.
enum class BlueStyle { kSanitize, kDestructive, kRewrite };

std::string_view to_string(BlueStyle s);
BlueStyle blue_style_from_string(std::string_view text);

struct TurnLimits {
  int red_max_turns = 30;
  int blue_max_retries = 3;
  int outer_rounds = 3;
  int inner_attempts = 10;

  void validate() const;
};

struct AgentConfig {
  AgentKind kind = AgentKind::kScriptedRed;
  std::string role_prompt;
  TurnLimits limits;
  std::uint64_t seed = 0;
  BlueStyle style = BlueStyle::kSanitize;
  // 0 = no cap on findings reported per epoch.
  int max_findings_per_epoch = 0;
  std::string model = "scripted";
  double temperature = 0.0;

  nlohmann::json to_json() const;
  static AgentConfig from_json(const nlohmann::json& j);
};

// Shared bookkeeping for token counters and raw adapter exchanges.
class AgentBase {
 public:
  virtual ~AgentBase() = default;
  std::vector<TokenUsage> drain_usage();
  std::vector<llm::Exchange> drain_exchanges();

 protected:
  void record(const llm::Completion& c, std::vector<llm::Exchange> exchanges);

 private:
  std::vector<TokenUsage> usage_;
  std::vector<llm::Exchange> exchanges_;
};

// ---------------------------------------------------------------------------
// Cyber red

class CyberRed : public AgentBase {
 public:
  // Observes the post-transition state S_k before the epoch's probing.
  virtual void begin_epoch(const cyber::Environment& env) = 0;
  // One finding, or nullopt when nothing consistent remains or the turn
  // budget is spent.
  virtual std::optional<CyberFinding> step(const cyber::Environment& env) = 0;
  virtual int turns_used() const = 0;
  virtual std::optional<game::Belief> belief() const { return std::nullopt; }
};

// Belief-driven attacker. Hypotheses are candidate exploits ("the weak point
// is v"); U(a_x, v) = payoff(x) if x == v else 0, so SEU(a_x) = payoff(x) b(x).
// Findings that still verify after the defender's turn are reported again.
class ScriptedCyberRed final : public CyberRed {
 public:
  ScriptedCyberRed(const cyber::Environment& pristine, AgentConfig config);

  void begin_epoch(const cyber::Environment& env) override;
  std::optional<CyberFinding> step(const cyber::Environment& env) override;
  int turns_used() const override { return turns_; }
  std::optional<game::Belief> belief() const override { return belief_; }

  const game::UtilityTable& utilities() const { return utilities_; }
  // Action ids the agent would choose among right now.
  std::vector<game::ActionId> candidate_actions(const cyber::Environment& env) const;
  const std::vector<game::ActionId>& proposals() const { return proposals_; }
  bool exhausted() const { return exhausted_; }

 private:
  bool filter_out(const std::vector<std::string>& blocked, int round);

  AgentConfig config_;
  std::vector<cyber::Exploit> universe_;
  std::vector<CyberFinding> templates_;
  game::UtilityTable utilities_;
  game::Belief belief_;
  std::vector<std::string> tried_this_epoch_;
  std::vector<std::string> last_epoch_findings_;
  std::vector<game::ActionId> proposals_;
  int turns_ = 0;
  int findings_this_epoch_ = 0;
  int round_ = 0;
  bool exhausted_ = false;
};

// Attack log the scripted attacker files for a successful exploit of a
// pristine-scenario parameter.
AttackLogEntry make_attack_log(const cyber::Endpoint& ep, const cyber::ParamSpec& p);

// Free-function form: one scripted probing step.
std::optional<CyberFinding> red_cyber_step(CyberRed& agent, const cyber::Environment& env);

// ---------------------------------------------------------------------------
// Cyber blue

class CyberBlue : public AgentBase {
 public:
  // Throws RemediationFailure after the retry budget is exhausted.
  virtual AppliedPatch remediate(const AttackLogEntry& log, const cyber::Environment& env) = 0;
  // Report-free remediation used by the cooperative baseline.
  virtual std::vector<cyber::Patch> sweep(const cyber::Environment& env, int max_endpoints,
                                          const std::vector<std::string>& already_touched);
};

// Localizes the parameter from the payload ("id=1 OR 1=1" -> "id") or from a
// quoted name in the bug text.
std::optional<std::string> localize_param(const AttackLogEntry& log);

// Scripted remediation. Tries the reported path, then up to
// `limits.blue_max_retries` fallback localizations.
AppliedPatch blue_cyber_step(const AgentConfig& config, const AttackLogEntry& log,
                             const cyber::Environment& env);

class ScriptedCyberBlue final : public CyberBlue {
 public:
  explicit ScriptedCyberBlue(AgentConfig config) : config_(std::move(config)) {}
  AppliedPatch remediate(const AttackLogEntry& log, const cyber::Environment& env) override {
    return blue_cyber_step(config_, log, env);
  }
  std::vector<cyber::Patch> sweep(const cyber::Environment& env, int max_endpoints,
                                  const std::vector<std::string>& already_touched) override;

 private:
  AgentConfig config_;
};

// ---------------------------------------------------------------------------
// Content red

// A prompt rewrite principle: word substitutions, then an optional prefix
// and suffix.
struct Transform {
  std::string id;
  std::string prefix;
  std::string suffix;
  std::vector<std::pair<std::string, std::string>> substitutions;

  std::string apply(std::string_view text) const;
};

std::vector<Transform> transforms_from_json(const nlohmann::json& j);

class Jailbreaker : public AgentBase {
 public:
  virtual JailbreakEpisode run_episode(const content::Prompt& task, const content::GuardRuleSet& guard,
                                       const content::TargetStub& stub) = 0;
};

// Composition-of-principles attacker. Outer round r tries compositions of
// r + 1 transforms; belief over "the guard has a pattern for transform t" is
// updated with soft evidence after every blocked attempt.
JailbreakEpisode red_jailbreak_episode(const AgentConfig& config, const content::Prompt& task,
                                       const content::GuardRuleSet& guard,
                                       const content::TargetStub& stub,
                                       std::span<const Transform> library);

class ScriptedJailbreaker final : public Jailbreaker {
 public:
  ScriptedJailbreaker(AgentConfig config, std::vector<Transform> library)
      : config_(std::move(config)), library_(std::move(library)) {}
  JailbreakEpisode run_episode(const content::Prompt& task, const content::GuardRuleSet& guard,
                               const content::TargetStub& stub) override {
    return red_jailbreak_episode(config_, task, guard, stub, library_);
  }

 private:
  AgentConfig config_;
  std::vector<Transform> library_;
};

// ---------------------------------------------------------------------------
// Content blue

class GuardPatcher : public AgentBase {
 public:
  // Candidate rules for the given bypasses. Throws NullProduction.
  virtual std::vector<content::GuardRule> propose(const content::GuardRuleSet& guard,
                                                  std::span<const content::Prompt> attacks,
                                                  int round) = 0;
};

class ScriptedGuardPatcher final : public GuardPatcher {
 public:
  explicit ScriptedGuardPatcher(double min_support) : min_support_(min_support) {}
  std::vector<content::GuardRule> propose(const content::GuardRuleSet& guard,
                                          std::span<const content::Prompt> attacks,
                                          int round) override {
    return content::augment_rules(guard, attacks, min_support_, round);
  }

 private:
  double min_support_;
};

// ---------------------------------------------------------------------------
// RemoteLLM

// Sends the transcript using RVB_LLM_URL / RVB_LLM_KEY.
llm::Completion llm_adapter_call(const AgentConfig& config,
                                 std::span<const llm::ChatMessage> transcript);

// Reply parsers; each throws AdapterError on malformed content.
cyber::Patch parse_patch_reply(std::string_view content);
std::vector<content::FeatureSet> parse_rules_reply(std::string_view content);

std::unique_ptr<CyberRed> make_llm_cyber_red(AgentConfig config, llm::AdapterSettings settings);
std::unique_ptr<CyberBlue> make_llm_cyber_blue(AgentConfig config, llm::AdapterSettings settings);
std::unique_ptr<Jailbreaker> make_llm_jailbreaker(AgentConfig config, llm::AdapterSettings settings);
std::unique_ptr<GuardPatcher> make_llm_guard_patcher(AgentConfig config, llm::AdapterSettings settings);

}  // namespace rvb::agents
