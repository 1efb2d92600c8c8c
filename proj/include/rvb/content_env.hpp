#pragma once

// Guardrail environment: prompts as feature sets, additive conjunctive
// blocking rules, a deterministic target model and benign-sample generation.

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rvb::content {

using FeatureTag = std::string;
using FeatureSet = std::set<FeatureTag>;

// Lowercased alphanumeric words of length >= 2, minus a small stopword list.
FeatureSet tokenize(std::string_view text);

struct Prompt {
  std::string id;
  std::string text;
  FeatureSet features;
  bool harmful = false;

  static Prompt make(std::string id, std::string text, bool harmful);

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

struct Provenance {
  int round = 0;
  std::vector<std::string> source_attacks;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct GuardRule {
  std::string id;
  FeatureSet predicate;
  Provenance provenance;

  bool matches(const Prompt& p) const;
  std::string canonical() const;

  friend bool operator==(const GuardRule&, const GuardRule&) = default;
};

class GuardRuleSet {
 public:
  GuardRuleSet() = default;
  // Validates unique ids and non-empty predicates.
  GuardRuleSet(std::vector<GuardRule> rules, int version);

  const std::vector<GuardRule>& rules() const { return rules_; }
  int version() const { return version_; }
  bool has_predicate(const FeatureSet& predicate) const;

  // Guard_{version} = this ∪ accepted. `version` must exceed the current one.
  GuardRuleSet extended(std::vector<GuardRule> accepted, int version) const;

  friend bool operator==(const GuardRuleSet&, const GuardRuleSet&) = default;

 private:
  std::vector<GuardRule> rules_;
  int version_ = 0;
};

enum class Verdict { kBlocked, kAllowed };
enum class Response { kComply, kRefuse };

struct TargetStub {
  FeatureSet resistance;
};

Verdict classify(const GuardRuleSet& guard, const Prompt& p);
Response target_respond(const TargetStub& stub, const Prompt& p);

// Guard bypassed and target complied.
bool is_success(const GuardRuleSet& guard, const TargetStub& stub, const Prompt& p);

// Closed feature combinations shared by at least `min_support` of the
// attacks and not already present as a rule. Throws NullProduction when
// nothing qualifies.
std::vector<GuardRule> augment_rules(const GuardRuleSet& guard, std::span<const Prompt> attacks,
                                     double min_support, int round);

struct RuleVerdict {
  GuardRule rule;
  double fpr = 0.0;
};

struct ValidationResult {
  std::vector<GuardRule> accepted;
  std::vector<RuleVerdict> rejected;
};

double standalone_fpr(const GuardRule& rule, std::span<const Prompt> benign);

ValidationResult validate_rules(std::span<const GuardRule> candidates,
                                std::span<const Prompt> benign, double fpr_threshold);

class BenignGenerator {
 public:
  BenignGenerator(FeatureSet harm_tags, std::vector<std::string> topics);

  const FeatureSet& harm_tags() const { return harm_tags_; }

  // n benign neighbours of a harmful seed: harm-tag words stripped, a benign
  // topic appended. Deterministic in (seed prompt, rng_seed).
  std::vector<Prompt> generate(const Prompt& seed, int n, std::uint64_t rng_seed) const;

 private:
  FeatureSet harm_tags_;
  std::vector<std::string> topics_;
};

}  // namespace rvb::content
