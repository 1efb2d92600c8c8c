#pragma once

// Declarative model of a vulnerable web service. Each state is an immutable
// snapshot; patches produce successor states.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rvb::cyber {

enum class VulnClass { kNone, kSqli, kXss, kAuthBypass, kPathTraversal };

std::string_view to_string(VulnClass c);
VulnClass vuln_class_from_string(std::string_view text);

struct ParamSpec {
  std::string name;
  VulnClass vuln_class = VulnClass::kNone;
  bool sanitized = true;
  // Input sanitization does not neutralize this flaw; only a logic rewrite does.
  bool sanitizer_resistant = false;
  // "path#param" references that must be neutralized before recon can see it.
  std::vector<std::string> latent_until;
  double payoff = 1.0;
  // Artifacts carried into attack logs.
  std::string payload;
  std::string code;
  std::string bug;
  // Path the attacker's report names, when it differs from the real one.
  std::string report_file;
};

struct Endpoint {
  std::string path;
  std::vector<ParamSpec> params;
  bool functional = true;
  bool required_for_service = false;
  bool is_static = false;

  const ParamSpec* find_param(std::string_view name) const;
};

struct Exploit {
  std::string target_path;
  std::string param;
  VulnClass payload_class = VulnClass::kSqli;
  std::string payload;

  // Class-level identity "path#param#CLASS"; the payload string is excluded.
  std::string identity() const;

  friend bool operator==(const Exploit&, const Exploit&) = default;
};

enum class PatchKind { kSanitize, kRemoveEndpoint, kRewriteLogic };

std::string_view to_string(PatchKind k);
PatchKind patch_kind_from_string(std::string_view text);

struct Patch {
  std::string target_path;
  PatchKind action = PatchKind::kSanitize;
  std::string param;  // empty for kRemoveEndpoint
  std::string diff_text;

  // Canonical one-line form used for state digests.
  std::string canonical() const;

  friend bool operator==(const Patch&, const Patch&) = default;
};

struct CyberOutcome {
  bool r_att = false;
  bool r_reg = true;

  friend bool operator==(const CyberOutcome&, const CyberOutcome&) = default;
};

class Environment {
 public:
  // Throws ScenarioError on malformed documents.
  static Environment load_scenario(const nlohmann::json& doc);
  static Environment load_scenario_text(std::string_view text);

  const std::string& name() const { return name_; }
  const std::vector<Endpoint>& endpoints() const { return endpoints_; }
  const Endpoint* find(std::string_view path) const;
  double blue_error_rate() const { return blue_error_rate_; }

  bool attempt_exploit(const Exploit& exploit) const;
  bool regression_check() const;
  int vulnerability_count() const;

  // Successor state. `rng` is consulted only when a RewriteLogic patch meets
  // a blue-error rate strictly between 0 and 1.
  Environment apply_patch(const Patch& patch, std::mt19937_64* rng = nullptr) const;

  // Throws PatchError exactly when apply_patch would reject the target.
  void validate_patch(const Patch& patch) const;

  // Exploits an attacker can discover by reconnaissance in this state:
  // vulnerable-class params on existing endpoints whose latency gates are
  // satisfied. Sanitized params are still listed; recon cannot tell.
  std::vector<Exploit> recon() const;

  // One canonical exploit per vulnerable param left unsanitized by the
  // pristine scenario (pre-sanitized decoys are not test cases).
  // Fixed at load time so removed endpoints still count as test cases.
  const std::vector<Exploit>& test_cases() const { return test_cases_; }

  // True when the referenced "path#param" is sanitized or its endpoint is gone.
  bool is_neutralized(std::string_view ref) const;

 private:
  std::string name_;
  std::vector<Endpoint> endpoints_;
  std::vector<Exploit> test_cases_;
  std::vector<std::string> required_paths_;
  double blue_error_rate_ = 0.0;
};

}  // namespace rvb::cyber
