#include "rvb/records.hpp"

#include "rvb/errors.hpp"

namespace rvb {

using nlohmann::json;

std::string_view to_string(Domain d) { return d == Domain::kCyber ? "cyber" : "content"; }

Domain domain_from_string(std::string_view text) {
  if (text == "cyber") return Domain::kCyber;
  if (text == "content") return Domain::kContent;
  throw Error(ErrorKind::kConfigError, "unknown domain '" + std::string(text) + "'");
}

std::string_view to_string(StopKind k) {
  switch (k) {
    case StopKind::kNullProduction: return "NullProduction";
    case StopKind::kExecutionFailure: return "ExecutionFailure";
    case StopKind::kMetricConvergence: return "MetricConvergence";
    case StopKind::kMaxEpochs: return "MaxEpochs";
  }
  return "MaxEpochs";
}

StopKind stop_kind_from_string(std::string_view text) {
  if (text == "NullProduction") return StopKind::kNullProduction;
  if (text == "ExecutionFailure") return StopKind::kExecutionFailure;
  if (text == "MetricConvergence") return StopKind::kMetricConvergence;
  if (text == "MaxEpochs") return StopKind::kMaxEpochs;
  throw Error(ErrorKind::kSchemaError, "unknown stop reason '" + std::string(text) + "'");
}

std::vector<game::StateMutation> EpochRecord::mutations() const {
  std::vector<game::StateMutation> out;
  for (const auto& p : patches) out.push_back({epoch, p.patch.canonical()});
  for (const auto& r : rules_added) out.push_back({epoch, r.canonical()});
  return out;
}

game::StateDigest encode_state(std::span<const EpochRecord> history) {
  std::vector<game::StateMutation> all;
  int round = 0;
  for (const auto& rec : history) {
    auto m = rec.mutations();
    all.insert(all.end(), m.begin(), m.end());
    round = rec.epoch;
  }
  return game::encode_mutations(round, all);
}

void to_json(json& j, const AttackLogEntry& e) {
  j = json{{"file", e.file}, {"code", e.code}, {"bug", e.bug}, {"payload", e.payload}};
}

void from_json(const json& j, AttackLogEntry& e) {
  e.file = j.at("file").get<std::string>();
  e.code = j.at("code").get<std::string>();
  e.bug = j.at("bug").get<std::string>();
  e.payload = j.at("payload").get<std::string>();
}

void to_json(json& j, const TokenUsage& u) {
  j = json{{"agent", u.agent},
           {"model", u.model},
           {"input_tokens", u.input_tokens},
           {"output_tokens", u.output_tokens},
           {"usage_missing", u.usage_missing}};
}

void from_json(const json& j, TokenUsage& u) {
  u.agent = j.at("agent").get<std::string>();
  u.model = j.at("model").get<std::string>();
  u.input_tokens = j.at("input_tokens").get<std::int64_t>();
  u.output_tokens = j.at("output_tokens").get<std::int64_t>();
  u.usage_missing = j.value("usage_missing", false);
}

void to_json(json& j, const StopReason& s) {
  j = json{{"kind", std::string(to_string(s.kind))}, {"epoch", s.epoch}, {"detail", s.detail}};
}

void from_json(const json& j, StopReason& s) {
  s.kind = stop_kind_from_string(j.at("kind").get<std::string>());
  s.epoch = j.at("epoch").get<int>();
  s.detail = j.value("detail", "");
}

json prompt_to_json(const content::Prompt& p) {
  return json{{"id", p.id}, {"text", p.text}, {"features", p.features}, {"harmful", p.harmful}};
}

content::Prompt prompt_from_json(const json& j) {
  content::Prompt p;
  p.id = j.at("id").get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.features = j.at("features").get<content::FeatureSet>();
  p.harmful = j.at("harmful").get<bool>();
  return p;
}

json rule_to_json(const content::GuardRule& r) {
  return json{{"id", r.id},
              {"predicate", r.predicate},
              {"round", r.provenance.round},
              {"sources", r.provenance.source_attacks}};
}

content::GuardRule rule_from_json(const json& j) {
  content::GuardRule r;
  r.id = j.at("id").get<std::string>();
  r.predicate = j.at("predicate").get<content::FeatureSet>();
  r.provenance.round = j.value("round", 0);
  r.provenance.source_attacks = j.value("sources", std::vector<std::string>{});
  return r;
}

json guard_to_json(const content::GuardRuleSet& g) {
  json rules = json::array();
  for (const auto& r : g.rules()) rules.push_back(rule_to_json(r));
  return json{{"version", g.version()}, {"rules", rules}};
}

content::GuardRuleSet guard_from_json(const json& j) {
  std::vector<content::GuardRule> rules;
  for (const auto& r : j.at("rules")) rules.push_back(rule_from_json(r));
  return content::GuardRuleSet(std::move(rules), j.at("version").get<int>());
}

json exploit_to_json(const cyber::Exploit& e) {
  return json{{"target_path", e.target_path},
              {"param", e.param},
              {"payload_class", std::string(cyber::to_string(e.payload_class))},
              {"payload", e.payload}};
}

cyber::Exploit exploit_from_json(const json& j) {
  return cyber::Exploit{j.at("target_path").get<std::string>(), j.at("param").get<std::string>(),
                        cyber::vuln_class_from_string(j.at("payload_class").get<std::string>()),
                        j.at("payload").get<std::string>()};
}

json patch_to_json(const cyber::Patch& p) {
  return json{{"target_path", p.target_path},
              {"action", std::string(cyber::to_string(p.action))},
              {"param", p.param},
              {"diff_text", p.diff_text}};
}

cyber::Patch patch_from_json(const json& j) {
  cyber::Patch p;
  p.target_path = j.at("target_path").get<std::string>();
  p.action = cyber::patch_kind_from_string(j.at("action").get<std::string>());
  p.param = j.value("param", "");
  p.diff_text = j.value("diff_text", "");
  return p;
}

namespace {

json digest_to_json(const game::StateDigest& d) {
  return json{{"digest", d.digest}, {"round", d.round}};
}

game::StateDigest digest_from_json(const json& j) {
  return game::StateDigest{j.at("digest").get<std::string>(), j.at("round").get<int>()};
}

}  // namespace

void to_json(json& j, const EpochRecord& r) {
  j = json{{"domain", std::string(to_string(r.domain))},
           {"epoch", r.epoch},
           {"digest_before", digest_to_json(r.digest_before)},
           {"digest_after", digest_to_json(r.digest_after)},
           {"c_before", r.c_before},
           {"c_after", r.c_after},
           {"red_null", r.red_null},
           {"blue_null", r.blue_null},
           {"failure", r.failure ? json(*r.failure) : json(nullptr)},
           {"token_usage", r.token_usage}};

  if (r.domain == Domain::kCyber) {
    json findings = json::array();
    for (const auto& f : r.red_findings) {
      findings.push_back(json{{"exploit", exploit_to_json(f.exploit)}, {"log", f.log}, {"phases", f.phases}});
    }
    json patches = json::array();
    for (const auto& p : r.patches) {
      patches.push_back(json{{"patch", patch_to_json(p.patch)}, {"attempts", p.attempts}});
    }
    json outcomes = json::array();
    for (const auto& o : r.outcomes) {
      outcomes.push_back(json{{"case", o.case_id},
                              {"r_att", o.outcome.r_att ? 1 : 0},
                              {"r_reg", o.outcome.r_reg ? 1 : 0}});
    }
    j["red_findings"] = std::move(findings);
    j["patches"] = std::move(patches);
    j["outcomes"] = std::move(outcomes);
    j["red_turns"] = r.red_turns;
    j["red_belief"] = r.red_belief;
    j["red_entropy"] = r.red_entropy;
  } else {
    json episodes = json::array();
    for (const auto& e : r.episodes) {
      episodes.push_back(json{{"task_id", e.task_id},
                              {"attempts_used", e.attempts_used},
                              {"final_inner_attempts", e.final_inner_attempts},
                              {"success", e.success},
                              {"final_prompt", prompt_to_json(e.final_prompt)},
                              {"strategy_trace", e.strategy_trace}});
    }
    json added = json::array();
    for (const auto& rule : r.rules_added) added.push_back(rule_to_json(rule));
    json rejected = json::array();
    for (const auto& v : r.rules_rejected) {
      rejected.push_back(json{{"rule", rule_to_json(v.rule)}, {"fpr", v.fpr}});
    }
    json benign = json::array();
    for (const auto& p : r.benign) benign.push_back(prompt_to_json(p));
    j["episodes"] = std::move(episodes);
    j["rules_added"] = std::move(added);
    j["rules_rejected"] = std::move(rejected);
    j["benign"] = std::move(benign);
    j["guard"] = guard_to_json(r.guard);
  }
}

void from_json(const json& j, EpochRecord& r) {
  r = EpochRecord{};
  r.domain = domain_from_string(j.at("domain").get<std::string>());
  r.epoch = j.at("epoch").get<int>();
  r.digest_before = digest_from_json(j.at("digest_before"));
  r.digest_after = digest_from_json(j.at("digest_after"));
  r.c_before = j.at("c_before").get<int>();
  r.c_after = j.at("c_after").get<int>();
  r.red_null = j.at("red_null").get<bool>();
  r.blue_null = j.at("blue_null").get<bool>();
  if (!j.at("failure").is_null()) r.failure = j.at("failure").get<std::string>();
  r.token_usage = j.at("token_usage").get<std::vector<TokenUsage>>();

  if (r.domain == Domain::kCyber) {
    for (const auto& f : j.at("red_findings")) {
      r.red_findings.push_back(CyberFinding{exploit_from_json(f.at("exploit")),
                                            f.at("log").get<AttackLogEntry>(),
                                            f.at("phases").get<std::vector<std::string>>()});
    }
    for (const auto& p : j.at("patches")) {
      r.patches.push_back(AppliedPatch{patch_from_json(p.at("patch")), p.at("attempts").get<int>()});
    }
    for (const auto& o : j.at("outcomes")) {
      r.outcomes.push_back(CaseOutcome{o.at("case").get<std::string>(),
                                       cyber::CyberOutcome{o.at("r_att").get<int>() != 0,
                                                           o.at("r_reg").get<int>() != 0}});
    }
    r.red_turns = j.at("red_turns").get<int>();
    r.red_belief = j.at("red_belief").get<std::string>();
    r.red_entropy = j.at("red_entropy").get<double>();
  } else {
    for (const auto& e : j.at("episodes")) {
      JailbreakEpisode ep;
      ep.task_id = e.at("task_id").get<std::string>();
      ep.attempts_used = e.at("attempts_used").get<int>();
      ep.final_inner_attempts = e.at("final_inner_attempts").get<int>();
      ep.success = e.at("success").get<bool>();
      ep.final_prompt = prompt_from_json(e.at("final_prompt"));
      ep.strategy_trace = e.at("strategy_trace").get<std::vector<std::string>>();
      r.episodes.push_back(std::move(ep));
    }
    for (const auto& rule : j.at("rules_added")) r.rules_added.push_back(rule_from_json(rule));
    for (const auto& v : j.at("rules_rejected")) {
      r.rules_rejected.push_back(content::RuleVerdict{rule_from_json(v.at("rule")), v.at("fpr").get<double>()});
    }
    for (const auto& p : j.at("benign")) r.benign.push_back(prompt_from_json(p));
    r.guard = guard_from_json(j.at("guard"));
  }
}

}  // namespace rvb
