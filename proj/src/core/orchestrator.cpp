#include "rvb/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <sstream>

#include "rvb/errors.hpp"

namespace rvb::orchestrator {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::kConfigError, msg); }
[[noreturn]] void scenario_error(const std::string& msg) { throw Error(ErrorKind::kScenarioError, msg); }

RunMode run_mode_from_string(std::string_view text) {
  if (text == "rvb") return RunMode::kRvb;
  if (text == "baseline") return RunMode::kBaseline;
  config_error("mode must be 'rvb' or 'baseline'");
}

ConvergenceMode convergence_from_string(std::string_view text) {
  if (text == "comparisons") return ConvergenceMode::kComparisons;
  if (text == "epochs") return ConvergenceMode::kEpochs;
  config_error("convergence must be 'comparisons' or 'epochs'");
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    config_error(std::string("field '") + key + "' has the wrong type");
  }
}

std::string read_text(const fs::path& path, ErrorKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(kind, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& what, ErrorKind kind) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(kind, what + " is not valid JSON: " + e.what());
  }
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    out.emplace_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

bool uses_remote(const RunConfig& cfg) {
  return cfg.red.kind == agents::AgentKind::kRemoteLLM || cfg.blue.kind == agents::AgentKind::kRemoteLLM;
}

llm::AdapterSettings settings_for(const agents::AgentConfig& c) {
  return llm::AdapterSettings::from_environment(c.model, c.temperature);
}

std::unique_ptr<agents::CyberRed> make_cyber_red(const RunConfig& cfg, const cyber::Environment& pristine) {
  if (cfg.red.kind == agents::AgentKind::kRemoteLLM) return agents::make_llm_cyber_red(cfg.red, settings_for(cfg.red));
  return std::make_unique<agents::ScriptedCyberRed>(pristine, cfg.red);
}

std::unique_ptr<agents::CyberBlue> make_cyber_blue(const RunConfig& cfg) {
  if (cfg.blue.kind == agents::AgentKind::kRemoteLLM) {
    return agents::make_llm_cyber_blue(cfg.blue, settings_for(cfg.blue));
  }
  return std::make_unique<agents::ScriptedCyberBlue>(cfg.blue);
}

bool is_execution_failure(ErrorKind k) {
  return k == ErrorKind::kRemediationFailure || k == ErrorKind::kAdapterError || k == ErrorKind::kPatchError;
}

void collect(agents::AgentBase& agent, EpochRecord& rec, std::vector<llm::Exchange>& exchanges) {
  for (auto& u : agent.drain_usage()) rec.token_usage.push_back(std::move(u));
  for (auto& x : agent.drain_exchanges()) exchanges.push_back(std::move(x));
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

// Appends the record, streams it, and evaluates the stopping rules.
bool close_epoch(archive::RunArchive& run, EpochRecord rec, std::vector<llm::Exchange> exchanges,
                 std::chrono::steady_clock::time_point started, const RunConfig& cfg,
                 archive::ArchiveWriter* writer) {
  std::vector<EpochRecord> through(run.records);
  through.push_back(rec);
  rec.digest_after = encode_state(through);
  const double ms = elapsed_ms(started);
  if (writer) writer->append(rec, exchanges, ms);
  for (auto& x : exchanges) run.exchanges.push_back({rec.epoch, std::move(x)});
  run.timing.push_back({rec.epoch, ms});
  archive::append_epoch(run, std::move(rec));
  run.stop = check_stopping(run.records, cfg);
  return run.stop.has_value();
}

void finalize(archive::RunArchive& run, archive::ArchiveWriter* writer) {
  run.metrics = metrics::to_json(metrics::compute(run));
  if (writer) writer->finish(*run.stop, run.metrics);
}

}  // namespace

std::string_view to_string(RunMode m) { return m == RunMode::kRvb ? "rvb" : "baseline"; }

std::string_view to_string(ConvergenceMode m) {
  return m == ConvergenceMode::kComparisons ? "comparisons" : "epochs";
}

ContentScenario ContentScenario::load(const json& doc) {
  if (!doc.is_object()) scenario_error("scenario must be an object");
  if (doc.value("schema", "") != "rvb-scenario/1") scenario_error("unsupported scenario schema");
  if (doc.value("kind", "") != "content") scenario_error("not a content scenario");
  ContentScenario s;
  try {
    s.name = doc.value("name", "unnamed");
    std::set<std::string> ids;
    for (const auto& t : doc.at("tasks")) {
      auto p = content::Prompt::make(t.at("id").get<std::string>(), t.at("text").get<std::string>(), true);
      if (!ids.insert(p.id).second) scenario_error("duplicate task id '" + p.id + "'");
      s.tasks.push_back(std::move(p));
    }
    for (const auto& tag : doc.value("resistance", json::array())) s.stub.resistance.insert(tag.get<std::string>());
    s.transforms = agents::transforms_from_json(doc.value("transforms", json::array()));
    std::vector<content::GuardRule> rules;
    for (const auto& r : doc.value("guard", json::array())) {
      content::GuardRule rule;
      rule.id = r.at("id").get<std::string>();
      for (const auto& f : r.at("predicate")) rule.predicate.insert(f.get<std::string>());
      rules.push_back(std::move(rule));
    }
    s.initial_guard = content::GuardRuleSet(std::move(rules), 0);
    for (const auto& tag : doc.value("harm_tags", json::array())) s.harm_tags.insert(tag.get<std::string>());
    s.benign_topics = doc.value("benign_topics", std::vector<std::string>{});
    s.benign_per_positive = doc.value("benign_per_positive", 3);
    s.min_support = doc.value("min_support", 0.5);
    s.fpr_threshold = doc.value("fpr_threshold", 0.05);
  } catch (const json::exception& e) {
    scenario_error(std::string("malformed content scenario: ") + e.what());
  }
  if (s.tasks.empty()) scenario_error("content scenario has no tasks");
  if (s.benign_per_positive < 1) scenario_error("benign_per_positive must be >= 1");
  if (s.min_support <= 0.0 || s.min_support > 1.0) scenario_error("min_support must lie in (0, 1]");
  if (s.fpr_threshold < 0.0 || s.fpr_threshold > 1.0) scenario_error("fpr_threshold must lie in [0, 1]");
  std::sort(s.tasks.begin(), s.tasks.end(),
            [](const content::Prompt& a, const content::Prompt& b) { return a.id < b.id; });
  return s;
}

void RunConfig::validate() const {
  if (max_epoch < 1) config_error("max_epoch must be >= 1");
  if (count_delay < 1) config_error("count_delay must be >= 1");
  if (baseline_sweep < 1) config_error("baseline_sweep must be >= 1");
  red.limits.validate();
  blue.limits.validate();
  using agents::AgentKind;
  const auto red_ok = domain == Domain::kCyber ? AgentKind::kScriptedRed : AgentKind::kScriptedJailbreaker;
  const auto blue_ok = domain == Domain::kCyber ? AgentKind::kScriptedBlue : AgentKind::kScriptedGuardPatcher;
  if (red.kind != red_ok && red.kind != AgentKind::kRemoteLLM) {
    config_error("red agent '" + std::string(agents::to_string(red.kind)) + "' does not fit this domain");
  }
  if (blue.kind != blue_ok && blue.kind != AgentKind::kRemoteLLM) {
    config_error("blue agent '" + std::string(agents::to_string(blue.kind)) + "' does not fit this domain");
  }
  if (mode == RunMode::kBaseline) {
    if (domain != Domain::kCyber) config_error("baseline mode is defined for the cyber domain only");
    if (blue.kind != AgentKind::kScriptedBlue) config_error("baseline mode needs a scripted blue agent");
  }
  if (domain == Domain::kCyber) {
    (void)cyber::Environment::load_scenario(scenario);
  } else {
    (void)ContentScenario::load(scenario);
  }
}

json RunConfig::to_json() const {
  return json{{"name", name},
              {"domain", std::string(rvb::to_string(domain))},
              {"mode", std::string(orchestrator::to_string(mode))},
              {"max_epoch", max_epoch},
              {"count_delay", count_delay},
              {"convergence", std::string(orchestrator::to_string(convergence))},
              {"seed", seed},
              {"red", red.to_json()},
              {"blue", blue.to_json()},
              {"baseline_sweep", baseline_sweep},
              {"scenario", scenario}};
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) config_error("config must be an object");
  RunConfig c;
  c.name = field_or<std::string>(j, "name", "run");
  if (!j.contains("domain")) config_error("config needs a 'domain'");
  c.domain = domain_from_string(field_or<std::string>(j, "domain", ""));
  c.mode = run_mode_from_string(field_or<std::string>(j, "mode", "rvb"));
  c.max_epoch = field_or<int>(j, "max_epoch", 5);
  c.count_delay = field_or<int>(j, "count_delay", 3);
  c.convergence = convergence_from_string(field_or<std::string>(j, "convergence", "comparisons"));
  c.seed = field_or<std::uint64_t>(j, "seed", 0);
  c.baseline_sweep = field_or<int>(j, "baseline_sweep", 2);

  const bool cyber = c.domain == Domain::kCyber;
  auto agent = [&](const char* key, const char* default_kind) {
    json a = field_or<json>(j, key, json::object());
    if (!a.is_object()) config_error(std::string("'") + key + "' must be an object");
    if (!a.contains("kind")) a["kind"] = default_kind;
    return agents::AgentConfig::from_json(a);
  };
  c.red = agent("red", cyber ? "ScriptedRed" : "ScriptedJailbreaker");
  c.blue = agent("blue", cyber ? "ScriptedBlue" : "ScriptedGuardPatcher");

  const auto it = j.find("scenario");
  if (it == j.end()) config_error("config needs a 'scenario'");
  if (it->is_string()) {
    const fs::path p = base_dir / it->get<std::string>();
    c.scenario = parse_json(read_text(p, ErrorKind::kScenarioError), "scenario '" + p.string() + "'",
                            ErrorKind::kScenarioError);
  } else if (it->is_object()) {
    c.scenario = *it;
  } else {
    config_error("'scenario' must be a path or an object");
  }
  return c;
}

RunConfig RunConfig::load_file(const fs::path& path) {
  const auto doc = parse_json(read_text(path, ErrorKind::kConfigError), "config '" + path.string() + "'",
                              ErrorKind::kConfigError);
  return from_json(doc, path.parent_path());
}

std::optional<StopReason> check_stopping(std::span<const EpochRecord> history, const RunConfig& cfg) {
  if (history.empty()) return std::nullopt;
  const auto& last = history.back();
  const int k = last.epoch;
  if (!last.failure && last.red_null && last.blue_null) {
    return StopReason{StopKind::kNullProduction, k, "neither team produced an action"};
  }
  if (last.failure) return StopReason{StopKind::kExecutionFailure, k, *last.failure};

  const auto d = static_cast<std::size_t>(cfg.count_delay);
  if (history.size() >= d) {
    const auto window = history.subspan(history.size() - d);
    bool converged = false;
    if (cfg.convergence == ConvergenceMode::kComparisons) {
      converged = std::all_of(window.begin(), window.end(),
                              [](const EpochRecord& r) { return r.c_after == r.c_before; });
    } else {
      converged = std::all_of(window.begin(), window.end(),
                              [&](const EpochRecord& r) { return r.c_after == window.front().c_after; });
    }
    if (converged) {
      return StopReason{StopKind::kMetricConvergence, k,
                        "C = " + std::to_string(last.c_after) + " unchanged for " + std::to_string(d) + " " +
                            std::string(to_string(cfg.convergence))};
    }
  }
  if (k >= cfg.max_epoch) {
    return StopReason{StopKind::kMaxEpochs, k, "reached max_epoch = " + std::to_string(cfg.max_epoch)};
  }
  return std::nullopt;
}

archive::RunArchive run_cyber_game(const RunConfig& cfg, archive::ArchiveWriter* writer) {
  if (cfg.domain != Domain::kCyber) config_error("run_cyber_game needs a cyber config");
  cfg.validate();
  const auto pristine = cyber::Environment::load_scenario(cfg.scenario);

  archive::RunArchive run;
  run.header = archive::make_header(cfg.name, Domain::kCyber, cfg.seed, cfg.to_json());

  auto red = make_cyber_red(cfg, pristine);
  auto blue = make_cyber_blue(cfg);
  std::mt19937_64 rng(cfg.seed);
  auto env = pristine;
  std::vector<std::string> touched;

  for (int k = 1;; ++k) {
    const auto started = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.domain = Domain::kCyber;
    rec.epoch = k;
    rec.digest_before = encode_state(run.records);
    rec.c_before = env.vulnerability_count();
    std::vector<llm::Exchange> exchanges;

    if (cfg.mode == RunMode::kRvb) {
      red->begin_epoch(env);
      try {
        while (auto finding = red->step(env)) rec.red_findings.push_back(std::move(*finding));
        auto next = env;
        for (const auto& f : rec.red_findings) {
          // Already closed by an earlier patch this epoch (e.g. a removed endpoint).
          if (!next.attempt_exploit(f.exploit)) continue;
          auto applied = blue->remediate(f.log, next);
          next = next.apply_patch(applied.patch, &rng);
          rec.patches.push_back(std::move(applied));
        }
        env = std::move(next);
      } catch (const Error& e) {
        if (!is_execution_failure(e.kind())) throw;
        rec.failure = e.what();
        rec.patches.clear();
      }
      rec.red_turns = red->turns_used();
      if (auto b = red->belief()) {
        rec.red_belief = b->serialize();
        rec.red_entropy = game::entropy(*b);
      }
    } else {
      auto next = env;
      for (auto& patch : blue->sweep(env, cfg.baseline_sweep, touched)) {
        if (std::find(touched.begin(), touched.end(), patch.target_path) == touched.end()) {
          touched.push_back(patch.target_path);
        }
        next = next.apply_patch(patch, &rng);
        rec.patches.push_back(AppliedPatch{std::move(patch), 1});
      }
      env = std::move(next);
      // Evaluation only: a fresh attacker probes the new state and its
      // findings never reach the defender.
      auto evaluator = make_cyber_red(cfg, pristine);
      evaluator->begin_epoch(env);
      try {
        while (auto finding = evaluator->step(env)) rec.red_findings.push_back(std::move(*finding));
      } catch (const Error& e) {
        if (!is_execution_failure(e.kind())) throw;
        rec.failure = e.what();
      }
      rec.red_turns = evaluator->turns_used();
      collect(*evaluator, rec, exchanges);
    }

    for (const auto& tc : pristine.test_cases()) {
      rec.outcomes.push_back(CaseOutcome{tc.identity(), {env.attempt_exploit(tc), env.regression_check()}});
    }
    rec.c_after = env.vulnerability_count();
    rec.red_null = rec.red_findings.empty();
    rec.blue_null = rec.patches.empty();
    collect(*red, rec, exchanges);
    collect(*blue, rec, exchanges);
    if (close_epoch(run, std::move(rec), std::move(exchanges), started, cfg, writer)) break;
  }
  finalize(run, writer);
  return run;
}

archive::RunArchive run_content_game(const RunConfig& cfg, archive::ArchiveWriter* writer) {
  if (cfg.domain != Domain::kContent) config_error("run_content_game needs a content config");
  cfg.validate();
  const auto scenario = ContentScenario::load(cfg.scenario);

  archive::RunArchive run;
  run.header = archive::make_header(cfg.name, Domain::kContent, cfg.seed, cfg.to_json());

  std::unique_ptr<agents::Jailbreaker> red;
  if (cfg.red.kind == agents::AgentKind::kRemoteLLM) {
    red = agents::make_llm_jailbreaker(cfg.red, settings_for(cfg.red));
  } else {
    red = std::make_unique<agents::ScriptedJailbreaker>(cfg.red, scenario.transforms);
  }
  std::unique_ptr<agents::GuardPatcher> blue;
  if (cfg.blue.kind == agents::AgentKind::kRemoteLLM) {
    blue = agents::make_llm_guard_patcher(cfg.blue, settings_for(cfg.blue));
  } else {
    blue = std::make_unique<agents::ScriptedGuardPatcher>(scenario.min_support);
  }
  const content::BenignGenerator generator(scenario.harm_tags, scenario.benign_topics);

  auto guard = scenario.initial_guard;
  int previous = static_cast<int>(scenario.tasks.size());

  for (int i = 1;; ++i) {
    const auto started = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.domain = Domain::kContent;
    rec.epoch = i;
    rec.digest_before = encode_state(run.records);
    rec.c_before = previous;
    std::vector<llm::Exchange> exchanges;
    std::vector<content::GuardRule> accepted;
    std::vector<content::Prompt> bypasses;

    try {
      for (const auto& task : scenario.tasks) {
        auto ep = red->run_episode(task, guard, scenario.stub);
        if (ep.success) bypasses.push_back(ep.final_prompt);
        rec.episodes.push_back(std::move(ep));
      }
      if (!bypasses.empty()) {
        std::vector<content::GuardRule> candidates;
        try {
          candidates = blue->propose(guard, bypasses, i);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kNullProduction) throw;
        }
        for (const auto& p : bypasses) {
          auto samples = generator.generate(p, scenario.benign_per_positive, cfg.seed + static_cast<std::uint64_t>(i));
          rec.benign.insert(rec.benign.end(), samples.begin(), samples.end());
        }
        if (!candidates.empty()) {
          auto verdict = content::validate_rules(candidates, rec.benign, scenario.fpr_threshold);
          accepted = std::move(verdict.accepted);
          rec.rules_rejected = std::move(verdict.rejected);
        }
      }
    } catch (const Error& e) {
      if (!is_execution_failure(e.kind())) throw;
      rec.failure = e.what();
      accepted.clear();
    }

    guard = guard.extended(accepted, i);
    rec.rules_added = std::move(accepted);
    rec.guard = guard;
    rec.c_after = static_cast<int>(bypasses.size());
    previous = rec.c_after;
    rec.red_null = bypasses.empty();
    rec.blue_null = rec.rules_added.empty();
    collect(*red, rec, exchanges);
    collect(*blue, rec, exchanges);
    if (close_epoch(run, std::move(rec), std::move(exchanges), started, cfg, writer)) break;
  }
  finalize(run, writer);
  return run;
}

archive::RunArchive run_game(const RunConfig& cfg, archive::ArchiveWriter* writer) {
  return cfg.domain == Domain::kCyber ? run_cyber_game(cfg, writer) : run_content_game(cfg, writer);
}

RunConfig config_from_header(const json& header) {
  try {
    return RunConfig::from_json(header.at("config"), fs::path("."));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchemaError, std::string("archive header lacks a config: ") + e.what());
  }
}

ReplayVerdict replay_archive(const fs::path& path) {
  const auto file = archive::archive_file(path);
  ReplayVerdict v;
  const auto original = read_text(file, ErrorKind::kArchiveIOError);
  const auto lines = split_lines(original);
  if (lines.empty()) throw Error(ErrorKind::kArchiveIOError, "empty archive");

  json header;
  try {
    header = json::parse(lines.front()).at("body");
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchemaError, std::string("unreadable archive header: ") + e.what());
  }
  const auto cfg = config_from_header(header);

  if (uses_remote(cfg)) {
    v.metrics_only = true;
    const auto run = archive::load_run(file);
    const auto recomputed = metrics::to_json(metrics::compute(run));
    v.pass = recomputed == run.metrics;
    v.detail = v.pass ? "metrics-only replay: PASS" : "metrics-only replay: FAIL (metrics snapshot differs)";
    return v;
  }

  const auto regenerated = split_lines(archive::serialize(run_game(cfg)));
  const auto n = std::max(lines.size(), regenerated.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string* a = i < lines.size() ? &lines[i] : nullptr;
    const std::string* b = i < regenerated.size() ? &regenerated[i] : nullptr;
    if (a && b && *a == *b) continue;
    std::string kind = "record";
    if (b) {
      kind = json::parse(*b).at("kind").get<std::string>();
    }
    if (kind == "epoch") v.epoch = static_cast<int>(i);
    v.pass = false;
    v.detail = "FAIL: first divergence at line " + std::to_string(i + 1) +
               (v.epoch ? " (epoch " + std::to_string(*v.epoch) + ")" : " (" + kind + ")");
    return v;
  }
  v.pass = true;
  v.detail = "PASS: " + std::to_string(lines.size()) + " records reproduced";
  return v;
}

}  // namespace rvb::orchestrator
