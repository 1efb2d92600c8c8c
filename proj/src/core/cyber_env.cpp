#include "rvb/cyber_env.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "rvb/errors.hpp"

namespace rvb::cyber {

namespace {

using nlohmann::json;

[[noreturn]] void scenario_error(const std::string& msg) {
  throw Error(ErrorKind::kScenarioError, msg);
}

std::string ref_of(std::string_view path, std::string_view param) {
  std::string out(path);
  out += '#';
  out += param;
  return out;
}

template <typename T>
T field_or(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    scenario_error(std::string("field '") + key + "' has the wrong type");
  }
}

ParamSpec parse_param(const json& doc) {
  if (!doc.is_object() || !doc.contains("name")) scenario_error("param needs a 'name'");
  ParamSpec p;
  p.name = doc.at("name").get<std::string>();
  p.vuln_class = vuln_class_from_string(field_or<std::string>(doc, "vuln_class", "NONE"));
  p.sanitized = field_or<bool>(doc, "sanitized", false);
  p.sanitizer_resistant = field_or<bool>(doc, "sanitizer_resistant", false);
  p.latent_until = field_or<std::vector<std::string>>(doc, "latent_until", {});
  p.payoff = field_or<double>(doc, "payoff", 1.0);
  p.payload = field_or<std::string>(doc, "payload", "");
  p.code = field_or<std::string>(doc, "code", "");
  p.bug = field_or<std::string>(doc, "bug", "");
  p.report_file = field_or<std::string>(doc, "report_file", "");
  if (p.vuln_class == VulnClass::kNone) p.sanitized = true;
  return p;
}

}  // namespace

std::string_view to_string(VulnClass c) {
  switch (c) {
    case VulnClass::kNone: return "NONE";
    case VulnClass::kSqli: return "SQLI";
    case VulnClass::kXss: return "XSS";
    case VulnClass::kAuthBypass: return "AUTH_BYPASS";
    case VulnClass::kPathTraversal: return "PATH_TRAVERSAL";
  }
  return "NONE";
}

VulnClass vuln_class_from_string(std::string_view text) {
  if (text == "NONE") return VulnClass::kNone;
  if (text == "SQLI") return VulnClass::kSqli;
  if (text == "XSS") return VulnClass::kXss;
  if (text == "AUTH_BYPASS") return VulnClass::kAuthBypass;
  if (text == "PATH_TRAVERSAL") return VulnClass::kPathTraversal;
  scenario_error("unknown vuln_class '" + std::string(text) + "'");
}

std::string_view to_string(PatchKind k) {
  switch (k) {
    case PatchKind::kSanitize: return "Sanitize";
    case PatchKind::kRemoveEndpoint: return "RemoveEndpoint";
    case PatchKind::kRewriteLogic: return "RewriteLogic";
  }
  return "Sanitize";
}

PatchKind patch_kind_from_string(std::string_view text) {
  if (text == "Sanitize") return PatchKind::kSanitize;
  if (text == "RemoveEndpoint") return PatchKind::kRemoveEndpoint;
  if (text == "RewriteLogic") return PatchKind::kRewriteLogic;
  throw Error(ErrorKind::kPatchError, "unknown patch action '" + std::string(text) + "'");
}

const ParamSpec* Endpoint::find_param(std::string_view name) const {
  auto it = std::find_if(params.begin(), params.end(),
                         [&](const ParamSpec& p) { return p.name == name; });
  return it == params.end() ? nullptr : &*it;
}

std::string Exploit::identity() const {
  return ref_of(target_path, param) + "#" + std::string(to_string(payload_class));
}

std::string Patch::canonical() const {
  std::string out = "patch\t" + target_path + "\t" + std::string(to_string(action));
  if (action != PatchKind::kRemoveEndpoint) out += "\t" + param;
  return out;
}

Environment Environment::load_scenario_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    scenario_error(std::string("unparsable scenario: ") + e.what());
  }
  return load_scenario(doc);
}

Environment Environment::load_scenario(const json& doc) {
  if (!doc.is_object()) scenario_error("scenario must be an object");
  if (field_or<std::string>(doc, "schema", "") != "rvb-scenario/1") {
    scenario_error("unsupported scenario schema");
  }
  if (field_or<std::string>(doc, "kind", "") != "cyber") scenario_error("not a cyber scenario");

  Environment env;
  env.name_ = field_or<std::string>(doc, "name", "unnamed");
  env.blue_error_rate_ = field_or<double>(doc, "blue_error_rate", 0.0);
  if (env.blue_error_rate_ < 0.0 || env.blue_error_rate_ > 1.0) {
    scenario_error("blue_error_rate must lie in [0, 1]");
  }

  const auto it = doc.find("endpoints");
  if (it == doc.end() || !it->is_array() || it->empty()) scenario_error("no endpoints");

  std::set<std::string> seen;
  for (const auto& e : *it) {
    if (!e.is_object() || !e.contains("path")) scenario_error("endpoint needs a 'path'");
    Endpoint ep;
    ep.path = e.at("path").get<std::string>();
    if (!seen.insert(ep.path).second) scenario_error("duplicate endpoint path '" + ep.path + "'");
    ep.functional = field_or<bool>(e, "functional", true);
    ep.required_for_service = field_or<bool>(e, "required_for_service", false);
    ep.is_static = field_or<bool>(e, "static", false);
    std::set<std::string> names;
    for (const auto& p : field_or<json>(e, "params", json::array())) {
      auto param = parse_param(p);
      if (!names.insert(param.name).second) {
        scenario_error("duplicate param '" + param.name + "' on " + ep.path);
      }
      ep.params.push_back(std::move(param));
    }
    if (ep.params.empty() && !ep.is_static) {
      scenario_error("endpoint '" + ep.path + "' has no params and is not static");
    }
    env.endpoints_.push_back(std::move(ep));
  }
  std::sort(env.endpoints_.begin(), env.endpoints_.end(),
            [](const Endpoint& a, const Endpoint& b) { return a.path < b.path; });

  for (const auto& ep : env.endpoints_) {
    if (ep.required_for_service) env.required_paths_.push_back(ep.path);
    for (const auto& p : ep.params) {
      for (const auto& ref : p.latent_until) {
        auto hash = ref.find('#');
        const Endpoint* target = hash == std::string::npos ? nullptr : env.find(ref.substr(0, hash));
        if (!target || !target->find_param(ref.substr(hash + 1))) {
          scenario_error("latent_until references unknown '" + ref + "'");
        }
      }
      if (p.vuln_class != VulnClass::kNone && !p.sanitized) {
        env.test_cases_.push_back(Exploit{ep.path, p.name, p.vuln_class, p.payload});
      }
    }
  }
  return env;
}

const Endpoint* Environment::find(std::string_view path) const {
  auto it = std::lower_bound(endpoints_.begin(), endpoints_.end(), path,
                             [](const Endpoint& e, std::string_view p) { return e.path < p; });
  return (it != endpoints_.end() && it->path == path) ? &*it : nullptr;
}

bool Environment::attempt_exploit(const Exploit& exploit) const {
  const Endpoint* ep = find(exploit.target_path);
  if (!ep || !ep->functional) return false;
  const ParamSpec* p = ep->find_param(exploit.param);
  return p && p->vuln_class != VulnClass::kNone && p->vuln_class == exploit.payload_class &&
         !p->sanitized;
}

bool Environment::regression_check() const {
  return std::all_of(required_paths_.begin(), required_paths_.end(), [&](const std::string& path) {
    const Endpoint* ep = find(path);
    return ep && ep->functional;
  });
}

int Environment::vulnerability_count() const {
  int count = 0;
  for (const auto& ep : endpoints_) {
    for (const auto& p : ep.params) {
      if (p.vuln_class != VulnClass::kNone && !p.sanitized) ++count;
    }
  }
  return count;
}

bool Environment::is_neutralized(std::string_view ref) const {
  auto hash = ref.find('#');
  if (hash == std::string_view::npos) return false;
  const Endpoint* ep = find(ref.substr(0, hash));
  if (!ep) return true;
  const ParamSpec* p = ep->find_param(ref.substr(hash + 1));
  return !p || p->sanitized;
}

std::vector<Exploit> Environment::recon() const {
  std::vector<Exploit> out;
  for (const auto& ep : endpoints_) {
    if (!ep.functional) continue;
    for (const auto& p : ep.params) {
      if (p.vuln_class == VulnClass::kNone) continue;
      const bool visible = std::all_of(p.latent_until.begin(), p.latent_until.end(),
                                       [&](const std::string& ref) { return is_neutralized(ref); });
      if (visible) out.push_back(Exploit{ep.path, p.name, p.vuln_class, p.payload});
    }
  }
  return out;
}

void Environment::validate_patch(const Patch& patch) const {
  const Endpoint* ep = find(patch.target_path);
  if (!ep) throw Error(ErrorKind::kPatchError, "unknown target '" + patch.target_path + "'");
  if (patch.action != PatchKind::kRemoveEndpoint && !ep->find_param(patch.param)) {
    throw Error(ErrorKind::kPatchError,
                "unknown param '" + patch.param + "' on '" + patch.target_path + "'");
  }
}

Environment Environment::apply_patch(const Patch& patch, std::mt19937_64* rng) const {
  auto it = std::find_if(endpoints_.begin(), endpoints_.end(),
                         [&](const Endpoint& e) { return e.path == patch.target_path; });
  if (it == endpoints_.end()) {
    throw Error(ErrorKind::kPatchError, "unknown target '" + patch.target_path + "'");
  }
  Environment next = *this;
  auto& ep = next.endpoints_[static_cast<std::size_t>(it - endpoints_.begin())];

  if (patch.action == PatchKind::kRemoveEndpoint) {
    next.endpoints_.erase(next.endpoints_.begin() + (it - endpoints_.begin()));
    return next;
  }

  auto pit = std::find_if(ep.params.begin(), ep.params.end(),
                          [&](const ParamSpec& p) { return p.name == patch.param; });
  if (pit == ep.params.end()) {
    throw Error(ErrorKind::kPatchError,
                "unknown param '" + patch.param + "' on '" + patch.target_path + "'");
  }

  if (patch.action == PatchKind::kSanitize) {
    if (!pit->sanitizer_resistant) pit->sanitized = true;
    return next;
  }

  // RewriteLogic
  pit->sanitized = true;
  bool breaks = false;
  if (blue_error_rate_ >= 1.0) {
    breaks = true;
  } else if (blue_error_rate_ > 0.0) {
    if (!rng) throw Error(ErrorKind::kPatchError, "blue-error model needs a random source");
    const double draw = static_cast<double>((*rng)() >> 11) * 0x1.0p-53;
    breaks = draw < blue_error_rate_;
  }
  if (breaks) ep.functional = false;
  return next;
}

}  // namespace rvb::cyber
