#include "rvb/content_env.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>

#include "rvb/errors.hpp"

namespace rvb::content {

namespace {

const FeatureSet& stopwords() {
  static const FeatureSet kStop = {"a",   "an",  "and",  "are", "as",   "at",   "be",   "by",
                                   "can", "do",  "for",  "from", "how", "in",   "is",   "it",
                                   "me",  "my",  "of",   "on",  "or",   "that", "the",  "this",
                                   "to",  "what", "with", "you", "your", "i",   "we",   "our"};
  return kStop;
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool is_subset(const FeatureSet& small, const FeatureSet& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

std::string join(const FeatureSet& set, char sep) {
  std::string out;
  for (const auto& f : set) {
    if (!out.empty()) out.push_back(sep);
    out += f;
  }
  return out;
}

}  // namespace

FeatureSet tokenize(std::string_view text) {
  FeatureSet out;
  for (auto& w : words(text)) {
    if (w.size() >= 2 && !stopwords().count(w)) out.insert(std::move(w));
  }
  return out;
}

Prompt Prompt::make(std::string id, std::string text, bool harmful) {
  Prompt p;
  p.id = std::move(id);
  p.features = tokenize(text);
  p.text = std::move(text);
  p.harmful = harmful;
  return p;
}

bool GuardRule::matches(const Prompt& p) const {
  return !predicate.empty() && is_subset(predicate, p.features);
}

std::string GuardRule::canonical() const { return "rule\t" + id + "\t" + join(predicate, '+'); }

GuardRuleSet::GuardRuleSet(std::vector<GuardRule> rules, int version)
    : rules_(std::move(rules)), version_(version) {
  std::set<std::string> ids;
  for (const auto& r : rules_) {
    if (r.predicate.empty()) throw Error(ErrorKind::kScenarioError, "rule '" + r.id + "' is empty");
    if (!ids.insert(r.id).second) {
      throw Error(ErrorKind::kScenarioError, "duplicate rule id '" + r.id + "'");
    }
  }
}

bool GuardRuleSet::has_predicate(const FeatureSet& predicate) const {
  return std::any_of(rules_.begin(), rules_.end(),
                     [&](const GuardRule& r) { return r.predicate == predicate; });
}

GuardRuleSet GuardRuleSet::extended(std::vector<GuardRule> accepted, int version) const {
  if (version <= version_) {
    throw Error(ErrorKind::kScenarioError, "guard versions must strictly increase");
  }
  auto rules = rules_;
  for (auto& r : accepted) rules.push_back(std::move(r));
  return GuardRuleSet(std::move(rules), version);
}

Verdict classify(const GuardRuleSet& guard, const Prompt& p) {
  for (const auto& rule : guard.rules()) {
    if (rule.matches(p)) return Verdict::kBlocked;
  }
  return Verdict::kAllowed;
}

Response target_respond(const TargetStub& stub, const Prompt& p) {
  for (const auto& f : p.features) {
    if (stub.resistance.count(f)) return Response::kRefuse;
  }
  return Response::kComply;
}

bool is_success(const GuardRuleSet& guard, const TargetStub& stub, const Prompt& p) {
  return classify(guard, p) == Verdict::kAllowed && target_respond(stub, p) == Response::kComply;
}

std::vector<GuardRule> augment_rules(const GuardRuleSet& guard, std::span<const Prompt> attacks,
                                     double min_support, int round) {
  if (attacks.empty()) throw Error(ErrorKind::kNullProduction, "no successful attacks to learn from");

  // Every closed itemset is an intersection of some subset of transactions;
  // fold each attack into the running family of intersections.
  std::set<FeatureSet> closed;
  for (const auto& attack : attacks) {
    std::set<FeatureSet> next = closed;
    if (!attack.features.empty()) next.insert(attack.features);
    for (const auto& c : closed) {
      FeatureSet meet;
      std::set_intersection(c.begin(), c.end(), attack.features.begin(), attack.features.end(),
                            std::inserter(meet, meet.end()));
      if (!meet.empty()) next.insert(std::move(meet));
    }
    closed = std::move(next);
  }

  const auto n = static_cast<double>(attacks.size());
  const auto min_count =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(min_support * n - 1e-9)));

  struct Scored {
    FeatureSet predicate;
    std::vector<std::string> sources;
  };
  std::vector<Scored> scored;
  for (const auto& itemset : closed) {
    if (guard.has_predicate(itemset)) continue;
    std::vector<std::string> sources;
    for (const auto& attack : attacks) {
      if (is_subset(itemset, attack.features)) sources.push_back(attack.id);
    }
    if (sources.size() < min_count) continue;
    std::sort(sources.begin(), sources.end());
    scored.push_back({itemset, std::move(sources)});
  }
  if (scored.empty()) {
    throw Error(ErrorKind::kNullProduction, "no feature combination reaches the support threshold");
  }

  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.sources.size() != b.sources.size()) return a.sources.size() > b.sources.size();
    if (a.predicate.size() != b.predicate.size()) return a.predicate.size() < b.predicate.size();
    return a.predicate < b.predicate;
  });

  std::vector<GuardRule> out;
  out.reserve(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    GuardRule rule;
    rule.id = "r" + std::to_string(round) + "." + std::to_string(i + 1);
    rule.predicate = std::move(scored[i].predicate);
    rule.provenance = Provenance{round, std::move(scored[i].sources)};
    out.push_back(std::move(rule));
  }
  return out;
}

double standalone_fpr(const GuardRule& rule, std::span<const Prompt> benign) {
  if (benign.empty()) return 0.0;
  const auto blocked = std::count_if(benign.begin(), benign.end(),
                                     [&](const Prompt& p) { return rule.matches(p); });
  return static_cast<double>(blocked) / static_cast<double>(benign.size());
}

ValidationResult validate_rules(std::span<const GuardRule> candidates,
                                std::span<const Prompt> benign, double fpr_threshold) {
  if (benign.empty()) throw Error(ErrorKind::kScenarioError, "benign validation set is empty");
  ValidationResult result;
  for (const auto& rule : candidates) {
    const double fpr = standalone_fpr(rule, benign);
    if (fpr <= fpr_threshold) {
      result.accepted.push_back(rule);
    } else {
      result.rejected.push_back({rule, fpr});
    }
  }
  return result;
}

BenignGenerator::BenignGenerator(FeatureSet harm_tags, std::vector<std::string> topics)
    : harm_tags_(std::move(harm_tags)) {
  for (auto& topic : topics) {
    const auto tags = tokenize(topic);
    const bool clean = std::none_of(tags.begin(), tags.end(),
                                    [&](const FeatureTag& t) { return harm_tags_.count(t) > 0; });
    if (clean) topics_.push_back(std::move(topic));
  }
  if (topics_.empty()) topics_.push_back("gardening");
}

std::vector<Prompt> BenignGenerator::generate(const Prompt& seed, int n,
                                              std::uint64_t rng_seed) const {
  if (!seed.harmful) throw Error(ErrorKind::kScenarioError, "benign seed must be a harmful prompt");
  std::vector<Prompt> out;
  if (n <= 0) return out;

  std::string stem;
  for (const auto& w : words(seed.text)) {
    if (harm_tags_.count(w)) continue;
    if (!stem.empty()) stem.push_back(' ');
    stem += w;
  }

  // Fisher-Yates over topic indices with raw engine output so the order does
  // not depend on the standard library's distribution implementations.
  std::uint64_t mix = rng_seed;
  for (char c : seed.id) mix = mix * 1099511628211ULL + static_cast<unsigned char>(c);
  std::mt19937_64 rng(mix);
  std::vector<std::size_t> order(topics_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }

  for (int i = 0; i < n; ++i) {
    const auto& topic = topics_[order[static_cast<std::size_t>(i) % order.size()]];
    std::string text = stem.empty() ? "tell me about " + topic : stem + " about " + topic;
    if (static_cast<std::size_t>(i) >= order.size()) {
      text += " part " + std::to_string(i / static_cast<int>(order.size()) + 1);
    }
    out.push_back(Prompt::make(seed.id + "~b" + std::to_string(i + 1), std::move(text), false));
  }
  return out;
}

}  // namespace rvb::content
