#include "rvb/game_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "rvb/errors.hpp"
#include "rvb/hash.hpp"

namespace rvb::game {

namespace {

constexpr double kNormTolerance = 1e-9;

std::string fixed12(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12f", value);
  return buf;
}

}  // namespace

std::string_view to_string(Side side) { return side == Side::kRed ? "red" : "blue"; }

Side side_from_string(std::string_view text) {
  if (text == "red") return Side::kRed;
  if (text == "blue") return Side::kBlue;
  throw Error(ErrorKind::kInvalidSpace, "unknown side '" + std::string(text) + "'");
}

StrategySpace::StrategySpace(std::vector<StrategyId> strategies, Side side)
    : strategies_(std::move(strategies)), side_(side) {
  if (strategies_.empty()) {
    throw Error(ErrorKind::kInvalidSpace, "strategy space is empty");
  }
  std::sort(strategies_.begin(), strategies_.end());
  auto dup = std::adjacent_find(strategies_.begin(), strategies_.end());
  if (dup != strategies_.end()) {
    throw Error(ErrorKind::kInvalidSpace, "duplicate strategy '" + *dup + "'");
  }
}

std::optional<std::size_t> StrategySpace::index_of(std::string_view id) const {
  auto it = std::lower_bound(strategies_.begin(), strategies_.end(), id);
  if (it == strategies_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - strategies_.begin());
}

Belief::Belief(std::shared_ptr<const StrategySpace> space, std::vector<double> probs)
    : space_(std::move(space)), probs_(std::move(probs)) {
  if (!space_) throw Error(ErrorKind::kInvalidSpace, "belief without strategy space");
  if (probs_.size() != space_->size()) {
    throw Error(ErrorKind::kInvalidBelief, "probability vector does not cover the space");
  }
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorKind::kInvalidBelief, "negative or non-finite probability");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kNormTolerance) {
    throw Error(ErrorKind::kInvalidBelief, "probabilities sum to " + std::to_string(total));
  }
}

double Belief::prob(std::string_view id) const {
  auto idx = space_->index_of(id);
  if (!idx) throw Error(ErrorKind::kInvalidBelief, "unknown strategy '" + std::string(id) + "'");
  return probs_[*idx];
}

std::vector<StrategyId> Belief::support() const {
  std::vector<StrategyId> out;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (probs_[i] > 0.0) out.push_back(space_->strategies()[i]);
  }
  return out;
}

std::string Belief::serialize() const {
  // Keys sorted: "probs" < "side"; strategy ids are already in canonical order.
  std::string out = "{\"probs\":{";
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (i) out += ',';
    out += nlohmann::json(space_->strategies()[i]).dump();
    out += ':';
    out += fixed12(probs_[i]);
  }
  out += "},\"side\":";
  out += nlohmann::json(std::string(to_string(space_->side()))).dump();
  out += '}';
  return out;
}

Belief Belief::deserialize(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidBelief, std::string("malformed belief record: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("probs") || !doc.contains("side")) {
    throw Error(ErrorKind::kInvalidBelief, "belief record needs 'probs' and 'side'");
  }
  std::vector<StrategyId> ids;
  std::vector<double> probs;
  for (const auto& [key, value] : doc.at("probs").items()) {
    ids.push_back(key);
    probs.push_back(value.get<double>());
  }
  auto space = std::make_shared<const StrategySpace>(
      ids, side_from_string(doc.at("side").get<std::string>()));
  // nlohmann objects iterate in sorted key order, matching the space order.
  return Belief(space, std::move(probs));
}

void UtilityTable::set(const ActionId& action, const StrategyId& strategy, double value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::kIncompleteUtility, "non-finite utility for " + action + "/" + strategy);
  }
  values_[{action, strategy}] = value;
}

std::optional<double> UtilityTable::get(std::string_view action, std::string_view strategy) const {
  auto it = values_.find(std::pair<ActionId, StrategyId>(action, strategy));
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

Belief uniform_prior(std::shared_ptr<const StrategySpace> space) {
  if (!space || space->size() == 0) throw Error(ErrorKind::kInvalidSpace, "empty strategy space");
  const auto n = space->size();
  return Belief(std::move(space), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Belief posterior_update(const Belief& prior, const Evidence& evidence,
                        const ConsistencyPredicate& consistent) {
  const auto& ids = prior.space().strategies();
  const auto probs = prior.probs();
  std::vector<double> weights(ids.size(), 0.0);

  if (const auto* soft = std::get_if<SoftLikelihood>(&evidence.likelihood)) {
    if (!(soft->epsilon > 0.0 && soft->epsilon < 0.5)) {
      throw Error(ErrorKind::kInvalidBelief, "soft likelihood epsilon must lie in (0, 0.5)");
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double likelihood =
          consistent(ids[i], evidence.observation) ? 1.0 - soft->epsilon : soft->epsilon;
      weights[i] = likelihood * probs[i];
    }
  } else {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      weights[i] = consistent(ids[i], evidence.observation) ? probs[i] : 0.0;
    }
  }

  const double normalizer = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(normalizer > 0.0)) {
    throw Error(ErrorKind::kDegenerateEvidence,
                "no strategy is consistent with the evidence of round " +
                    std::to_string(evidence.round));
  }
  for (double& w : weights) w /= normalizer;
  return Belief(prior.space_ptr(), std::move(weights));
}

double entropy(const Belief& belief) {
  double h = 0.0;
  for (double p : belief.probs()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h < 0.0 ? 0.0 : h;
}

double expected_utility(const Belief& belief, std::string_view action, const UtilityTable& table) {
  const auto& ids = belief.space().strategies();
  const auto probs = belief.probs();
  double total = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto u = table.get(action, ids[i]);
    if (!u) {
      throw Error(ErrorKind::kIncompleteUtility,
                  "no utility for (" + std::string(action) + ", " + ids[i] + ")");
    }
    total += probs[i] * *u;
  }
  return total;
}

ActionId select_action(const Belief& belief, std::span<const ActionId> actions,
                       const UtilityTable& table) {
  if (actions.empty()) throw Error(ErrorKind::kInvalidSpace, "empty action set");
  std::vector<ActionId> ordered(actions.begin(), actions.end());
  std::sort(ordered.begin(), ordered.end());

  const ActionId* best = nullptr;
  double best_value = 0.0;
  for (const auto& action : ordered) {
    const double value = expected_utility(belief, action, table);
    if (best == nullptr || value > best_value) {
      best = &action;
      best_value = value;
    }
  }
  return *best;
}

StateDigest encode_mutations(int round, std::span<const StateMutation> mutations) {
  std::vector<StateMutation> ordered(mutations.begin(), mutations.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const StateMutation& a, const StateMutation& b) { return a.round < b.round; });
  std::string canonical = "rvb-state/1\n";
  for (const auto& m : ordered) {
    canonical += std::to_string(m.round);
    canonical += '\t';
    canonical += m.canonical;
    canonical += '\n';
  }
  return StateDigest{sha256_hex(canonical), round};
}

}  // namespace rvb::game
