#pragma once

// Belief-state machinery for the attacker: distributions over the defender's
// strategy space, Bayesian filtering on environmental evidence, Shannon
// entropy and subjective-expected-utility action selection.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace rvb::game {

using StrategyId = std::string;
using ActionId = std::string;

enum class Side { kRed, kBlue };

std::string_view to_string(Side side);
Side side_from_string(std::string_view text);

// Non-empty, duplicate-free, lexicographically ordered set of strategy tokens.
class StrategySpace {
 public:
  StrategySpace(std::vector<StrategyId> strategies, Side side);

  std::span<const StrategyId> strategies() const { return strategies_; }
  std::size_t size() const { return strategies_.size(); }
  Side side() const { return side_; }
  std::optional<std::size_t> index_of(std::string_view id) const;

  friend bool operator==(const StrategySpace&, const StrategySpace&) = default;

 private:
  std::vector<StrategyId> strategies_;
  Side side_;
};

class Belief {
 public:
  // Validates normalization (1e-9), non-negativity and size.
  Belief(std::shared_ptr<const StrategySpace> space, std::vector<double> probs);

  const StrategySpace& space() const { return *space_; }
  std::shared_ptr<const StrategySpace> space_ptr() const { return space_; }
  std::span<const double> probs() const { return probs_; }
  double prob(std::string_view id) const;
  std::vector<StrategyId> support() const;

  // Canonical record: sorted keys, probabilities printed with 12 decimals.
  std::string serialize() const;
  static Belief deserialize(std::string_view text);

 private:
  std::shared_ptr<const StrategySpace> space_;
  std::vector<double> probs_;
};

struct BinaryFilter {};
struct SoftLikelihood {
  double epsilon = 0.1;
};
using LikelihoodKind = std::variant<BinaryFilter, SoftLikelihood>;

struct Evidence {
  int round = 1;
  std::string observation;
  LikelihoodKind likelihood = BinaryFilter{};
};

using ConsistencyPredicate =
    std::function<bool(std::string_view strategy, std::string_view observation)>;

class UtilityTable {
 public:
  void set(const ActionId& action, const StrategyId& strategy, double value);
  std::optional<double> get(std::string_view action, std::string_view strategy) const;
  std::size_t size() const { return values_.size(); }

 private:
  std::map<std::pair<ActionId, StrategyId>, double, std::less<>> values_;
};

struct StateMutation {
  int round = 0;
  std::string canonical;
};

struct StateDigest {
  std::string digest;
  int round = 0;

  friend bool operator==(const StateDigest&, const StateDigest&) = default;
};

Belief uniform_prior(std::shared_ptr<const StrategySpace> space);

// Bayes' rule with either the 0/1 filtering likelihood or the soft
// (1 - eps, eps) likelihood. Throws DegenerateEvidence when a binary filter
// removes every strategy from the support.
Belief posterior_update(const Belief& prior, const Evidence& evidence,
                        const ConsistencyPredicate& consistent);

// Shannon entropy in nats, with 0 ln 0 = 0.
double entropy(const Belief& belief);

double expected_utility(const Belief& belief, std::string_view action, const UtilityTable& table);

// Argmax of subjective expected utility; ties go to the lexicographically
// smallest action id.
ActionId select_action(const Belief& belief, std::span<const ActionId> actions,
                       const UtilityTable& table);

// Digest of the canonical serialization of every state-mutating action,
// ordered by round. `round` is the index of the last epoch folded in.
StateDigest encode_mutations(int round, std::span<const StateMutation> mutations);

}  // namespace rvb::game
