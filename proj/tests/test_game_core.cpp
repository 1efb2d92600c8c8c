#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rvb/errors.hpp"
#include "rvb/game_core.hpp"

using namespace rvb::game;

namespace {

std::shared_ptr<const StrategySpace> space_of(std::size_t n, Side side = Side::kBlue) {
  std::vector<StrategyId> ids;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "s%02zu", i);
    ids.emplace_back(buf);
  }
  return std::make_shared<const StrategySpace>(ids, side);
}

// Observation is a 0/1 mask over strategy indices; '1' means consistent.
bool mask_consistent(std::string_view strategy, std::string_view observation) {
  const auto idx = static_cast<std::size_t>(std::stoi(std::string(strategy.substr(1))));
  return observation[idx] == '1';
}

rvb::ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const rvb::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an rvb::Error";
  return rvb::ErrorKind::kConfigError;
}

std::string random_mask(std::mt19937_64& rng, std::size_t n, double p_one) {
  std::bernoulli_distribution bit(p_one);
  std::string m(n, '0');
  for (auto& c : m) c = bit(rng) ? '1' : '0';
  return m;
}

}  // namespace

TEST(UniformPrior, FourStrategiesEachQuarter) {
  auto b = uniform_prior(space_of(4));
  for (double p : b.probs()) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(UniformPrior, SingleStrategyIsPointMass) {
  auto b = uniform_prior(space_of(1));
  EXPECT_DOUBLE_EQ(b.probs()[0], 1.0);
  EXPECT_DOUBLE_EQ(entropy(b), 0.0);
}

TEST(UniformPrior, EntropyOfEightIsLnEight) {
  EXPECT_NEAR(entropy(uniform_prior(space_of(8))), 2.0794, 1e-4);
  EXPECT_NEAR(entropy(uniform_prior(space_of(8))), std::log(8.0), 1e-12);
}

TEST(UniformPrior, EmptySpaceRejected) {
  EXPECT_EQ(kind_of([] { StrategySpace({}, Side::kBlue); }), rvb::ErrorKind::kInvalidSpace);
}

TEST(StrategySpace, DuplicatesRejected) {
  EXPECT_THROW(StrategySpace({"a", "a"}, Side::kRed), rvb::Error);
}

TEST(Belief, RejectsUnnormalized) {
  EXPECT_THROW(Belief(space_of(2), {0.5, 0.6}), rvb::Error);
  EXPECT_THROW(Belief(space_of(2), {1.5, -0.5}), rvb::Error);
  EXPECT_THROW(Belief(space_of(2), {1.0}), rvb::Error);
}

TEST(PosteriorUpdate, FilterKeepsConsistentHalf) {
  auto b = uniform_prior(space_of(4));
  auto post = posterior_update(b, Evidence{1, "1100", BinaryFilter{}}, mask_consistent);
  EXPECT_DOUBLE_EQ(post.probs()[0], 0.5);
  EXPECT_DOUBLE_EQ(post.probs()[1], 0.5);
  EXPECT_DOUBLE_EQ(post.probs()[2], 0.0);
  EXPECT_DOUBLE_EQ(post.probs()[3], 0.0);
}

TEST(PosteriorUpdate, UninformativeEvidenceKeepsPrior) {
  Belief b(space_of(3), {0.2, 0.3, 0.5});
  auto post = posterior_update(b, Evidence{1, "111", BinaryFilter{}}, mask_consistent);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(post.probs()[i], b.probs()[i], 1e-15);
  auto soft = posterior_update(b, Evidence{1, "111", SoftLikelihood{0.1}}, mask_consistent);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(soft.probs()[i], b.probs()[i], 1e-15);
}

TEST(PosteriorUpdate, SoftLikelihoodHandValue) {
  Belief b(space_of(2), {0.8, 0.2});
  auto post = posterior_update(b, Evidence{1, "10", SoftLikelihood{0.1}}, mask_consistent);
  EXPECT_NEAR(post.probs()[0], 0.8 * 0.9 / (0.8 * 0.9 + 0.2 * 0.1), 1e-15);
  EXPECT_NEAR(post.probs()[0], 0.9730, 1e-4);
}

TEST(PosteriorUpdate, AllInconsistentIsDegenerate) {
  auto b = uniform_prior(space_of(3));
  EXPECT_EQ(kind_of([&] { posterior_update(b, Evidence{4, "000", BinaryFilter{}}, mask_consistent); }),
            rvb::ErrorKind::kDegenerateEvidence);
}

TEST(PosteriorUpdate, SoftEpsilonOutOfRangeRejected) {
  auto b = uniform_prior(space_of(2));
  EXPECT_THROW(posterior_update(b, Evidence{1, "10", SoftLikelihood{0.0}}, mask_consistent), rvb::Error);
  EXPECT_THROW(posterior_update(b, Evidence{1, "10", SoftLikelihood{0.7}}, mask_consistent), rvb::Error);
}

// Enumeration oracle over random spaces, priors and evidence sequences.
TEST(PosteriorUpdate, MatchesEnumerationOracle) {
  std::mt19937_64 rng(20240501);
  std::uniform_int_distribution<std::size_t> size(1, 12);
  std::uniform_int_distribution<int> steps(1, 6);
  std::uniform_real_distribution<double> eps(0.01, 0.49);
  std::bernoulli_distribution use_soft(0.4);
  int degenerate = 0;
  for (int c = 0; c < 1000; ++c) {
    const auto n = size(rng);
    auto space = space_of(n);
    Belief b(space, rvb::oracle::random_simplex(rng, n, 0.2));
    std::vector<double> chained(b.probs().begin(), b.probs().end());
    const int k = steps(rng);
    for (int s = 0; s < k; ++s) {
      const auto mask = random_mask(rng, n, 0.6);
      const bool soft = use_soft(rng);
      const double e = eps(rng);
      std::vector<double> lik(n);
      for (std::size_t i = 0; i < n; ++i) lik[i] = mask[i] == '1' ? (soft ? 1.0 - e : 1.0) : (soft ? e : 0.0);
      Evidence ev{s + 1, mask, soft ? LikelihoodKind{SoftLikelihood{e}} : LikelihoodKind{BinaryFilter{}}};

      const std::vector<double> prior(b.probs().begin(), b.probs().end());
      const auto expected = rvb::oracle::bayes(prior, lik);
      if (!expected) {
        EXPECT_THROW(posterior_update(b, ev, mask_consistent), rvb::Error);
        ++degenerate;
        break;
      }
      b = posterior_update(b, ev, mask_consistent);
      chained = *rvb::oracle::bayes(chained, lik);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        ASSERT_NEAR(b.probs()[i], (*expected)[i], 1e-12) << "case " << c << " step " << s;
        ASSERT_NEAR(b.probs()[i], chained[i], 1e-12) << "case " << c << " step " << s;
        sum += b.probs()[i];
      }
      ASSERT_NEAR(sum, 1.0, 1e-9);
    }
  }
  EXPECT_GT(degenerate, 0);  // the generator does exercise the error path
}

// Starting from the uniform prior, filtering keeps the belief uniform on its
// support, so entropy is ln|support| and can only fall.
TEST(Entropy, NonIncreasingUnderFilteringFromUniform) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> size(1, 12);
  for (int c = 0; c < 1000; ++c) {
    const auto n = size(rng);
    auto b = uniform_prior(space_of(n));
    for (int s = 0; s < 8; ++s) {
      auto mask = random_mask(rng, n, 0.7);
      std::vector<double> lik(n);
      for (std::size_t i = 0; i < n; ++i) lik[i] = mask[i] == '1' ? 1.0 : 0.0;
      const std::vector<double> prior(b.probs().begin(), b.probs().end());
      if (!rvb::oracle::bayes(prior, lik)) continue;
      const auto before_support = b.support();
      const double before = entropy(b);
      auto next = posterior_update(b, Evidence{s + 1, mask, BinaryFilter{}}, mask_consistent);
      ASSERT_LE(entropy(next), before + 1e-12);
      for (const auto& id : next.support()) {
        ASSERT_NE(std::find(before_support.begin(), before_support.end(), id), before_support.end());
      }
      b = next;
    }
  }
}

// Pins why the monotonicity property is stated from the uniform prior: a
// skewed prior can gain entropy when its dominant strategy is filtered out.
TEST(Entropy, SkewedPriorCanGainEntropyUnderFiltering) {
  Belief b(space_of(3), {0.9, 0.05, 0.05});
  auto post = posterior_update(b, Evidence{1, "011", BinaryFilter{}}, mask_consistent);
  EXPECT_GT(entropy(post), entropy(b));
}

TEST(Entropy, HandValues) {
  EXPECT_NEAR(entropy(Belief(space_of(3), {0.5, 0.25, 0.25})), 1.0397, 1e-4);
  EXPECT_DOUBLE_EQ(entropy(Belief(space_of(3), {0.0, 1.0, 0.0})), 0.0);
  std::mt19937_64 rng(5);
  for (int c = 0; c < 200; ++c) {
    auto p = rvb::oracle::random_simplex(rng, 7, 0.3);
    Belief b(space_of(7), p);
    EXPECT_NEAR(entropy(b), rvb::oracle::shannon_nats(p), 1e-12);
    EXPECT_LE(entropy(b), std::log(7.0) + 1e-12);
  }
}

TEST(SelectAction, DominantAction) {
  auto b = uniform_prior(space_of(2));
  UtilityTable u;
  for (auto s : {"s00", "s01"}) {
    u.set("a1", s, 1.0);
    u.set("a2", s, 0.0);
  }
  std::vector<ActionId> actions{"a1", "a2"};
  EXPECT_EQ(select_action(b, actions, u), "a1");
}

TEST(SelectAction, PointMassBestResponse) {
  Belief b(space_of(1), {1.0});
  UtilityTable u;
  u.set("a1", "s00", 0.0);
  u.set("a2", "s00", 5.0);
  std::vector<ActionId> actions{"a1", "a2"};
  EXPECT_EQ(select_action(b, actions, u), "a2");
}

TEST(SelectAction, TiesGoToLowestActionId) {
  auto b = uniform_prior(space_of(2));
  UtilityTable u;
  for (auto a : {"b", "a", "c"}) {
    u.set(a, "s00", 1.0);
    u.set(a, "s01", 1.0);
  }
  std::vector<ActionId> actions{"c", "b", "a"};
  EXPECT_EQ(select_action(b, actions, u), "a");
}

TEST(SelectAction, MissingUtilityIsIncomplete) {
  auto b = uniform_prior(space_of(2));
  UtilityTable u;
  u.set("a1", "s00", 1.0);
  std::vector<ActionId> actions{"a1"};
  EXPECT_EQ(kind_of([&] { select_action(b, actions, u); }), rvb::ErrorKind::kIncompleteUtility);
}

TEST(SelectAction, MatchesExhaustiveArgmaxAndAffineInvariance) {
  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  std::uniform_real_distribution<double> val(-10.0, 10.0);
  std::uniform_real_distribution<double> scale(0.1, 20.0);
  for (int c = 0; c < 500; ++c) {
    const auto na = dim(rng), ns = dim(rng);
    auto space = space_of(ns);
    Belief b(space, rvb::oracle::random_simplex(rng, ns, 0.2));
    std::vector<std::vector<double>> table(na, std::vector<double>(ns));
    std::vector<ActionId> actions;
    UtilityTable u, v;
    const double a = scale(rng), shift = val(rng);
    for (std::size_t i = 0; i < na; ++i) {
      actions.push_back("act" + std::to_string(i));
      for (std::size_t s = 0; s < ns; ++s) {
        table[i][s] = val(rng);
        u.set(actions[i], space->strategies()[s], table[i][s]);
        v.set(actions[i], space->strategies()[s], a * table[i][s] + shift);
      }
    }
    const std::vector<double> probs(b.probs().begin(), b.probs().end());
    const auto expected = actions[rvb::oracle::seu_argmax(probs, table)];
    ASSERT_EQ(select_action(b, actions, u), expected) << "case " << c;
    ASSERT_EQ(select_action(b, actions, v), expected) << "case " << c;
  }
}

TEST(Serialization, CanonicalAndRoundTrips) {
  Belief b(space_of(3), {0.125, 0.375, 0.5});
  const auto text = b.serialize();
  EXPECT_NE(text.find("0.375000000000"), std::string::npos);
  auto back = Belief::deserialize(text);
  EXPECT_EQ(back.serialize(), text);
  EXPECT_EQ(Belief(space_of(3), {0.125, 0.375, 0.5}).serialize(), text);
  EXPECT_THROW(Belief::deserialize("{not json"), rvb::Error);
}

TEST(StateDigest, EmptyHistoryAndDistinctness) {
  auto empty = encode_mutations(0, {});
  EXPECT_EQ(empty.round, 0);
  EXPECT_EQ(empty.digest.size(), 64u);
  std::vector<StateMutation> a{{1, "patch sanitize a.php id"}};
  std::vector<StateMutation> a2 = a;
  auto ab = a;
  ab.push_back({2, "patch sanitize b.php id"});
  EXPECT_EQ(encode_mutations(1, a), encode_mutations(1, a2));
  EXPECT_NE(encode_mutations(1, a).digest, encode_mutations(2, ab).digest);
  EXPECT_NE(encode_mutations(1, a).digest, empty.digest);
}
