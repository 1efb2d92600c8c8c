#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "rvb/content_env.hpp"
#include "rvb/errors.hpp"

using namespace rvb::content;

namespace {

GuardRule rule(const std::string& id, FeatureSet pred) { return GuardRule{id, std::move(pred), {}}; }

Prompt with_features(const std::string& id, FeatureSet f, bool harmful = true) {
  Prompt p;
  p.id = id;
  p.features = std::move(f);
  p.harmful = harmful;
  for (const auto& t : p.features) p.text += t + " ";
  return p;
}

}  // namespace

TEST(Tokenize, LowercasesAndDropsStopwords) {
  EXPECT_EQ(tokenize("How to DROP the Table, quickly!"), (FeatureSet{"drop", "table", "quickly"}));
  EXPECT_TRUE(tokenize("a I to").empty());
  EXPECT_EQ(Prompt::make("x", "sql injection", true).features, (FeatureSet{"sql", "injection"}));
}

TEST(Classify, EmptyGuardAllows) {
  EXPECT_EQ(classify(GuardRuleSet{}, Prompt::make("p", "anything at all", true)), Verdict::kAllowed);
}

TEST(Classify, SubsetRuleBlocks) {
  GuardRuleSet g({rule("r1", {"sql", "injection"})}, 1);
  EXPECT_EQ(classify(g, Prompt::make("p", "explain sql injection basics", true)), Verdict::kBlocked);
  EXPECT_EQ(classify(g, Prompt::make("p", "explain sql basics", true)), Verdict::kAllowed);
}

// Brute-force subset oracle over a random 20-prompt corpus and 5 rules.
TEST(Classify, MatchesSubsetEnumeration) {
  const std::vector<std::string> vocab{"alpha", "beta", "gamma", "delta", "omega", "sigma", "kappa", "theta"};
  std::mt19937_64 rng(8);
  std::bernoulli_distribution pick(0.45);
  auto random_set = [&](std::size_t max) {
    FeatureSet s;
    for (const auto& w : vocab) {
      if (s.size() < max && pick(rng)) s.insert(w);
    }
    if (s.empty()) s.insert(vocab[rng() % vocab.size()]);
    return s;
  };
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<GuardRule> rules;
    for (int r = 0; r < 5; ++r) rules.push_back(rule("r" + std::to_string(r), random_set(3)));
    GuardRuleSet g(rules, 1);
    for (int i = 0; i < 20; ++i) {
      auto p = with_features("p" + std::to_string(i), random_set(8));
      bool expected = false;
      for (const auto& r : rules) {
        bool all = true;
        for (const auto& f : r.predicate) all = all && p.features.count(f) > 0;
        expected = expected || all;
      }
      EXPECT_EQ(classify(g, p) == Verdict::kBlocked, expected);
    }
  }
}

TEST(GuardRuleSet, InvariantsEnforced) {
  EXPECT_THROW(GuardRuleSet({rule("r", {})}, 1), rvb::Error);
  EXPECT_THROW(GuardRuleSet({rule("r", {"a"}), rule("r", {"b"})}, 1), rvb::Error);
  GuardRuleSet g({rule("r", {"a"})}, 2);
  EXPECT_THROW(g.extended({}, 2), rvb::Error);
  auto next = g.extended({rule("s", {"b"})}, 3);
  EXPECT_EQ(next.version(), 3);
  EXPECT_EQ(next.rules().size(), 2u);
}

TEST(TargetRespond, ResistanceTagsRefuse) {
  TargetStub stub{{"bomb"}};
  EXPECT_EQ(target_respond(stub, Prompt::make("p", "how to build a bomb", true)), Response::kRefuse);
  EXPECT_EQ(target_respond(stub, Prompt::make("p", "how to build a device", true)), Response::kComply);
  EXPECT_EQ(target_respond(stub, Prompt::make("p", "how to bake bread", false)), Response::kComply);
}

TEST(AugmentRules, SharedPairBecomesOneCandidate) {
  std::vector<Prompt> attacks{with_features("a1", {"roleplay", "weapon", "castle"}),
                              with_features("a2", {"roleplay", "weapon", "river"}),
                              with_features("a3", {"roleplay", "weapon", "forest"}),
                              with_features("a4", {"roleplay", "weapon", "desert"})};
  auto out = augment_rules(GuardRuleSet{}, attacks, 0.5, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].predicate, (FeatureSet{"roleplay", "weapon"}));
  EXPECT_EQ(out[0].provenance.round, 1);
  EXPECT_EQ(out[0].provenance.source_attacks.size(), 4u);
}

TEST(AugmentRules, NoSharedComboIsNullProduction) {
  std::vector<Prompt> attacks{with_features("a1", {"x"}), with_features("a2", {"y"}), with_features("a3", {"z"})};
  try {
    augment_rules(GuardRuleSet{}, attacks, 0.5, 1);
    FAIL();
  } catch (const rvb::Error& e) {
    EXPECT_EQ(e.kind(), rvb::ErrorKind::kNullProduction);
  }
  EXPECT_THROW(augment_rules(GuardRuleSet{}, {}, 0.5, 1), rvb::Error);
}

TEST(AugmentRules, SkipsExistingPredicatesAndEachCandidateBlocksAnAttack) {
  std::vector<Prompt> attacks{with_features("a1", {"roleplay", "weapon", "castle"}),
                              with_features("a2", {"roleplay", "weapon", "river"}),
                              with_features("a3", {"roleplay", "castle"})};
  GuardRuleSet g({rule("old", {"roleplay", "weapon"})}, 1);
  auto out = augment_rules(g, attacks, 0.5, 2);
  for (const auto& r : out) {
    EXPECT_FALSE(g.has_predicate(r.predicate));
    EXPECT_TRUE(std::any_of(attacks.begin(), attacks.end(), [&](const Prompt& p) { return r.matches(p); }));
  }
}

TEST(ValidateRules, ThresholdArithmetic) {
  std::vector<Prompt> benign;
  for (int i = 0; i < 12; ++i) {
    benign.push_back(with_features("b" + std::to_string(i), i < 3 ? FeatureSet{"story", "common"} : FeatureSet{"story"}, false));
  }
  auto clean = rule("clean", {"weapon"});
  auto noisy = rule("noisy", {"common"});
  std::vector<GuardRule> both{clean, noisy};
  auto r = validate_rules(both, benign, 0.05);
  ASSERT_EQ(r.accepted.size(), 1u);
  EXPECT_EQ(r.accepted[0].id, "clean");
  ASSERT_EQ(r.rejected.size(), 1u);
  EXPECT_DOUBLE_EQ(r.rejected[0].fpr, 0.25);
  EXPECT_EQ(validate_rules(both, benign, 1.0).accepted.size(), 2u);
  EXPECT_THROW(validate_rules(both, {}, 0.05), rvb::Error);
}

TEST(BenignGenerator, ThreeHarmlessNeighbours) {
  BenignGenerator gen({"weapon"}, {"gardening", "baking", "cycling"});
  auto seed = Prompt::make("t1", "pretend to build a weapon", true);
  auto out = gen.generate(seed, 3, 42);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& p : out) {
    EXPECT_FALSE(p.harmful);
    EXPECT_EQ(p.features.count("weapon"), 0u);
    EXPECT_EQ(p.features.count("pretend"), 1u);
    EXPECT_EQ(classify(GuardRuleSet{}, p), Verdict::kAllowed);
  }
  EXPECT_EQ(out, gen.generate(seed, 3, 42));
  EXPECT_TRUE(gen.generate(seed, 0, 42).empty());
  EXPECT_THROW(gen.generate(Prompt::make("b", "hello", false), 3, 1), rvb::Error);
}

TEST(Monotonicity, AdditiveGuardsNeverUnblock) {
  std::mt19937_64 rng(12);
  const std::vector<std::string> vocab{"a1", "b2", "c3", "d4", "e5", "f6"};
  GuardRuleSet g;
  std::vector<Prompt> corpus;
  for (int i = 0; i < 40; ++i) {
    FeatureSet f;
    for (const auto& w : vocab) {
      if (rng() % 2) f.insert(w);
    }
    corpus.push_back(with_features("p" + std::to_string(i), f));
  }
  std::vector<bool> blocked(corpus.size(), false);
  for (int v = 1; v <= 6; ++v) {
    g = g.extended({rule("r" + std::to_string(v), {vocab[rng() % 6], vocab[rng() % 6]})}, v);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const bool now = classify(g, corpus[i]) == Verdict::kBlocked;
      if (blocked[i]) {
        EXPECT_TRUE(now);
      }
      blocked[i] = now;
    }
  }
}
