// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include "cliqueparcel/eval.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "cliqueparcel/error.hpp"
#include "test_util.hpp"

namespace eval = cliqueparcel::eval;
namespace data = cliqueparcel::data;
namespace clique = cliqueparcel::clique;
namespace text = cliqueparcel::text;
using cliqueparcel::Errc;
using cliqueparcel::Error;

namespace {

data::Prompt labeled(std::string gt) {
  data::Prompt p;
  p.id = "q";
  p.text = p.question = "Which city?";
  p.ground_truth = std::move(gt);
  return p;
}

data::Prompt multiple_choice(std::vector<std::string> choices, std::string gt) {
  auto p = labeled(std::move(gt));
  p.choices = std::move(choices);
  return p;
}

clique::GroupingPlan plan_of(std::vector<std::vector<std::string>> groups) {
  clique::GroupingPlan plan;
  plan.batch_size = 0;
  std::size_t k = 1;
  for (auto& g : groups) {
    plan.batch_size = std::max(plan.batch_size, g.size());
    plan.groups.push_back({k++, std::move(g), std::nullopt});
  }
  return plan;
}

}  // namespace

TEST(Accuracy, FreeText) {
  EXPECT_TRUE(eval::accuracy_match("The capital is Paris.", labeled("Paris")));
  EXPECT_TRUE(eval::accuracy_match("paris", labeled("Paris")));
  EXPECT_FALSE(eval::accuracy_match("London", labeled("Paris")));
  EXPECT_TRUE(eval::accuracy_match("It is the Gull Estuary!", labeled("Gull Estuary")));
  EXPECT_TRUE(eval::accuracy_match("the two youngest leaves and the bud", labeled("two youngest leaves and bud")));
  EXPECT_FALSE(eval::accuracy_match("Parisian", labeled("Paris")));
}

TEST(Accuracy, NormalizeAnswer) {
  EXPECT_EQ(eval::normalize_answer("  The  Cat, sat on a MAT!! "), "cat sat on mat");
  EXPECT_EQ(eval::normalize_answer(""), "");
}

TEST(Accuracy, MultipleChoice) {
  const auto p = multiple_choice({"red", "blue", "green"}, "B");
  EXPECT_TRUE(eval::accuracy_match("B", p));
  EXPECT_TRUE(eval::accuracy_match("The answer is (B).", p));
  EXPECT_TRUE(eval::accuracy_match("B) blue", p));
  EXPECT_TRUE(eval::accuracy_match("I think blue", p));
  EXPECT_FALSE(eval::accuracy_match("A) red", p));
  EXPECT_FALSE(eval::accuracy_match("C", p));
}

TEST(Accuracy, SelectedOption) {
  EXPECT_EQ(eval::selected_option("(C)", 4), 2u);
  EXPECT_EQ(eval::selected_option("Answer: D.", 4), 3u);
  EXPECT_EQ(eval::selected_option("E", 4), std::nullopt);
  EXPECT_EQ(eval::selected_option("A nice day", 4), std::nullopt);
}

TEST(Accuracy, NoGroundTruth) {
  data::Prompt p;
  p.id = "x";
  try {
    eval::accuracy_match("anything", p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNoGroundTruth);
  }
}

TEST(ItemFaithfulness, IdentityGivesTwo) {
  const auto r = eval::item_faithfulness("Paris is the capital", "Paris is the capital", labeled("Paris"));
  EXPECT_NEAR(r.contribution, 2.0, 1e-9);
  EXPECT_TRUE(r.accurate);
}

TEST(ItemFaithfulness, InaccurateIsZero) {
  const auto r = eval::item_faithfulness("London", "London", labeled("Paris"));
  EXPECT_EQ(r.contribution, 0.0);
  EXPECT_FALSE(r.accurate);
  EXPECT_NEAR(r.cosine, 1.0, 1e-9);
}

TEST(ItemFaithfulness, ComposedOracle) {
  const auto r = eval::item_faithfulness("the cat", "the cat sat", labeled("cat"));
  const double cos = text::cosine_similarity(text::embed_text("the cat"), text::embed_text("the cat sat"));
  // N = 2, p1 = p2 = 1, BP = exp(1 - 3/2).
  const double bleu = std::exp(1.0 - 1.5);
  EXPECT_NEAR(r.rouge, 0.8, 1e-12);
  EXPECT_NEAR(r.bleu, bleu, 1e-12);
  EXPECT_NEAR(r.contribution, cos * (bleu + 0.8), 1e-12);
}

TEST(ItemFaithfulness, UnlabeledCountsAsAccurate) {
  data::Prompt p;
  p.id = "u";
  const auto r = eval::item_faithfulness("x y", "x y", p);
  EXPECT_TRUE(r.accurate);
  EXPECT_FALSE(r.has_ground_truth);
  EXPECT_NEAR(r.contribution, 2.0, 1e-9);
}

TEST(MethodFaithfulness, GroupAverage) {
  auto w = data::parse_dataset(
      "{\"id\":\"a\",\"question\":\"qa\",\"answer\":\"x\"}\n{\"id\":\"b\",\"question\":\"qb\",\"answer\":\"y\"}\n"
      "{\"id\":\"c\",\"question\":\"qc\",\"answer\":\"z\"}");
  const eval::AnswerMap base{{"a", "x one"}, {"b", "y two"}, {"c", "z three"}};
  // Group 1 holds a (d = 2); group 2 holds b and c (d = 4).
  const auto s = eval::method_faithfulness(plan_of({{"a"}, {"b", "c"}}), base, base, w);
  ASSERT_EQ(s.per_group_d.size(), 2u);
  EXPECT_NEAR(s.per_group_d[0], 2.0, 1e-9);
  EXPECT_NEAR(s.per_group_d[1], 4.0, 1e-9);
  EXPECT_NEAR(s.overall_dh, 3.0, 1e-9);
  EXPECT_NEAR(s.per_item_mean, 2.0, 1e-9);
}

TEST(MethodFaithfulness, SeparateVersusItselfScalesWithAccuracy) {
  auto w = data::parse_dataset(
      "{\"id\":\"a\",\"question\":\"qa\",\"answer\":\"x\"}\n{\"id\":\"b\",\"question\":\"qb\",\"answer\":\"y\"}");
  const eval::AnswerMap answers{{"a", "x"}, {"b", "wrong"}};
  const auto s = eval::method_faithfulness(plan_of({{"a"}, {"b"}}), answers, answers, w);
  EXPECT_NEAR(s.overall_dh, 2.0 * 0.5, 1e-9);
}

TEST(MethodFaithfulness, MissingAnswer) {
  auto w = data::parse_dataset("{\"id\":\"a\",\"question\":\"qa\"}");
  try {
    eval::method_faithfulness(plan_of({{"a"}}), {}, {{"a", "x"}}, w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kMissingAnswer);
  }
}

TEST(MethodFaithfulness, PermutationInvariant) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const auto w = cptest::random_workload(rng, 12);
    eval::AnswerMap batched;
    eval::AnswerMap base;
    for (const auto& p : w.prompts) {
      base[p.id] = *p.ground_truth + " " + cptest::random_sentence(rng, 1, 6);
      batched[p.id] = (trial % 2 ? *p.ground_truth + " " : std::string()) + cptest::random_sentence(rng, 1, 6);
    }
    const auto plan = clique::make_grouping(clique::CliqueMethod::kRC, w, 4, rng());
    auto shuffled = plan;
    std::shuffle(shuffled.groups.begin(), shuffled.groups.end(), rng);
    for (auto& g : shuffled.groups) std::shuffle(g.member_ids.begin(), g.member_ids.end(), rng);
    const auto a = eval::method_faithfulness(plan, batched, base, w);
    const auto b = eval::method_faithfulness(shuffled, batched, base, w);
    EXPECT_EQ(a.overall_dh, b.overall_dh);
    for (const auto& item : a.per_item) {
      EXPECT_GE(item.contribution, 0.0);
      EXPECT_LE(item.contribution, 2.0 + 1e-12);
      if (!item.accurate) {
        EXPECT_EQ(item.contribution, 0.0);
      }
    }
  }
}

TEST(Efficiency, RelativeCost) {
  EXPECT_NEAR(eval::relative_cost(220, 200, 100, 100, 1.0), 2.1, 1e-12);
  EXPECT_DOUBLE_EQ(eval::relative_cost(5, 5, 7, 7, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(eval::relative_cost(200, 200, 50, 100, 1.0), 1.5);
  EXPECT_THROW(eval::relative_cost(1, 0, 1, 1, 1.0), Error);
  EXPECT_THROW(eval::relative_cost(1, 1, 1, 0, 1.0), Error);
}

TEST(Efficiency, WeightedEfficiency) {
  EXPECT_NEAR(eval::weighted_efficiency(4, 10, 0.8), 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(eval::weighted_efficiency(3, 3, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(eval::weighted_efficiency(5, 10, 2.0), 4.0);
  try {
    eval::weighted_efficiency(0, 1, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kDivisionByZero);
  }
}

TEST(Efficiency, Monotonicity) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(1.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double in_a = u(rng), in_b = u(rng), out_a = u(rng), out_b = u(rng), w = u(rng) / 100.0;
    EXPECT_LT(eval::relative_cost(in_a, in_b, out_a, out_b, w), eval::relative_cost(in_a, in_b, out_a + 1, out_b, w));
    EXPECT_LT(eval::relative_cost(in_a, in_b, out_a, out_b, w), eval::relative_cost(in_a + 1, in_b, out_a, out_b, w));
    const double c = u(rng);
    EXPECT_GT(eval::weighted_efficiency(in_a, in_b, c), eval::weighted_efficiency(in_a + 1, in_b, c));
  }
}

TEST(Efficiency, ReportIdentity) {
  const auto r = eval::efficiency_report(clique::CliqueMethod::kRC, {4.0, 220, 50}, clique::CliqueMethod::kSeparate,
                                         {10.0, 200, 100}, 1.0);
  EXPECT_NEAR(r.relative_cost_c, 1.6, 1e-12);
  EXPECT_DOUBLE_EQ(r.weighted_efficiency_e, (10.0 / 4.0) * r.relative_cost_c);
  EXPECT_NEAR(r.output_ratio, 0.5, 1e-12);
  const auto self = eval::efficiency_report(clique::CliqueMethod::kSeparate, {10.0, 200, 100},
                                            clique::CliqueMethod::kSeparate, {10.0, 200, 100}, 0.7);
  EXPECT_DOUBLE_EQ(self.weighted_efficiency_e, 1.7);
}

TEST(BatchingGain, Values) {
  EXPECT_DOUBLE_EQ(eval::batching_gain(1, 0.5, 3.0), 1.0);
  EXPECT_NEAR(eval::batching_gain(4, 0.5, 2.6), 1.5769230769, 1e-9);
  for (std::size_t m = 1; m < 20; ++m) EXPECT_LT(eval::batching_gain(m, 0.5, 2.0), eval::batching_gain(m + 1, 0.5, 2.0));
}

TEST(FitCostModel, RecoversKnownParams) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> in(5, 800);
  std::uniform_int_distribution<int> out(1, 300);
  std::vector<eval::TimingSample> samples;
  for (int i = 0; i < 20; ++i) {
    const double a = in(rng), b = out(rng);
    samples.push_back({a, b, 0.7 + 0.002 * a + 0.04 * b});
  }
  const auto fit = eval::fit_cost_model(samples);
  EXPECT_NEAR(fit.params.base_seconds, 0.7, 1e-6);
  EXPECT_NEAR(fit.params.in_coeff, 0.002, 1e-6);
  EXPECT_NEAR(fit.params.out_coeff, 0.04, 1e-6);
  EXPECT_LT(fit.rms_residual, 1e-9);
}

TEST(FitCostModel, RankDeficient) {
  const std::vector<eval::TimingSample> constant{{10, 5, 1.0}, {10, 5, 1.1}, {10, 5, 0.9}, {10, 5, 1.0}};
  const std::vector<eval::TimingSample> collinear{{10, 20, 1.0}, {20, 40, 1.5}, {30, 60, 2.0}};
  const std::vector<eval::TimingSample> too_few{{1, 2, 1.0}, {3, 4, 2.0}};
  for (const auto* s : {&constant, &collinear, &too_few}) {
    try {
      eval::fit_cost_model(*s);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kRankDeficient);
    }
  }
}

TEST(OrderedSum, IndependentOfOrder) {
  std::vector<double> v{0.1, 1e16, -1e16, 0.2, 0.3};
  auto w = v;
  std::reverse(w.begin(), w.end());
  EXPECT_EQ(eval::ordered_sum(v), eval::ordered_sum(w));
}
