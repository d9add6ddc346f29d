// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cliqueparcel/backend.hpp"
#include "cliqueparcel/clique.hpp"
#include "cliqueparcel/data.hpp"
#include "cliqueparcel/text.hpp"

namespace cliqueparcel::eval {

// Casefold, drop punctuation, drop the articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view s);

// Free text: normalized ground truth is a substring of the normalized answer.
// Multiple choice: the selected option letter or the option text matches the
// ground-truth choice. Throws kNoGroundTruth.
bool accuracy_match(std::string_view answer, const data::Prompt& prompt);

// First standalone option letter in `answer` within the first `choice_count`
// letters ("B", "(B)", "B)", "B.", "B:"), if any.
std::optional<std::size_t> selected_option(std::string_view answer, std::size_t choice_count);

struct ItemFaithfulness {
  std::string prompt_id;
  double cosine = 0.0;
  double bleu = 0.0;
  double rouge = 0.0;
  bool accurate = false;
  bool has_ground_truth = true;
  double contribution = 0.0;  // cosine * (bleu + rouge) * [accurate]
};

// Unlabeled prompts count as accurate and are flagged via has_ground_truth.
ItemFaithfulness item_faithfulness(std::string_view batched_answer, std::string_view separate_answer,
                                   const data::Prompt& prompt, std::size_t embedding_dim = text::kDefaultEmbeddingDim);

struct FaithfulnessScore {
  std::vector<ItemFaithfulness> per_item;  // plan order
  std::vector<double> per_group_d;
  double overall_dh = 0.0;      // (1/c) * sum_k d_k
  double per_item_mean = 0.0;   // supplementary: mean contribution per prompt
};

using AnswerMap = std::map<std::string, std::string, std::less<>>;

// Throws kMissingAnswer when either map lacks a planned prompt.
FaithfulnessScore method_faithfulness(const clique::GroupingPlan& plan, const AnswerMap& batched_answers,
                                      const AnswerMap& baseline_answers, const data::Workload& workload,
                                      std::size_t embedding_dim = text::kDefaultEmbeddingDim);

// w * in_a/in_b + out_a/out_b. Throws kDivisionByZero for empty baselines.
double relative_cost(double in_a, double in_b, double out_a, double out_b, double w);

// (t_b / t_a) * c. Throws kDivisionByZero when t_a <= 0.
double weighted_efficiency(double t_a, double t_b, double c);

// (m - 1) * b / t_batch + 1.
double batching_gain(std::size_t m, double base_seconds, double t_batch);

struct MethodTotals {
  double time_s = 0.0;
  std::size_t in_tokens = 0;
  std::size_t out_tokens = 0;
};

struct EfficiencyReport {
  clique::CliqueMethod method = clique::CliqueMethod::kSeparate;
  clique::CliqueMethod baseline = clique::CliqueMethod::kSeparate;
  double total_time_s = 0.0;
  std::size_t total_in_tokens = 0;
  std::size_t total_out_tokens = 0;
  double relative_cost_c = 0.0;
  double weighted_efficiency_e = 0.0;
  double weight_w = 1.0;
  double input_ratio = 0.0;
  double output_ratio = 0.0;
  double time_ratio = 0.0;  // t_b / t_a
};

// Evaluated on workload totals of method `a` against baseline `b`.
EfficiencyReport efficiency_report(clique::CliqueMethod method, const MethodTotals& a,
                                   clique::CliqueMethod baseline, const MethodTotals& b, double w);

struct TimingSample {
  double in_tokens;
  double out_tokens;
  double seconds;
};

struct CostModelFit {
  backend::CostModelParams params;
  double rms_residual = 0.0;
};

// Least squares on [1, in, out]. Throws kRankDeficient for fewer than three
// samples or a design without full column rank.
CostModelFit fit_cost_model(std::span<const TimingSample> samples);

// Sum of the values in ascending order, so equal multisets sum identically.
double ordered_sum(std::vector<double> values);

}  // namespace cliqueparcel::eval
