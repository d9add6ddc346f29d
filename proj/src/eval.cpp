// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include "cliqueparcel/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>

#include "cliqueparcel/error.hpp"

namespace cliqueparcel::eval {
namespace {

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

bool contains_words(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return haystack.empty();
  return (" " + haystack + " ").find(" " + needle + " ") != std::string::npos;
}

bool letter_boundary(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

std::string normalize_answer(std::string_view s) {
  std::string spaced;
  spaced.reserve(s.size());
  for (unsigned char c : text::casefold(s)) {
    spaced += is_ascii_punct(c) || std::isspace(c) != 0 ? ' ' : static_cast<char>(c);
  }
  std::string out;
  std::size_t i = 0;
  while (i < spaced.size()) {
    while (i < spaced.size() && spaced[i] == ' ') ++i;
    std::size_t j = i;
    while (j < spaced.size() && spaced[j] != ' ') ++j;
    if (j > i) {
      std::string_view word(spaced.data() + i, j - i);
      if (word != "a" && word != "an" && word != "the") {
        if (!out.empty()) out += ' ';
        out += word;
      }
    }
    i = j;
  }
  return out;
}

std::optional<std::size_t> selected_option(std::string_view answer, std::size_t choice_count) {
  if (choice_count == 0) return std::nullopt;
  const char last = static_cast<char>('A' + std::min<std::size_t>(choice_count, 26) - 1);
  auto is_option = [&](char c) { return c >= 'A' && c <= last; };
  const std::size_t n = answer.size();
  auto before = [&](std::size_t i) { return i == 0 ? ' ' : answer[i - 1]; };
  auto after = [&](std::size_t i) { return i + 1 >= n ? ' ' : answer[i + 1]; };

  // "(B" or "B)"
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_option(answer[i])) continue;
    const char b = before(i);
    const char a = after(i);
    if ((b == '(' && (a == ')' || letter_boundary(a))) || ((letter_boundary(b) || b == ':') && a == ')')) {
      return static_cast<std::size_t>(answer[i] - 'A');
    }
  }
  // "B." / "B:" / "B," at a word boundary
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_option(answer[i])) continue;
    const char b = before(i);
    const char a = after(i);
    if ((letter_boundary(b) || b == ':') && (a == '.' || a == ':' || a == ',') &&
        (i + 2 >= n || letter_boundary(answer[i + 2]))) {
      return static_cast<std::size_t>(answer[i] - 'A');
    }
  }
  // The whole answer is a single letter.
  std::string_view t = answer;
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front())) != 0) t.remove_prefix(1);
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back())) != 0) t.remove_suffix(1);
  if (t.size() == 1 && is_option(t[0])) return static_cast<std::size_t>(t[0] - 'A');
  return std::nullopt;
}

bool accuracy_match(std::string_view answer, const data::Prompt& prompt) {
  if (!prompt.ground_truth) throw Error(Errc::kNoGroundTruth, "prompt '" + prompt.id + "' has no ground truth");
  const std::string norm_answer = normalize_answer(answer);
  if (auto choice = prompt.ground_truth_choice()) {
    if (selected_option(answer, prompt.choices->size()) == choice) return true;
    return contains_words(norm_answer, normalize_answer((*prompt.choices)[*choice]));
  }
  return contains_words(norm_answer, normalize_answer(*prompt.ground_truth));
}

ItemFaithfulness item_faithfulness(std::string_view batched_answer, std::string_view separate_answer,
                                   const data::Prompt& prompt, std::size_t embedding_dim) {
  ItemFaithfulness r;
  r.prompt_id = prompt.id;
  r.cosine = text::cosine_similarity(text::embed_text(batched_answer, embedding_dim),
                                     text::embed_text(separate_answer, embedding_dim));
  r.bleu = text::bleu_score(batched_answer, separate_answer);
  r.rouge = text::rouge_l_score(batched_answer, separate_answer);
  r.has_ground_truth = prompt.ground_truth.has_value();
  r.accurate = r.has_ground_truth ? accuracy_match(batched_answer, prompt) : true;
  r.contribution = r.accurate ? r.cosine * (r.bleu + r.rouge) : 0.0;
  return r;
}

FaithfulnessScore method_faithfulness(const clique::GroupingPlan& plan, const AnswerMap& batched_answers,
                                      const AnswerMap& baseline_answers, const data::Workload& workload,
                                      std::size_t embedding_dim) {
  FaithfulnessScore score;
  std::vector<double> contributions;
  for (const auto& group : plan.groups) {
    double d = 0.0;
    for (const auto& id : group.member_ids) {
      const auto* prompt = workload.find(id);
      if (prompt == nullptr) throw Error(Errc::kMissingAnswer, "prompt '" + id + "' is not in the workload");
      auto a = batched_answers.find(id);
      auto b = baseline_answers.find(id);
      if (a == batched_answers.end() || b == baseline_answers.end()) {
        throw Error(Errc::kMissingAnswer, "no answer for prompt '" + id + "'");
      }
      auto item = item_faithfulness(a->second, b->second, *prompt, embedding_dim);
      d += item.contribution;
      contributions.push_back(item.contribution);
      score.per_item.push_back(std::move(item));
    }
    score.per_group_d.push_back(d);
  }
  // Summed independently of group composition, so plans that differ only in
  // layout score identically.
  const double total = ordered_sum(std::move(contributions));
  if (!score.per_group_d.empty()) score.overall_dh = total / static_cast<double>(score.per_group_d.size());
  if (!score.per_item.empty()) score.per_item_mean = total / static_cast<double>(score.per_item.size());
  return score;
}

double relative_cost(double in_a, double in_b, double out_a, double out_b, double w) {
  if (in_b <= 0.0 || out_b <= 0.0) {
    throw Error(Errc::kDivisionByZero, "baseline token counts must be positive");
  }
  return w * (in_a / in_b) + out_a / out_b;
}

double weighted_efficiency(double t_a, double t_b, double c) {
  if (!(t_a > 0.0)) throw Error(Errc::kDivisionByZero, "method time must be positive");
  return (t_b / t_a) * c;
}

double batching_gain(std::size_t m, double base_seconds, double t_batch) {
  if (m < 1 || !(t_batch > 0.0)) throw Error(Errc::kInvalidConfig, "batching_gain needs m >= 1 and t_batch > 0");
  return static_cast<double>(m - 1) * base_seconds / t_batch + 1.0;
}

EfficiencyReport efficiency_report(clique::CliqueMethod method, const MethodTotals& a, clique::CliqueMethod baseline,
                                   const MethodTotals& b, double w) {
  EfficiencyReport r;
  r.method = method;
  r.baseline = baseline;
  r.total_time_s = a.time_s;
  r.total_in_tokens = a.in_tokens;
  r.total_out_tokens = a.out_tokens;
  r.weight_w = w;
  const auto in_a = static_cast<double>(a.in_tokens);
  const auto in_b = static_cast<double>(b.in_tokens);
  const auto out_a = static_cast<double>(a.out_tokens);
  const auto out_b = static_cast<double>(b.out_tokens);
  r.relative_cost_c = relative_cost(in_a, in_b, out_a, out_b, w);
  r.input_ratio = in_a / in_b;
  r.output_ratio = out_a / out_b;
  r.weighted_efficiency_e = weighted_efficiency(a.time_s, b.time_s, r.relative_cost_c);
  r.time_ratio = b.time_s / a.time_s;
  return r;
}

CostModelFit fit_cost_model(std::span<const TimingSample> samples) {
  if (samples.size() < 3) throw Error(Errc::kRankDeficient, "need at least 3 timing samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd seconds(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    design(i, 0) = 1.0;
    design(i, 1) = s.in_tokens;
    design(i, 2) = s.out_tokens;
    seconds(i) = s.seconds;
  }
  // Column scaling keeps the rank threshold meaningful when token counts are
  // orders of magnitude larger than the intercept column.
  Eigen::Vector3d scale = design.colwise().norm().transpose();
  for (int k = 0; k < 3; ++k) {
    if (scale(k) == 0.0) throw Error(Errc::kRankDeficient, "a design column is identically zero");
  }
  Eigen::MatrixXd scaled = design * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw Error(Errc::kRankDeficient, "input/output lengths are constant or collinear");
  Eigen::Vector3d coef = qr.solve(seconds).cwiseQuotient(scale);

  CostModelFit fit;
  fit.params.base_seconds = coef(0);
  fit.params.in_coeff = coef(1);
  fit.params.out_coeff = coef(2);
  const Eigen::VectorXd residual = design * coef - seconds;
  fit.rms_residual = std::sqrt(residual.squaredNorm() / static_cast<double>(n));
  return fit;
}

double ordered_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

}  // namespace cliqueparcel::eval
