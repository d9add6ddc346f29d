// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cliqueparcel::data {

inline constexpr std::string_view kDefaultUser = "u0";

struct Prompt {
  std::string id;
  std::string user_id{kDefaultUser};
  std::string text;      // context + "\n" + question, or the bare question
  std::string question;  // the question part alone
  std::optional<std::string> concept_label;
  std::optional<std::string> ground_truth;
  std::optional<std::vector<std::string>> choices;

  // Index into `choices` named by ground_truth (a letter A-Z or exact text).
  std::optional<std::size_t> ground_truth_choice() const;
};

struct Workload {
  std::string name;
  std::vector<Prompt> prompts;

  std::size_t size() const noexcept { return prompts.size(); }
  const Prompt* find(std::string_view id) const;
};

// One Prompt per non-blank JSONL line, in file order.
//   kIoError       file cannot be opened
//   kParseError    malformed JSON (detail = 1-based line number)
//   kSchemaError   missing/empty question, bad field types, duplicate id,
//                  ground truth that names no choice (detail = line number)
//   kEmptyWorkload zero valid lines
Workload load_dataset(const std::filesystem::path& path);
Workload parse_dataset(std::string_view jsonl, std::string name = "inline");

// Inverse of load_dataset at record level.
std::string serialize_dataset(const Workload& workload);

// Reassigns user ids u0..u{n-1} round-robin over the prompt order.
void assign_users_round_robin(Workload& workload, std::size_t user_count);

// Question-type label from the first interrogative word:
// what, when, where, who, why, how, or other.
std::string classify_question(std::string_view question);

struct LengthStats {
  double mean_tokens = 0.0;
  double stdev_tokens = 0.0;  // population
  double rsd_percent = 0.0;
  std::vector<double> z_scores;
  std::vector<std::size_t> lengths;
};

LengthStats length_dispersion_stats(const Workload& workload);

struct HistogramBin {
  double lo;
  double hi;
  std::size_t count;
};

// Fixed-width bins over [lo, hi); values outside are clamped into the end bins.
std::vector<HistogramBin> histogram(const std::vector<double>& values, double lo, double hi,
                                    double width);

}  // namespace cliqueparcel::data
