// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cliqueparcel/backend.hpp"
#include "cliqueparcel/clique.hpp"
#include "cliqueparcel/data.hpp"
#include "cliqueparcel/eval.hpp"

namespace cliqueparcel::experiment {

struct ExperimentConfig {
  std::filesystem::path dataset_path;
  std::vector<clique::CliqueMethod> methods;  // SEPARATE is always run first
  std::size_t batch_size = 4;
  std::size_t repetitions = 10;
  std::uint64_t seed = 0;
  backend::BackendConfig backend;
  std::optional<backend::CostModelParams> cost_params;
  backend::SimulationOptions simulation;
  double efficiency_weight = 1.0;
  std::vector<double> owa_sweep;  // empty means 0.0:1.0:0.1
  std::optional<std::filesystem::path> answers_path;
  std::optional<std::size_t> users;
  std::optional<std::filesystem::path> output_path;
  bool deterministic_report = false;
  std::size_t embedding_dim = text::kDefaultEmbeddingDim;
};

// Throws kInvalidConfig.
void validate(const ExperimentConfig& config);

// JSON object with the field names above; unknown keys are rejected.
ExperimentConfig config_from_json(std::string_view json_text);
std::string config_to_json(const ExperimentConfig& config);

// Methods in run order: SEPARATE, then the configured ones without repeats.
std::vector<clique::CliqueMethod> run_order(const ExperimentConfig& config);

struct MethodReport {
  clique::CliqueMethod method = clique::CliqueMethod::kSeparate;
  clique::GroupingPlan plan;
  eval::EfficiencyReport efficiency;
  eval::FaithfulnessScore faithfulness;
  std::optional<double> accuracy;  // nullopt when no prompt is labeled
  std::size_t labeled_count = 0;
  std::vector<std::pair<double, double>> owa_scores;  // (weight, score)
  std::vector<double> repetition_times;
  std::size_t call_count = 0;           // per repetition
  std::size_t parse_failure_count = 0;  // groups whose completion did not parse completely
  std::size_t fallback_count = 0;       // members re-issued individually
  std::size_t missing_count = 0;        // members left without an answer
  eval::AnswerMap answers;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::string workload_name;
  std::size_t prompt_count = 0;
  std::string backend_id;
  std::vector<MethodReport> per_method;
  std::vector<std::pair<double, clique::CliqueMethod>> owa_selection;
  double separate_self_efficiency = 0.0;  // must equal w + 1
  bool live = false;
  bool partial = false;
  std::optional<std::string> error;
  std::optional<Errc> error_code;
};

// Runs every method in run_order() through `backend`. Groups of one method
// run concurrently on up to backend.max_in_flight workers and are joined in
// plan order. A backend failure stops the run and leaves a partial report.
ExperimentReport run_experiment(const ExperimentConfig& config, const data::Workload& workload,
                                backend::CompletionBackend& backend);

// Builds the backend from the config (scripted answers from answers_path or
// the workload) and runs it.
ExperimentReport run_experiment(const ExperimentConfig& config, const data::Workload& workload);

// Backend for `config`, with simulator answers drawn from `workload`.
std::unique_ptr<backend::CompletionBackend> backend_for(const ExperimentConfig& config,
                                                        const data::Workload& workload);

struct SweepRow {
  std::size_t l = 1;
  double total_time_s = 0.0;
  double gain = 0.0;  // SEPARATE time / time at l
  double output_ratio = 0.0;
  double input_ratio = 0.0;
  std::size_t calls = 0;
  std::size_t parse_failures = 0;
};

// The first non-SEPARATE configured method (RC when none) at each size.
std::vector<SweepRow> sweep_batch_size(const ExperimentConfig& config, const data::Workload& workload,
                                       backend::CompletionBackend& backend, const std::vector<std::size_t>& sizes);

std::string sweep_csv(const std::vector<SweepRow>& rows);

// Summary block, blank line, then z-score histogram bins.
std::string stats_csv(const data::Workload& workload, double bin_width = 0.5);

// "in_tokens,out_tokens,seconds" CSV or replay-cache JSONL.
std::vector<eval::TimingSample> load_timing_log(const std::filesystem::path& path);

// Report JSON. Non-deterministic reports also carry a generation timestamp.
std::string report_to_json(const ExperimentReport& report);
std::string report_table(const ExperimentReport& report);
// method,repetition,seconds
std::string timing_csv(const ExperimentReport& report);

}  // namespace cliqueparcel::experiment
