// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cliqueparcel/batch.hpp"
#include "cliqueparcel/data.hpp"
#include "cliqueparcel/error.hpp"

namespace cliqueparcel::backend {

inline constexpr std::string_view kApiKeyEnv = "CLIQUEPARCEL_API_KEY";

// t = base + in_coeff * l(prompt) + out_coeff * l(answer)
struct CostModelParams {
  double base_seconds = 0.5;
  double in_coeff = 0.001;
  double out_coeff = 0.05;

  double latency(std::size_t in_tokens, std::size_t out_tokens) const {
    return base_seconds + in_coeff * static_cast<double>(in_tokens) +
           out_coeff * static_cast<double>(out_tokens);
  }
  // Output tokens are expected to cost at least as much as input tokens.
  bool output_dominates() const { return out_coeff >= in_coeff; }
};

// Throws kInvalidConfig for base <= 0 or negative coefficients.
void validate(const CostModelParams& params);

struct CompletionResult {
  std::string text;
  std::size_t input_tokens = 0;
  std::size_t output_tokens = 0;
  double latency_seconds = 0.0;
  std::string backend_id;

  bool operator==(const CompletionResult&) const = default;
};

enum class BackendKind { kHttp, kSimulated, kReplay };

std::string_view kind_name(BackendKind kind);
BackendKind parse_kind(std::string_view name);

struct BackendConfig {
  BackendKind kind = BackendKind::kSimulated;
  std::optional<std::string> endpoint_url;
  std::optional<std::string> model_name;
  double temperature = 0.0;
  std::size_t max_in_flight = 4;
  double timeout_seconds = 60.0;
  bool fallback_separate = false;
  std::optional<std::filesystem::path> cache_path;
  int max_retries = 3;
  double retry_backoff_seconds = 0.5;  // doubled per retry
};

// Throws kInvalidConfig (http without endpoint/model, replay without cache,
// max_in_flight == 0, ...).
void validate(const BackendConfig& config);

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual CompletionResult complete(std::string_view prompt_text) = 0;
  virtual std::string id() const = 0;
};

// Simulated time; advancing never sleeps.
class SimClock {
 public:
  double now() const {
    std::lock_guard lock(mu_);
    return now_;
  }
  void advance(double seconds) {
    std::lock_guard lock(mu_);
    now_ += seconds;
  }

 private:
  mutable std::mutex mu_;
  double now_ = 0.0;
};

// The scripted answer mapping for the simulator: prompt text -> answer.
// Batched prompts are resolved member by member against the known texts.
class ScriptedAnswers {
 public:
  void add(std::string prompt_text, std::string answer);
  void add(const data::Prompt& prompt, std::string answer) { add(prompt.text, std::move(answer)); }

  std::optional<std::string> lookup(std::string_view prompt_text) const;
  // Member texts of a build_batch() prompt, or nullopt when `text` is not a
  // batch of known prompts.
  std::optional<std::vector<std::string>> split_batch(std::string_view text) const;
  std::size_t size() const noexcept { return answers_.size(); }

  // Deterministic answers derived from each prompt: the ground truth wrapped
  // in a sentence that restates the question, or an echo when unlabeled.
  static ScriptedAnswers from_workload(const data::Workload& workload);
  // JSONL of {"id": ..., "answer": ...}; throws kSchemaError for unknown ids.
  static ScriptedAnswers from_file(const data::Workload& workload, const std::filesystem::path& path);

 private:
  bool split_from(std::string_view text, std::size_t pos, std::size_t k, std::vector<std::string>& out) const;

  std::unordered_map<std::string, std::string> answers_;
};

enum class OverheadMode {
  kCounted,  // template and itemization tokens are billed
  kZero,     // synthetic: batched lengths are the plain sums of member lengths
};

struct SimulationOptions {
  double discount = 1.0;  // fraction of each member answer kept in batched outputs
  OverheadMode overhead = OverheadMode::kCounted;
};

// Cost-model completion. Throws kUnknownPrompt.
CompletionResult simulate_complete(const CostModelParams& params, std::string_view prompt_text,
                                   const ScriptedAnswers& answers, SimClock& clock,
                                   const SimulationOptions& options = {});

class SimulatedBackend : public CompletionBackend {
 public:
  SimulatedBackend(CostModelParams params, std::shared_ptr<const ScriptedAnswers> answers,
                   SimulationOptions options = {}, std::shared_ptr<SimClock> clock = nullptr);

  CompletionResult complete(std::string_view prompt_text) override;
  std::string id() const override { return "simulated"; }
  const SimClock& clock() const { return *clock_; }

 private:
  CostModelParams params_;
  std::shared_ptr<const ScriptedAnswers> answers_;
  SimulationOptions options_;
  std::shared_ptr<SimClock> clock_;
};

// Chat-completions client. Retries 429/5xx/timeouts with exponential backoff;
// latency reports the successful attempt only.
class HttpBackend : public CompletionBackend {
 public:
  explicit HttpBackend(BackendConfig config);

  CompletionResult complete(std::string_view prompt_text) override;
  std::string id() const override { return "http:" + config_.model_name.value_or(""); }

  // Request body for `prompt_text` in the wire format.
  std::string request_body(std::string_view prompt_text) const;

 private:
  CompletionResult attempt(std::string_view prompt_text);

  BackendConfig config_;
  std::string base_url_;
  std::string path_;
};

// Parses a chat-completions response body. Throws kMalformedResponse.
CompletionResult parse_chat_response(std::string_view body, double latency_seconds, std::string backend_id,
                                     std::string_view prompt_text);

std::string sha256_hex(std::string_view bytes);

struct CacheRecord {
  std::string key_hash;
  std::string model;
  std::string prompt_sha256;
  std::string response_text;
  std::size_t in_tokens = 0;
  std::size_t out_tokens = 0;
  double latency_s = 0.0;
};

// JSONL record/replay store keyed by (model, sha256(prompt)). Concurrent
// lookups, serialized appends.
class ReplayCache {
 public:
  explicit ReplayCache(std::filesystem::path path);

  static std::string key_for(std::string_view model, std::string_view prompt_text);

  std::optional<CacheRecord> lookup(std::string_view model, std::string_view prompt_text) const;
  void record(std::string_view model, std::string_view prompt_text, const CompletionResult& result);
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, CacheRecord> records_;
};

class ReplayBackend : public CompletionBackend {
 public:
  ReplayBackend(std::shared_ptr<const ReplayCache> cache, std::string model);
  // Throws kCacheMiss.
  CompletionResult complete(std::string_view prompt_text) override;
  std::string id() const override { return "replay:" + model_; }

 private:
  std::shared_ptr<const ReplayCache> cache_;
  std::string model_;
};

// Forwards to `inner` and appends every result to the cache.
class RecordingBackend : public CompletionBackend {
 public:
  RecordingBackend(std::unique_ptr<CompletionBackend> inner, std::shared_ptr<ReplayCache> cache, std::string model);
  CompletionResult complete(std::string_view prompt_text) override;
  std::string id() const override { return inner_->id(); }

 private:
  std::unique_ptr<CompletionBackend> inner_;
  std::shared_ptr<ReplayCache> cache_;
  std::string model_;
};

// Caps concurrent complete() calls on the wrapped backend.
class ThrottledBackend : public CompletionBackend {
 public:
  ThrottledBackend(std::shared_ptr<CompletionBackend> inner, std::size_t max_in_flight);
  CompletionResult complete(std::string_view prompt_text) override;
  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<CompletionBackend> inner_;
  std::size_t limit_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
};

// What a backend of each kind needs beyond its config.
struct BackendResources {
  std::shared_ptr<const ScriptedAnswers> answers;  // simulated
  CostModelParams cost_params;                      // simulated
  SimulationOptions simulation;                     // simulated
  std::shared_ptr<SimClock> clock;                  // simulated, optional
};

std::unique_ptr<CompletionBackend> make_backend(const BackendConfig& config, const BackendResources& resources = {});

// One-shot completion through a backend built from `config`.
CompletionResult complete(const BackendConfig& config, std::string_view prompt_text,
                          const BackendResources& resources = {});

struct RunGroupOptions {
  bool fallback_separate = false;
};

// Per-prompt answers for one group plus every backend call it took.
struct GroupOutcome {
  std::vector<std::string> member_ids;
  std::vector<std::string> answers;  // aligned with member_ids; empty when missing
  std::vector<bool> answered;
  std::vector<bool> from_fallback;
  std::vector<CompletionResult> calls;  // calls[0] is the group call
  std::optional<batch::ParsedAnswers> parse;
  std::vector<std::size_t> missing;  // 1-based, after any fallback
  bool batched = false;
  bool anchor_like_prompt = false;
  bool parse_failed = false;

  std::size_t input_tokens() const;
  std::size_t output_tokens() const;
  std::vector<double> latencies() const;
};

class DispatchIncomplete : public Error {
 public:
  explicit DispatchIncomplete(GroupOutcome outcome);
  const GroupOutcome& outcome() const noexcept { return outcome_; }

 private:
  GroupOutcome outcome_;
};

// Builds the batch (size > 1) or passes the prompt through (size 1),
// completes, and dispatches the parsed items back to the members. With
// fallback_separate, missing members are re-issued individually; otherwise an
// incomplete parse throws DispatchIncomplete carrying the partial outcome.
GroupOutcome run_group(CompletionBackend& backend, std::span<const data::Prompt> group,
                       const RunGroupOptions& options = {});

}  // namespace cliqueparcel::backend
