// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cliqueparcel/data.hpp"
#include "cliqueparcel/text.hpp"

namespace cliqueparcel::clique {

enum class CliqueMethod { kSeparate, kCC, kRC, kSSC, kCpSC, kALC, kMDC, kRpALC };

inline constexpr std::array<CliqueMethod, 8> kAllMethods = {
    CliqueMethod::kSeparate, CliqueMethod::kCC,  CliqueMethod::kRC,  CliqueMethod::kSSC,
    CliqueMethod::kCpSC,     CliqueMethod::kALC, CliqueMethod::kMDC, CliqueMethod::kRpALC};

std::string_view method_tag(CliqueMethod m);
// Accepts the tags case-insensitively. Throws kInvalidConfig.
CliqueMethod parse_method(std::string_view tag);
bool is_concept_based(CliqueMethod m);
bool is_randomized(CliqueMethod m);

struct PromptGroup {
  std::size_t k = 0;  // 1-based clique id
  std::vector<std::string> member_ids;
  std::optional<std::string> concept_label;
};

struct GroupingPlan {
  CliqueMethod method = CliqueMethod::kSeparate;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::vector<PromptGroup> groups;
};

// Symmetric m x m similarity matrix with unit diagonal, row-major.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {
    for (std::size_t i = 0; i < n; ++i) at(i, i) = 1.0;
  }

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    at(i, j) = v;
    at(j, i) = v;
  }

 private:
  double& at(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }
  std::size_t n_ = 0;
  std::vector<double> values_;
};

// Everything the clique functions look at, index-aligned with the prompts.
// Built from a workload, or directly in tests with synthetic lengths and
// similarities.
struct GroupingInputs {
  std::vector<std::string> ids;
  std::vector<double> lengths;
  std::vector<std::optional<std::string>> concepts;
  SimilarityMatrix similarity;

  std::size_t size() const noexcept { return ids.size(); }
};

struct GroupingOptions {
  // Label prompts lacking a concept with data::classify_question.
  bool classify_missing_concepts = true;
  std::size_t embedding_dim = text::kDefaultEmbeddingDim;
};

// Token lengths, resolved concepts (nullopt where unresolvable) and pairwise
// embedding cosines.
GroupingInputs make_inputs(const data::Workload& workload, const GroupingOptions& options = {});

// Only the fields `method` reads; the similarity matrix is left empty for
// methods that never consult it. Throws kMissingConcept when a concept-based
// method needs a label the workload lacks and classification is disabled.
GroupingInputs make_inputs_for(CliqueMethod method, const data::Workload& workload,
                               const GroupingOptions& options = {});

//   SEPARATE  singletons in workload order
//   CC        group by concept, chunk each label in order
//   RC        seeded shuffle, chunk
//   SSC       greedy capacity-constrained nearest-neighbour fill
//   CpSC      CC buckets, SSC within each
//   ALC       longest-processing-time balancing of group token totals
//   MDC       greedy farthest fill (lowest cosine to current members)
//   RpALC     seeded shuffle, then ALC balancing with shuffled-order ties
// Throws kInvalidBatchSize (l < 1), kEmptyWorkload, kMissingConcept.
GroupingPlan make_grouping(CliqueMethod method, const data::Workload& workload, std::size_t l,
                           std::uint64_t seed, const GroupingOptions& options = {});
GroupingPlan make_grouping(CliqueMethod method, const GroupingInputs& inputs, std::size_t l,
                           std::uint64_t seed);

// Lower is better for every method.
//   CC/CpSC         sum over groups of squared deviation of one-hot concepts
//   ALC/RC/RpALC/
//   SEPARATE        sum over groups of (group length - mean group length)^2
//   MDC             sum over groups of cos over ordered member pairs
//   SSC             sum over groups of (1 - cos) over ordered member pairs
double grouping_objective(CliqueMethod method, const GroupingPlan& plan, const GroupingInputs& inputs);
double grouping_objective(CliqueMethod method, const GroupingPlan& plan, const data::Workload& workload,
                          const GroupingOptions& options = {});

inline constexpr std::size_t kBruteForceMaxPrompts = 10;

struct BruteForceResult {
  GroupingPlan plan;
  double objective = 0.0;
  std::size_t candidates = 0;  // partitions enumerated
};

// Exhaustive search over all partitions into ceil(m/l) groups of size <= l.
// Ties resolve to the lexicographically smallest member-id layout.
// Only ALC, MDC and SSC are supported (kUnsupportedMethod otherwise);
// kInstanceTooLarge when m > 10.
BruteForceResult brute_force_grouping(CliqueMethod method, const GroupingInputs& inputs, std::size_t l);
BruteForceResult brute_force_grouping(CliqueMethod method, const data::Workload& workload, std::size_t l,
                                      const GroupingOptions& options = {});

// Throws kSchemaError naming the first violation of the partition and size
// invariants.
void validate_plan(const GroupingPlan& plan, const std::vector<std::string>& workload_ids);

std::string plan_to_json(const GroupingPlan& plan);
GroupingPlan plan_from_json(std::string_view json_text);

// Seeded Fisher-Yates over mt19937_64 with rejection-sampled bounds, so
// shuffles are identical across standard library implementations.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace cliqueparcel::clique
