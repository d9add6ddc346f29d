// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include "cliqueparcel/clique.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <unordered_map>

#include "cliqueparcel/error.hpp"

namespace cliqueparcel::clique {
namespace {

using Groups = std::vector<std::vector<std::size_t>>;

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

bool needs_similarity(CliqueMethod m) {
  return m == CliqueMethod::kSSC || m == CliqueMethod::kCpSC || m == CliqueMethod::kMDC;
}

Groups chunk(const std::vector<std::size_t>& order, std::size_t l) {
  Groups groups;
  for (std::size_t i = 0; i < order.size(); i += l) {
    groups.emplace_back(order.begin() + static_cast<long>(i),
                        order.begin() + static_cast<long>(std::min(order.size(), i + l)));
  }
  return groups;
}

// Seeds group 1 with the first prompt, later groups with the unassigned prompt
// of lowest mean cosine to everything assigned so far, then fills with the
// seed's l-1 nearest unassigned neighbours.
Groups similarity_fill(const std::vector<std::size_t>& subset, std::size_t l, const SimilarityMatrix& sim) {
  Groups groups;
  std::vector<std::size_t> unassigned = subset;
  std::vector<std::size_t> assigned;
  while (!unassigned.empty()) {
    std::size_t seed_pos = 0;
    if (!assigned.empty()) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < unassigned.size(); ++p) {
        double sum = 0.0;
        for (auto a : assigned) sum += sim(unassigned[p], a);
        const double mean = sum / static_cast<double>(assigned.size());
        if (mean < best) {
          best = mean;
          seed_pos = p;
        }
      }
    }
    const std::size_t seed = unassigned[seed_pos];
    unassigned.erase(unassigned.begin() + static_cast<long>(seed_pos));

    std::vector<std::size_t> ranked(unassigned.size());
    std::iota(ranked.begin(), ranked.end(), 0);
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      return sim(seed, unassigned[a]) > sim(seed, unassigned[b]);
    });
    const std::size_t take = std::min(l - 1, ranked.size());
    ranked.resize(take);
    std::sort(ranked.begin(), ranked.end());

    std::vector<std::size_t> group{seed};
    for (auto pos : ranked) group.push_back(unassigned[pos]);
    for (auto it = ranked.rbegin(); it != ranked.rend(); ++it) {
      unassigned.erase(unassigned.begin() + static_cast<long>(*it));
    }
    assigned.insert(assigned.end(), group.begin(), group.end());
    groups.push_back(std::move(group));
  }
  return groups;
}

// Seeds each group with the unassigned prompt most similar to the rest of the
// unassigned pool (the hardest one to place), then repeatedly adds the
// unassigned prompt with the lowest cosine sum to the current members.
Groups difference_fill(const std::vector<std::size_t>& subset, std::size_t l, const SimilarityMatrix& sim) {
  Groups groups;
  std::vector<std::size_t> unassigned = subset;
  while (!unassigned.empty()) {
    std::size_t seed_pos = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < unassigned.size(); ++p) {
      double sum = 0.0;
      for (std::size_t q = 0; q < unassigned.size(); ++q) {
        if (q != p) sum += sim(unassigned[p], unassigned[q]);
      }
      if (sum > worst) {
        worst = sum;
        seed_pos = p;
      }
    }
    std::vector<std::size_t> group{unassigned[seed_pos]};
    unassigned.erase(unassigned.begin() + static_cast<long>(seed_pos));
    while (group.size() < l && !unassigned.empty()) {
      std::size_t pick = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < unassigned.size(); ++p) {
        double sum = 0.0;
        for (auto g : group) sum += sim(unassigned[p], g);
        if (sum < best) {
          best = sum;
          pick = p;
        }
      }
      group.push_back(unassigned[pick]);
      unassigned.erase(unassigned.begin() + static_cast<long>(pick));
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

// Longest-processing-time: visit prompts by length descending (stable over
// `order`), place each into the lightest group with spare capacity. Ties go
// to the smaller group, then the lower group index.
Groups length_balance(std::vector<std::size_t> order, std::size_t l, const std::vector<double>& lengths) {
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lengths[a] > lengths[b]; });
  const std::size_t c = ceil_div(order.size(), l);
  Groups groups(c);
  std::vector<double> totals(c, 0.0);
  for (auto idx : order) {
    std::size_t best = c;
    for (std::size_t g = 0; g < c; ++g) {
      if (groups[g].size() >= l) continue;
      if (best == c || totals[g] < totals[best] ||
          (totals[g] == totals[best] && groups[g].size() < groups[best].size())) {
        best = g;
      }
    }
    groups[best].push_back(idx);
    totals[best] += lengths[idx];
  }
  return groups;
}

const std::string& concept_of(const GroupingInputs& in, std::size_t i) {
  if (i >= in.concepts.size() || !in.concepts[i]) {
    throw Error(Errc::kMissingConcept, "prompt '" + in.ids[i] + "' has no concept label");
  }
  return *in.concepts[i];
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> concept_buckets(const GroupingInputs& in) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> buckets;
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto& c = concept_of(in, i);
    auto [it, inserted] = where.emplace(c, buckets.size());
    if (inserted) buckets.push_back({c, {}});
    buckets[it->second].second.push_back(i);
  }
  return buckets;
}

double length_variance(const Groups& groups, const std::vector<double>& lengths) {
  if (groups.empty()) return 0.0;
  std::vector<double> totals;
  double sum = 0.0;
  for (const auto& g : groups) {
    double t = 0.0;
    for (auto i : g) t += lengths[i];
    totals.push_back(t);
    sum += t;
  }
  const double mean = sum / static_cast<double>(groups.size());
  double acc = 0.0;
  for (double t : totals) acc += (t - mean) * (t - mean);
  return acc;
}

double pair_sum(const Groups& groups, const SimilarityMatrix& sim, bool dissimilarity) {
  double acc = 0.0;
  for (const auto& g : groups) {
    for (std::size_t a = 0; a < g.size(); ++a) {
      for (std::size_t b = 0; b < g.size(); ++b) {
        if (a == b) continue;
        const double s = sim(g[a], g[b]);
        acc += dissimilarity ? 1.0 - s : s;
      }
    }
  }
  return acc;
}

double concept_variance(const Groups& groups, const GroupingInputs& in) {
  double acc = 0.0;
  for (const auto& g : groups) {
    std::map<std::string, double> counts;
    for (auto i : g) counts[concept_of(in, i)] += 1.0;
    // sum_i ||e_i - mean||^2 = n - sum_c n_c^2 / n for one-hot vectors
    const double n = static_cast<double>(g.size());
    double sq = 0.0;
    for (const auto& [_, k] : counts) sq += k * k;
    acc += n - sq / n;
  }
  return acc;
}

double objective_on(CliqueMethod method, const Groups& groups, const GroupingInputs& in) {
  switch (method) {
    case CliqueMethod::kCC:
    case CliqueMethod::kCpSC:
      return concept_variance(groups, in);
    case CliqueMethod::kMDC:
      return pair_sum(groups, in.similarity, false);
    case CliqueMethod::kSSC:
      return pair_sum(groups, in.similarity, true);
    case CliqueMethod::kALC:
    case CliqueMethod::kRC:
    case CliqueMethod::kRpALC:
    case CliqueMethod::kSeparate:
      return length_variance(groups, in.lengths);
  }
  return 0.0;
}

Groups to_index_groups(const GroupingPlan& plan, const GroupingInputs& in) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < in.size(); ++i) index.emplace(in.ids[i], i);
  Groups groups;
  for (const auto& g : plan.groups) {
    std::vector<std::size_t> members;
    for (const auto& id : g.member_ids) {
      auto it = index.find(id);
      if (it == index.end()) throw Error(Errc::kSchemaError, "plan references unknown prompt '" + id + "'");
      members.push_back(it->second);
    }
    groups.push_back(std::move(members));
  }
  return groups;
}

GroupingPlan to_plan(CliqueMethod method, std::size_t l, std::uint64_t seed, const Groups& groups,
                     const GroupingInputs& in, const std::vector<std::optional<std::string>>& labels = {}) {
  GroupingPlan plan{method, l, seed, {}};
  for (std::size_t k = 0; k < groups.size(); ++k) {
    PromptGroup g;
    g.k = k + 1;
    for (auto i : groups[k]) g.member_ids.push_back(in.ids[i]);
    if (k < labels.size()) g.concept_label = labels[k];
    plan.groups.push_back(std::move(g));
  }
  return plan;
}

std::vector<std::vector<std::string>> canonical_layout(const Groups& groups, const GroupingInputs& in) {
  std::vector<std::vector<std::string>> layout;
  for (const auto& g : groups) {
    std::vector<std::string> ids;
    for (auto i : g) ids.push_back(in.ids[i]);
    std::sort(ids.begin(), ids.end());
    layout.push_back(std::move(ids));
  }
  std::sort(layout.begin(), layout.end());
  return layout;
}

class PartitionSearch {
 public:
  PartitionSearch(CliqueMethod method, const GroupingInputs& in, std::size_t l)
      : method_(method), in_(in), l_(l), c_(ceil_div(in.size(), l)) {}

  BruteForceResult run() {
    recurse(0);
    BruteForceResult r;
    r.candidates = candidates_;
    r.objective = best_objective_;
    r.plan = to_plan(method_, l_, 0, best_, in_);
    return r;
  }

 private:
  void recurse(std::size_t i) {
    const std::size_t m = in_.size();
    if (i == m) {
      if (current_.size() != c_) return;
      ++candidates_;
      consider();
      return;
    }
    // Not enough prompts left to open the remaining groups.
    if (current_.size() + (m - i) < c_) return;
    for (std::size_t g = 0; g < current_.size(); ++g) {
      if (current_[g].size() >= l_) continue;
      current_[g].push_back(i);
      recurse(i + 1);
      current_[g].pop_back();
    }
    if (current_.size() < c_) {
      current_.push_back({i});
      recurse(i + 1);
      current_.pop_back();
    }
  }

  void consider() {
    const double obj = objective_on(method_, current_, in_);
    const double tol = 1e-12 * std::max(1.0, std::abs(best_objective_));
    if (best_.empty() || obj < best_objective_ - tol) {
      best_ = current_;
      best_objective_ = obj;
      best_layout_ = canonical_layout(current_, in_);
    } else if (obj <= best_objective_ + tol) {
      auto layout = canonical_layout(current_, in_);
      if (layout < best_layout_) {
        best_ = current_;
        best_objective_ = std::min(best_objective_, obj);
        best_layout_ = std::move(layout);
      }
    }
  }

  CliqueMethod method_;
  const GroupingInputs& in_;
  std::size_t l_;
  std::size_t c_;
  Groups current_;
  Groups best_;
  double best_objective_ = std::numeric_limits<double>::infinity();
  std::vector<std::vector<std::string>> best_layout_;
  std::size_t candidates_ = 0;
};

std::uint64_t bounded(std::mt19937_64& eng, std::uint64_t range) {
  const std::uint64_t threshold = (0 - range) % range;
  for (;;) {
    const std::uint64_t r = eng();
    if (r >= threshold) return r % range;
  }
}

}  // namespace

std::string_view method_tag(CliqueMethod m) {
  switch (m) {
    case CliqueMethod::kSeparate: return "SEPARATE";
    case CliqueMethod::kCC: return "CC";
    case CliqueMethod::kRC: return "RC";
    case CliqueMethod::kSSC: return "SSC";
    case CliqueMethod::kCpSC: return "CpSC";
    case CliqueMethod::kALC: return "ALC";
    case CliqueMethod::kMDC: return "MDC";
    case CliqueMethod::kRpALC: return "RpALC";
  }
  return "?";
}

CliqueMethod parse_method(std::string_view tag) {
  auto lower = text::casefold(tag);
  for (auto m : kAllMethods) {
    if (text::casefold(method_tag(m)) == lower) return m;
  }
  throw Error(Errc::kInvalidConfig, "unknown clique method '" + std::string(tag) + "'");
}

bool is_concept_based(CliqueMethod m) { return m == CliqueMethod::kCC || m == CliqueMethod::kCpSC; }

bool is_randomized(CliqueMethod m) { return m == CliqueMethod::kRC || m == CliqueMethod::kRpALC; }

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 eng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[bounded(eng, i)]);
  }
  return perm;
}

GroupingInputs make_inputs(const data::Workload& workload, const GroupingOptions& options) {
  GroupingInputs in;
  const std::size_t m = workload.size();
  std::vector<text::EmbeddingVector> emb;
  emb.reserve(m);
  for (const auto& p : workload.prompts) {
    in.ids.push_back(p.id);
    in.lengths.push_back(static_cast<double>(text::tokenize_count(p.text)));
    if (p.concept_label) {
      in.concepts.push_back(p.concept_label);
    } else if (options.classify_missing_concepts) {
      in.concepts.push_back(data::classify_question(p.question.empty() ? p.text : p.question));
    } else {
      in.concepts.push_back(std::nullopt);
    }
    emb.push_back(text::embed_text(p.text, options.embedding_dim));
  }
  in.similarity = SimilarityMatrix(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) in.similarity.set(i, j, text::cosine_similarity(emb[i], emb[j]));
  }
  return in;
}

GroupingInputs make_inputs_for(CliqueMethod method, const data::Workload& workload, const GroupingOptions& options) {
  if (needs_similarity(method)) {
    auto in = make_inputs(workload, options);
    if (is_concept_based(method)) {
      for (std::size_t i = 0; i < in.size(); ++i) concept_of(in, i);
    }
    return in;
  }
  GroupingInputs in;
  for (const auto& p : workload.prompts) {
    in.ids.push_back(p.id);
    in.lengths.push_back(static_cast<double>(text::tokenize_count(p.text)));
    if (p.concept_label) {
      in.concepts.push_back(p.concept_label);
    } else if (options.classify_missing_concepts) {
      in.concepts.push_back(data::classify_question(p.question.empty() ? p.text : p.question));
    } else if (is_concept_based(method)) {
      throw Error(Errc::kMissingConcept, "prompt '" + p.id + "' has no concept label");
    } else {
      in.concepts.push_back(std::nullopt);
    }
  }
  return in;
}

GroupingPlan make_grouping(CliqueMethod method, const GroupingInputs& in, std::size_t l, std::uint64_t seed) {
  if (l < 1) throw Error(Errc::kInvalidBatchSize, "batch size must be >= 1");
  if (in.size() == 0) throw Error(Errc::kEmptyWorkload, "cannot group an empty workload");
  if (needs_similarity(method) && in.similarity.size() != in.size()) {
    throw Error(Errc::kInvalidConfig, "similarity matrix does not match the workload");
  }
  std::vector<std::size_t> identity(in.size());
  std::iota(identity.begin(), identity.end(), 0);

  switch (method) {
    case CliqueMethod::kSeparate:
      return to_plan(method, 1, seed, chunk(identity, 1), in);
    case CliqueMethod::kRC:
      return to_plan(method, l, seed, chunk(seeded_permutation(in.size(), seed), l), in);
    case CliqueMethod::kSSC:
      return to_plan(method, l, seed, similarity_fill(identity, l, in.similarity), in);
    case CliqueMethod::kMDC:
      return to_plan(method, l, seed, difference_fill(identity, l, in.similarity), in);
    case CliqueMethod::kALC:
      return to_plan(method, l, seed, length_balance(identity, l, in.lengths), in);
    case CliqueMethod::kRpALC:
      return to_plan(method, l, seed, length_balance(seeded_permutation(in.size(), seed), l, in.lengths), in);
    case CliqueMethod::kCC:
    case CliqueMethod::kCpSC: {
      Groups groups;
      std::vector<std::optional<std::string>> labels;
      for (const auto& [label, members] : concept_buckets(in)) {
        auto part = method == CliqueMethod::kCC ? chunk(members, l) : similarity_fill(members, l, in.similarity);
        for (auto& g : part) {
          groups.push_back(std::move(g));
          labels.emplace_back(label);
        }
      }
      return to_plan(method, l, seed, groups, in, labels);
    }
  }
  throw Error(Errc::kInvalidConfig, "unhandled clique method");
}

GroupingPlan make_grouping(CliqueMethod method, const data::Workload& workload, std::size_t l, std::uint64_t seed,
                           const GroupingOptions& options) {
  if (l < 1) throw Error(Errc::kInvalidBatchSize, "batch size must be >= 1");
  if (workload.size() == 0) throw Error(Errc::kEmptyWorkload, "cannot group an empty workload");
  return make_grouping(method, make_inputs_for(method, workload, options), l, seed);
}

double grouping_objective(CliqueMethod method, const GroupingPlan& plan, const GroupingInputs& inputs) {
  return objective_on(method, to_index_groups(plan, inputs), inputs);
}

double grouping_objective(CliqueMethod method, const GroupingPlan& plan, const data::Workload& workload,
                          const GroupingOptions& options) {
  return grouping_objective(method, plan, make_inputs_for(method, workload, options));
}

BruteForceResult brute_force_grouping(CliqueMethod method, const GroupingInputs& inputs, std::size_t l) {
  if (method != CliqueMethod::kALC && method != CliqueMethod::kMDC && method != CliqueMethod::kSSC) {
    throw Error(Errc::kUnsupportedMethod, "brute force supports ALC, MDC and SSC only");
  }
  if (l < 1) throw Error(Errc::kInvalidBatchSize, "batch size must be >= 1");
  if (inputs.size() == 0) throw Error(Errc::kEmptyWorkload, "cannot group an empty workload");
  if (inputs.size() > kBruteForceMaxPrompts) {
    throw Error(Errc::kInstanceTooLarge, std::to_string(inputs.size()) + " prompts exceeds the brute-force limit of 10",
                static_cast<long>(inputs.size()));
  }
  return PartitionSearch(method, inputs, l).run();
}

BruteForceResult brute_force_grouping(CliqueMethod method, const data::Workload& workload, std::size_t l,
                                      const GroupingOptions& options) {
  if (workload.size() > kBruteForceMaxPrompts) {
    throw Error(Errc::kInstanceTooLarge,
                std::to_string(workload.size()) + " prompts exceeds the brute-force limit of 10",
                static_cast<long>(workload.size()));
  }
  return brute_force_grouping(method, make_inputs_for(method, workload, options), l);
}

void validate_plan(const GroupingPlan& plan, const std::vector<std::string>& workload_ids) {
  if (plan.batch_size < 1) throw Error(Errc::kInvalidBatchSize, "plan batch size must be >= 1");
  std::unordered_map<std::string, int> seen;
  for (const auto& id : workload_ids) seen.emplace(id, 0);
  for (std::size_t k = 0; k < plan.groups.size(); ++k) {
    const auto& g = plan.groups[k];
    if (g.k != k + 1) throw Error(Errc::kSchemaError, "group ids must run 1..c");
    if (g.member_ids.empty() || g.member_ids.size() > plan.batch_size) {
      throw Error(Errc::kSchemaError, "group " + std::to_string(g.k) + " has size " +
                                          std::to_string(g.member_ids.size()) + " outside [1, l]");
    }
    for (const auto& id : g.member_ids) {
      auto it = seen.find(id);
      if (it == seen.end()) throw Error(Errc::kSchemaError, "unknown prompt '" + id + "'");
      if (++it->second > 1) throw Error(Errc::kSchemaError, "prompt '" + id + "' appears twice");
    }
  }
  for (const auto& id : workload_ids) {
    if (seen[id] != 1) throw Error(Errc::kSchemaError, "prompt '" + id + "' is not assigned");
  }
  if (plan.groups.size() < ceil_div(workload_ids.size(), plan.batch_size)) {
    throw Error(Errc::kSchemaError, "fewer than ceil(m/l) groups");
  }
}

std::string plan_to_json(const GroupingPlan& plan) {
  nlohmann::json j;
  j["method"] = std::string(method_tag(plan.method));
  j["l"] = plan.batch_size;
  j["seed"] = plan.seed;
  j["groups"] = nlohmann::json::array();
  for (const auto& g : plan.groups) {
    nlohmann::json gj = {{"k", g.k}, {"members", g.member_ids}};
    if (g.concept_label) gj["concept"] = *g.concept_label;
    j["groups"].push_back(std::move(gj));
  }
  return j.dump();
}

GroupingPlan plan_from_json(std::string_view json_text) {
  auto j = nlohmann::json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::kParseError, "malformed plan JSON");
  try {
    GroupingPlan plan;
    plan.method = parse_method(j.at("method").get<std::string>());
    plan.batch_size = j.at("l").get<std::size_t>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& gj : j.at("groups")) {
      PromptGroup g;
      g.k = gj.at("k").get<std::size_t>();
      g.member_ids = gj.at("members").get<std::vector<std::string>>();
      if (gj.contains("concept")) g.concept_label = gj["concept"].get<std::string>();
      plan.groups.push_back(std::move(g));
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kSchemaError, std::string("plan JSON: ") + e.what());
  }
}

}  // namespace cliqueparcel::clique
