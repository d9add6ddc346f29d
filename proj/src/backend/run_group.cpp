// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include <numeric>

#include "cliqueparcel/backend.hpp"

namespace cliqueparcel::backend {
namespace {

std::string describe_missing(const std::vector<std::size_t>& missing) {
  std::string s;
  for (auto k : missing) {
    if (!s.empty()) s += ", ";
    s += std::to_string(k);
  }
  return s;
}

}  // namespace

std::size_t GroupOutcome::input_tokens() const {
  return std::accumulate(calls.begin(), calls.end(), std::size_t{0},
                         [](std::size_t acc, const CompletionResult& r) { return acc + r.input_tokens; });
}

std::size_t GroupOutcome::output_tokens() const {
  return std::accumulate(calls.begin(), calls.end(), std::size_t{0},
                         [](std::size_t acc, const CompletionResult& r) { return acc + r.output_tokens; });
}

std::vector<double> GroupOutcome::latencies() const {
  std::vector<double> out;
  for (const auto& c : calls) out.push_back(c.latency_seconds);
  return out;
}

DispatchIncomplete::DispatchIncomplete(GroupOutcome outcome)
    : Error(Errc::kDispatchIncomplete, "missing items: " + describe_missing(outcome.missing),
            static_cast<long>(outcome.missing.size())),
      outcome_(std::move(outcome)) {}

GroupOutcome run_group(CompletionBackend& backend, std::span<const data::Prompt> group,
                       const RunGroupOptions& options) {
  if (group.empty()) throw Error(Errc::kEmptyGroup, "cannot run an empty group");
  GroupOutcome out;
  const std::size_t n = group.size();
  for (const auto& p : group) {
    out.member_ids.push_back(p.id);
    out.anchor_like_prompt = out.anchor_like_prompt || batch::has_anchor_like_line(p.text);
  }
  out.answers.assign(n, std::string());
  out.answered.assign(n, false);
  out.from_fallback.assign(n, false);

  if (n == 1) {
    out.calls.push_back(backend.complete(group[0].text));
    out.answers[0] = out.calls[0].text;
    out.answered[0] = true;
    return out;
  }

  out.batched = true;
  const auto batched = batch::build_batch(group);
  out.calls.push_back(backend.complete(batched.text));
  try {
    out.parse = batch::parse_itemized(out.calls[0].text, n);
  } catch (const Error& e) {
    if (e.code() != Errc::kNoAnchorsFound) throw;
    batch::ParsedAnswers none;
    for (std::size_t k = 1; k <= n; ++k) none.diagnostics.push_back({batch::ItemIssue::kMissing, k});
    out.parse = std::move(none);
  }
  out.parse_failed = !out.parse->complete;

  for (std::size_t k = 1; k <= n; ++k) {
    if (const auto* item = out.parse->find(k)) {
      out.answers[k - 1] = item->text;
      out.answered[k - 1] = true;
    }
  }

  for (std::size_t k = 1; k <= n; ++k) {
    if (out.answered[k - 1]) continue;
    if (options.fallback_separate) {
      out.calls.push_back(backend.complete(group[k - 1].text));
      out.answers[k - 1] = out.calls.back().text;
      out.answered[k - 1] = true;
      out.from_fallback[k - 1] = true;
    } else {
      out.missing.push_back(k);
    }
  }
  if (!out.missing.empty()) throw DispatchIncomplete(std::move(out));
  return out;
}

}  // namespace cliqueparcel::backend
