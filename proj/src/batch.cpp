// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include "cliqueparcel/batch.hpp"

#include <algorithm>
#include <optional>
#include <set>

#include "cliqueparcel/error.hpp"

namespace cliqueparcel::batch {
namespace {

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  auto ws = [](char c) { return is_blank(c) || c == '\n'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

struct Anchor {
  std::size_t index;
  std::size_t line_begin;  // offset of the line holding the anchor
  std::size_t body_begin;  // offset just past "k." / "k)"
};

std::optional<Anchor> anchor_at(std::string_view text, std::size_t line_begin, std::size_t line_end) {
  std::size_t i = line_begin;
  while (i < line_end && is_blank(text[i])) ++i;
  const std::size_t digits_begin = i;
  while (i < line_end && text[i] >= '0' && text[i] <= '9') ++i;
  const std::size_t digits = i - digits_begin;
  if (digits == 0 || digits > 9) return std::nullopt;
  if (i >= line_end || (text[i] != '.' && text[i] != ')')) return std::nullopt;
  ++i;
  if (i < line_end && text[i] != ' ' && text[i] != '\t' && text[i] != '\r') return std::nullopt;
  std::size_t index = 0;
  for (std::size_t d = digits_begin; d < digits_begin + digits; ++d) {
    index = index * 10 + static_cast<std::size_t>(text[d] - '0');
  }
  return Anchor{index, line_begin, i};
}

std::vector<Anchor> find_anchors(std::string_view text) {
  std::vector<Anchor> anchors;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    if (auto a = anchor_at(text, pos, nl)) anchors.push_back(*a);
    pos = nl + 1;
  }
  return anchors;
}

}  // namespace

std::string_view issue_name(ItemIssue issue) {
  switch (issue) {
    case ItemIssue::kMissing: return "MissingItem";
    case ItemIssue::kDuplicate: return "DuplicateItem";
    case ItemIssue::kOutOfOrder: return "OutOfOrder";
    case ItemIssue::kUnexpected: return "UnexpectedItem";
  }
  return "?";
}

BatchedPrompt build_batch(std::span<const std::string> prompt_texts) {
  if (prompt_texts.empty()) throw Error(Errc::kEmptyGroup, "cannot batch an empty group");
  BatchedPrompt b;
  b.text = std::string(kInstruction);
  for (std::size_t i = 0; i < prompt_texts.size(); ++i) {
    b.text += ' ';
    b.text += std::to_string(i + 1);
    b.text += ". ";
    b.text += prompt_texts[i];
  }
  return b;
}

BatchedPrompt build_batch(std::span<const data::Prompt> group) {
  if (group.empty()) throw Error(Errc::kEmptyGroup, "cannot batch an empty group");
  std::vector<std::string> texts;
  for (const auto& p : group) {
    if (p.text.empty()) throw Error(Errc::kSchemaError, "prompt '" + p.id + "' has empty text");
    texts.push_back(p.text);
  }
  auto b = build_batch(std::span<const std::string>(texts));
  for (const auto& p : group) b.member_ids.push_back(p.id);
  return b;
}

const ParsedAnswers::Item* ParsedAnswers::find(std::size_t index) const {
  auto it = std::lower_bound(items.begin(), items.end(), index,
                             [](const Item& item, std::size_t k) { return item.index < k; });
  return it != items.end() && it->index == index ? &*it : nullptr;
}

std::vector<std::size_t> ParsedAnswers::missing() const {
  std::vector<std::size_t> out;
  for (const auto& d : diagnostics) {
    if (d.issue == ItemIssue::kMissing) out.push_back(d.index);
  }
  return out;
}

ParsedAnswers parse_itemized(std::string_view completion, std::size_t expected_count) {
  if (expected_count < 1) throw Error(Errc::kInvalidConfig, "expected_count must be >= 1");
  const auto anchors = find_anchors(completion);
  if (anchors.empty()) throw Error(Errc::kNoAnchorsFound, "completion has no itemization anchors");

  ParsedAnswers out;
  std::set<std::size_t> seen;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const auto& anchor = anchors[a];
    const std::size_t end = a + 1 < anchors.size() ? anchors[a + 1].line_begin : completion.size();
    const std::size_t last = out.items.empty() ? 0 : out.items.back().index;
    if (seen.count(anchor.index) != 0) {
      out.diagnostics.push_back({ItemIssue::kDuplicate, anchor.index});
      continue;
    }
    seen.insert(anchor.index);
    if (anchor.index < last) {
      out.diagnostics.push_back({ItemIssue::kOutOfOrder, anchor.index});
      continue;
    }
    if (anchor.index == 0 || anchor.index > expected_count) {
      out.diagnostics.push_back({ItemIssue::kUnexpected, anchor.index});
    }
    out.items.push_back({anchor.index, std::string(trim(completion.substr(anchor.body_begin, end - anchor.body_begin)))});
  }
  for (std::size_t k = 1; k <= expected_count; ++k) {
    if (out.find(k) == nullptr) out.diagnostics.push_back({ItemIssue::kMissing, k});
  }
  out.complete = out.items.size() == expected_count &&
                 std::all_of(out.items.begin(), out.items.end(),
                             [&, k = std::size_t{0}](const ParsedAnswers::Item& item) mutable {
                               return item.index == ++k;
                             });
  return out;
}

bool has_anchor_like_line(std::string_view text) { return !find_anchors(text).empty(); }

std::string itemize(std::span<const std::string> answers) {
  std::string out;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (i > 0) out += '\n';
    out += std::to_string(i + 1);
    out += ". ";
    out += answers[i];
  }
  return out;
}

}  // namespace cliqueparcel::batch
