// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cliqueparcel/data.hpp"

namespace cliqueparcel::batch {

inline constexpr std::string_view kTemplateVersion = "cliqueparcel-v1";
inline constexpr std::string_view kInstruction =
    "Return the answer for each question with their corresponding numerical itemization.";

struct BatchedPrompt {
  std::string text;
  std::vector<std::string> member_ids;
  std::string template_version{kTemplateVersion};
};

// "<instruction> 1. <p1> 2. <p2> ..." with single spaces between items.
// Throws kEmptyGroup.
BatchedPrompt build_batch(std::span<const data::Prompt> group);
BatchedPrompt build_batch(std::span<const std::string> prompt_texts);

enum class ItemIssue { kMissing, kDuplicate, kOutOfOrder, kUnexpected };

struct ItemDiagnostic {
  ItemIssue issue;
  std::size_t index;
};

struct ParsedAnswers {
  struct Item {
    std::size_t index;  // 1-based
    std::string text;
  };
  std::vector<Item> items;  // strictly increasing indices
  std::vector<ItemDiagnostic> diagnostics;
  bool complete = false;

  const Item* find(std::size_t index) const;
  std::vector<std::size_t> missing() const;
};

// Line-anchored dispatch: an anchor is a line whose first non-blank characters
// are an integer, then '.' or ')', then a space or end of line. Each item runs
// to the next anchor and is trimmed; text before the first anchor is dropped.
// Throws kNoAnchorsFound.
ParsedAnswers parse_itemized(std::string_view completion, std::size_t expected_count);

// True when some line of `text` would be read as an item anchor.
bool has_anchor_like_line(std::string_view text);

// "1. a1\n2. a2\n..." -- the itemized shape parse_itemized reads back.
std::string itemize(std::span<const std::string> answers);

std::string_view issue_name(ItemIssue issue);

}  // namespace cliqueparcel::batch
