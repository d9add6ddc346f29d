// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cliqueparcel::text {

inline constexpr std::size_t kDefaultEmbeddingDim = 256;
inline constexpr std::size_t kMinEmbeddingDim = 8;
inline constexpr double kBleuSmoothing = 1e-9;

// Tokens are maximal runs of word characters (ASCII alphanumerics, '_', and
// any non-ASCII byte) plus every non-space ASCII punctuation mark on its own.
// This is an approximation of a sub-word tokenizer; only ratios of counts
// produced by the same tokenizer are ever compared.
std::size_t tokenize_count(std::string_view text);

// Casefolded token sequence under the same segmentation rule.
std::vector<std::string> tokenize(std::string_view text);

// Prefix of `text` holding the first `keep` tokens (trailing space dropped).
std::string truncate_tokens(std::string_view text, std::size_t keep);

// ASCII casefold; non-ASCII bytes pass through unchanged.
std::string casefold(std::string_view text);

// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

struct EmbeddingVector {
  std::vector<double> values;
  std::size_t source_len = 0;  // number of 3-gram features

  std::size_t dim() const noexcept { return values.size(); }
  bool is_zero() const noexcept { return source_len == 0; }
};

// Character 3-gram feature hashing over the casefolded text (code points,
// hashed as their UTF-8 bytes), L2-normalized. Throws kInvalidConfig when
// dim < kMinEmbeddingDim.
EmbeddingVector embed_text(std::string_view text, std::size_t dim = kDefaultEmbeddingDim);

// The character 3-grams embed_text hashes, in order of occurrence. A
// non-empty text under three code points yields itself as the only gram.
std::vector<std::string> char_trigrams(std::string_view text);

// Dot product, clamped to [-1, 1]. Throws kDimensionMismatch.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Sentence BLEU with N = min(4, |candidate|), epsilon-smoothed precisions and
// brevity penalty min(1, exp(1 - r/c)). Empty candidate scores 0.
double bleu_score(std::string_view candidate, std::string_view reference);
double bleu_score(std::span<const std::string> candidate, std::span<const std::string> reference);

// ROUGE-L F1 over casefolded tokens.
double rouge_l_score(std::string_view candidate, std::string_view reference);
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

}  // namespace cliqueparcel::text
