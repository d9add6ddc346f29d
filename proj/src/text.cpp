// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include "cliqueparcel/text.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cliqueparcel/error.hpp"

namespace cliqueparcel::text {
namespace {

enum class CharClass { kSpace, kWord, kPunct };

CharClass classify(unsigned char c) {
  if (c >= 0x80) return CharClass::kWord;
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
    return CharClass::kSpace;
  }
  if ((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') {
    return CharClass::kWord;
  }
  // Remaining ASCII control characters are treated as whitespace.
  if (c < 0x20 || c == 0x7f) return CharClass::kSpace;
  return CharClass::kPunct;
}

struct Span {
  std::size_t begin;
  std::size_t end;
};

std::vector<Span> token_spans(std::string_view text) {
  std::vector<Span> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    switch (classify(static_cast<unsigned char>(text[i]))) {
      case CharClass::kSpace:
        ++i;
        break;
      case CharClass::kPunct:
        spans.push_back({i, i + 1});
        ++i;
        break;
      case CharClass::kWord: {
        std::size_t j = i + 1;
        while (j < text.size() && classify(static_cast<unsigned char>(text[j])) == CharClass::kWord) {
          ++j;
        }
        spans.push_back({i, j});
        i = j;
        break;
      }
    }
  }
  return spans;
}

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

std::vector<std::string_view> code_points(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t n = std::min(utf8_length(static_cast<unsigned char>(s[i])), s.size() - i);
    out.push_back(s.substr(i, n));
    i += n;
  }
  return out;
}

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(std::span<const std::string> tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  }
  return counts;
}

}  // namespace

std::size_t tokenize_count(std::string_view text) { return token_spans(text).size(); }

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  for (const auto& s : token_spans(text)) {
    tokens.push_back(casefold(text.substr(s.begin, s.end - s.begin)));
  }
  return tokens;
}

std::string truncate_tokens(std::string_view text, std::size_t keep) {
  if (keep == 0) return {};
  auto spans = token_spans(text);
  if (keep >= spans.size()) return std::string(text);
  return std::string(text.substr(0, spans[keep - 1].end));
}

std::string casefold(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> char_trigrams(std::string_view text) {
  const std::string folded = casefold(text);
  const auto cps = code_points(folded);
  std::vector<std::string> grams;
  // Texts shorter than one 3-gram become a single gram of their own.
  if (!cps.empty() && cps.size() < 3) grams.push_back(folded);
  for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
    std::string g;
    for (std::size_t k = 0; k < 3; ++k) g.append(cps[i + k]);
    grams.push_back(std::move(g));
  }
  return grams;
}

EmbeddingVector embed_text(std::string_view text, std::size_t dim) {
  if (dim < kMinEmbeddingDim) {
    throw Error(Errc::kInvalidConfig, "embedding dim must be >= 8, got " + std::to_string(dim));
  }
  EmbeddingVector v;
  v.values.assign(dim, 0.0);
  const auto grams = char_trigrams(text);
  v.source_len = grams.size();
  for (const auto& g : grams) {
    v.values[fnv1a64(g) % dim] += 1.0;
  }
  double norm2 = 0.0;
  for (double x : v.values) norm2 += x * x;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v.values) x *= inv;
  }
  return v;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) {
    throw Error(Errc::kDimensionMismatch,
                std::to_string(a.values.size()) + " vs " + std::to_string(b.values.size()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return std::clamp(dot, -1.0, 1.0);
}

double bleu_score(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (candidate.empty()) return 0.0;
  const std::size_t max_n = std::min<std::size_t>(4, candidate.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto cand = count_ngrams(candidate, n);
    const auto ref = count_ngrams(reference, n);
    std::size_t matched = 0;
    std::size_t total = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      if (auto it = ref.find(gram); it != ref.end()) matched += std::min(count, it->second);
    }
    double p = total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total);
    if (p == 0.0) p = kBleuSmoothing;
    log_sum += std::log(p);
  }
  const double geo_mean = std::exp(log_sum / static_cast<double>(max_n));
  const double ratio = static_cast<double>(reference.size()) / static_cast<double>(candidate.size());
  const double bp = std::min(1.0, std::exp(1.0 - ratio));
  return std::clamp(geo_mean * bp, 0.0, 1.0);
}

double bleu_score(std::string_view candidate, std::string_view reference) {
  const auto c = tokenize(candidate);
  const auto r = tokenize(reference);
  return bleu_score(std::span<const std::string>(c), std::span<const std::string>(r));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_score(std::string_view candidate, std::string_view reference) {
  const auto c = tokenize(candidate);
  const auto r = tokenize(reference);
  if (c.empty() || r.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(c, r));
  const double p = lcs / static_cast<double>(c.size());
  const double rec = lcs / static_cast<double>(r.size());
  if (p + rec == 0.0) return 0.0;
  return 2.0 * p * rec / (p + rec);
}

}  // namespace cliqueparcel::text
