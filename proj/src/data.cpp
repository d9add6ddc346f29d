// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include "cliqueparcel/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_set>

#include "cliqueparcel/error.hpp"
#include "cliqueparcel/text.hpp"

namespace cliqueparcel::data {
namespace {

using nlohmann::json;

std::optional<std::string> optional_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(Errc::kSchemaError, "line " + std::to_string(line) + ": field '" + key + "' must be a string",
                static_cast<long>(line));
  }
  return it->get<std::string>();
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

Prompt prompt_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) {
    throw Error(Errc::kSchemaError, "line " + std::to_string(line) + ": expected a JSON object",
                static_cast<long>(line));
  }
  Prompt p;
  auto question = optional_string(obj, "question", line);
  if (!question || is_blank(*question)) {
    throw Error(Errc::kSchemaError, "line " + std::to_string(line) + ": missing 'question'",
                static_cast<long>(line));
  }
  p.question = *question;
  auto context = optional_string(obj, "context", line);
  p.text = context && !context->empty() ? *context + "\n" + p.question : p.question;
  p.id = optional_string(obj, "id", line).value_or(std::to_string(line));
  p.user_id = optional_string(obj, "user", line).value_or(std::string(kDefaultUser));
  p.ground_truth = optional_string(obj, "answer", line);
  p.concept_label = optional_string(obj, "concept", line);
  if (!p.concept_label) p.concept_label = optional_string(obj, "type", line);

  if (auto it = obj.find("choices"); it != obj.end() && !it->is_null()) {
    if (!it->is_array() || !std::all_of(it->begin(), it->end(), [](const json& c) { return c.is_string(); })) {
      throw Error(Errc::kSchemaError, "line " + std::to_string(line) + ": 'choices' must be an array of strings",
                  static_cast<long>(line));
    }
    p.choices = it->get<std::vector<std::string>>();
    if (p.ground_truth && !p.ground_truth_choice()) {
      throw Error(Errc::kSchemaError,
                  "line " + std::to_string(line) + ": answer does not identify one of the choices",
                  static_cast<long>(line));
    }
  }
  return p;
}

}  // namespace

std::optional<std::size_t> Prompt::ground_truth_choice() const {
  if (!choices || !ground_truth) return std::nullopt;
  const std::string& gt = *ground_truth;
  if (gt.size() == 1 && gt[0] >= 'A' && gt[0] <= 'Z') {
    std::size_t idx = static_cast<std::size_t>(gt[0] - 'A');
    if (idx < choices->size()) return idx;
  }
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < choices->size(); ++i) {
    if ((*choices)[i] == gt) {
      if (found) return std::nullopt;  // ambiguous
      found = i;
    }
  }
  return found;
}

const Prompt* Workload::find(std::string_view id) const {
  for (const auto& p : prompts) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

Workload parse_dataset(std::string_view jsonl, std::string name) {
  Workload w;
  w.name = std::move(name);
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    std::size_t nl = jsonl.find('\n', pos);
    if (nl == std::string_view::npos) nl = jsonl.size();
    std::string_view line = jsonl.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (is_blank(line)) continue;
    json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded()) {
      throw Error(Errc::kParseError, "line " + std::to_string(line_no) + ": malformed JSON",
                  static_cast<long>(line_no));
    }
    Prompt p = prompt_from_json(obj, line_no);
    if (!seen.insert(p.id).second) {
      throw Error(Errc::kSchemaError, "line " + std::to_string(line_no) + ": duplicate id '" + p.id + "'",
                  static_cast<long>(line_no));
    }
    w.prompts.push_back(std::move(p));
  }
  if (w.prompts.empty()) throw Error(Errc::kEmptyWorkload, "no prompts in '" + w.name + "'");
  return w;
}

Workload load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot open dataset '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), path.stem().string());
}

std::string serialize_dataset(const Workload& workload) {
  std::string out;
  for (const auto& p : workload.prompts) {
    json obj = {{"id", p.id}, {"user", p.user_id}, {"question", p.question}};
    if (p.text != p.question) {
      // text was built as context + "\n" + question
      obj["context"] = p.text.substr(0, p.text.size() - p.question.size() - 1);
    }
    if (p.ground_truth) obj["answer"] = *p.ground_truth;
    if (p.concept_label) obj["concept"] = *p.concept_label;
    if (p.choices) obj["choices"] = *p.choices;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void assign_users_round_robin(Workload& workload, std::size_t user_count) {
  if (user_count == 0) throw Error(Errc::kInvalidConfig, "user count must be >= 1");
  for (std::size_t i = 0; i < workload.prompts.size(); ++i) {
    workload.prompts[i].user_id = "u" + std::to_string(i % user_count);
  }
}

std::string classify_question(std::string_view question) {
  static constexpr std::array<std::string_view, 6> kTypes = {"what", "when", "where", "who", "why", "how"};
  for (const auto& tok : text::tokenize(question)) {
    for (auto t : kTypes) {
      if (tok == t) return std::string(t);
    }
    // "whom"/"whose" read as who, "which" as what.
    if (tok == "whom" || tok == "whose") return "who";
    if (tok == "which") return "what";
  }
  return "other";
}

LengthStats length_dispersion_stats(const Workload& workload) {
  LengthStats s;
  const std::size_t m = workload.prompts.size();
  if (m == 0) return s;
  s.lengths.reserve(m);
  double sum = 0.0;
  for (const auto& p : workload.prompts) {
    s.lengths.push_back(text::tokenize_count(p.text));
    sum += static_cast<double>(s.lengths.back());
  }
  s.mean_tokens = sum / static_cast<double>(m);
  double ss = 0.0;
  for (auto len : s.lengths) {
    const double d = static_cast<double>(len) - s.mean_tokens;
    ss += d * d;
  }
  s.stdev_tokens = std::sqrt(ss / static_cast<double>(m));
  s.z_scores.assign(m, 0.0);
  if (s.stdev_tokens > 0.0) {
    for (std::size_t i = 0; i < m; ++i) {
      s.z_scores[i] = (static_cast<double>(s.lengths[i]) - s.mean_tokens) / s.stdev_tokens;
    }
    s.rsd_percent = s.mean_tokens > 0.0 ? 100.0 * s.stdev_tokens / s.mean_tokens : 0.0;
  }
  return s;
}

std::vector<HistogramBin> histogram(const std::vector<double>& values, double lo, double hi, double width) {
  if (!(width > 0.0) || !(hi > lo)) throw Error(Errc::kInvalidConfig, "bad histogram range");
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / width - 1e-12));
  std::vector<HistogramBin> bins;
  for (std::size_t i = 0; i < n; ++i) {
    bins.push_back({lo + width * static_cast<double>(i), std::min(hi, lo + width * static_cast<double>(i + 1)), 0});
  }
  for (double v : values) {
    auto idx = static_cast<long>(std::floor((v - lo) / width));
    idx = std::clamp<long>(idx, 0, static_cast<long>(n) - 1);
    ++bins[static_cast<std::size_t>(idx)].count;
  }
  return bins;
}

}  // namespace cliqueparcel::data
