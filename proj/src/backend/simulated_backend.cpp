// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cliqueparcel/backend.hpp"
#include "cliqueparcel/text.hpp"

namespace cliqueparcel::backend {

void ScriptedAnswers::add(std::string prompt_text, std::string answer) {
  answers_.insert_or_assign(std::move(prompt_text), std::move(answer));
}

std::optional<std::string> ScriptedAnswers::lookup(std::string_view prompt_text) const {
  auto it = answers_.find(std::string(prompt_text));
  if (it == answers_.end()) return std::nullopt;
  return it->second;
}

bool ScriptedAnswers::split_from(std::string_view text, std::size_t pos, std::size_t k,
                                 std::vector<std::string>& out) const {
  const std::string anchor = " " + std::to_string(k) + ". ";
  if (text.compare(pos, anchor.size(), anchor) != 0) return false;
  pos += anchor.size();
  const std::string next_anchor = " " + std::to_string(k + 1) + ". ";
  for (const auto& [prompt, _] : answers_) {
    if (text.compare(pos, prompt.size(), prompt) != 0) continue;
    const std::size_t end = pos + prompt.size();
    out.push_back(prompt);
    if (end == text.size()) return true;
    if (text.compare(end, next_anchor.size(), next_anchor) == 0 && split_from(text, end, k + 1, out)) return true;
    out.pop_back();
  }
  return false;
}

std::optional<std::vector<std::string>> ScriptedAnswers::split_batch(std::string_view text) const {
  if (!text.starts_with(batch::kInstruction)) return std::nullopt;
  std::vector<std::string> members;
  if (!split_from(text, batch::kInstruction.size(), 1, members)) return std::nullopt;
  return members;
}

ScriptedAnswers ScriptedAnswers::from_workload(const data::Workload& workload) {
  ScriptedAnswers answers;
  for (const auto& p : workload.prompts) {
    std::string answer;
    if (auto choice = p.ground_truth_choice()) {
      answer = "The answer to \"" + p.question + "\" is " + std::string(1, static_cast<char>('A' + *choice)) + ") " +
               (*p.choices)[*choice] + ".";
    } else if (p.ground_truth) {
      answer = "The answer to \"" + p.question + "\" is " + *p.ground_truth + ".";
    } else {
      answer = "Regarding \"" + p.question + "\": no reference answer is available.";
    }
    answers.add(p, std::move(answer));
  }
  return answers;
}

ScriptedAnswers ScriptedAnswers::from_file(const data::Workload& workload, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open answer file '" + path.string() + "'");
  ScriptedAnswers answers;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("answer") || !j["id"].is_string() ||
        !j["answer"].is_string()) {
      throw Error(Errc::kSchemaError, "answer file line " + std::to_string(line_no) + ": expected {id, answer}",
                  line_no);
    }
    const auto* prompt = workload.find(j["id"].get<std::string>());
    if (prompt == nullptr) {
      throw Error(Errc::kSchemaError, "answer file line " + std::to_string(line_no) + ": unknown id", line_no);
    }
    answers.add(*prompt, j["answer"].get<std::string>());
  }
  return answers;
}

CompletionResult simulate_complete(const CostModelParams& params, std::string_view prompt_text,
                                   const ScriptedAnswers& answers, SimClock& clock, const SimulationOptions& options) {
  CompletionResult r;
  r.backend_id = "simulated";
  if (auto direct = answers.lookup(prompt_text)) {
    r.text = *direct;
    r.input_tokens = text::tokenize_count(prompt_text);
    r.output_tokens = text::tokenize_count(r.text);
  } else if (auto members = answers.split_batch(prompt_text)) {
    std::vector<std::string> items;
    std::size_t member_in = 0;
    std::size_t member_out = 0;
    for (const auto& member : *members) {
      std::string a = *answers.lookup(member);
      if (options.discount < 1.0) {
        const auto n = static_cast<double>(text::tokenize_count(a));
        a = text::truncate_tokens(a, static_cast<std::size_t>(std::floor(options.discount * n + 0.5)));
      }
      member_in += text::tokenize_count(member);
      member_out += text::tokenize_count(a);
      items.push_back(std::move(a));
    }
    r.text = batch::itemize(items);
    if (options.overhead == OverheadMode::kCounted) {
      r.input_tokens = text::tokenize_count(prompt_text);
      r.output_tokens = text::tokenize_count(r.text);
    } else {
      r.input_tokens = member_in;
      r.output_tokens = member_out;
    }
  } else {
    throw Error(Errc::kUnknownPrompt, "no scripted answer for prompt: " + std::string(prompt_text.substr(0, 80)));
  }
  r.latency_seconds = params.latency(r.input_tokens, r.output_tokens);
  clock.advance(r.latency_seconds);
  return r;
}

SimulatedBackend::SimulatedBackend(CostModelParams params, std::shared_ptr<const ScriptedAnswers> answers,
                                   SimulationOptions options, std::shared_ptr<SimClock> clock)
    : params_(params),
      answers_(std::move(answers)),
      options_(options),
      clock_(clock ? std::move(clock) : std::make_shared<SimClock>()) {
  validate(params_);
  if (!answers_) throw Error(Errc::kInvalidConfig, "simulated backend needs scripted answers");
  if (!(options_.discount > 0.0 && options_.discount <= 1.0)) {
    throw Error(Errc::kInvalidConfig, "discount factor must lie in (0, 1]");
  }
}

CompletionResult SimulatedBackend::complete(std::string_view prompt_text) {
  return simulate_complete(params_, prompt_text, *answers_, *clock_, options_);
}

}  // namespace cliqueparcel::backend
