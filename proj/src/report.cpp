// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cliqueparcel/batch.hpp"
#include "cliqueparcel/experiment.hpp"

namespace cliqueparcel::experiment {
namespace {

using nlohmann::json;

std::string weight_key(double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", w);
  std::string s = buf;
  if (s.find('.') == std::string::npos) s += ".0";
  return s;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

json efficiency_json(const eval::EfficiencyReport& e) {
  return {{"baseline", clique::method_tag(e.baseline)},
          {"total_time_s", e.total_time_s},
          {"total_in_tokens", e.total_in_tokens},
          {"total_out_tokens", e.total_out_tokens},
          {"input_ratio", e.input_ratio},
          {"output_ratio", e.output_ratio},
          {"time_ratio", e.time_ratio},
          {"weight_w", e.weight_w},
          {"relative_cost_c", e.relative_cost_c},
          {"weighted_efficiency_e", e.weighted_efficiency_e}};
}

json faithfulness_json(const eval::FaithfulnessScore& f) {
  json items = json::array();
  for (const auto& it : f.per_item) {
    items.push_back({{"id", it.prompt_id},
                     {"cosine", it.cosine},
                     {"bleu", it.bleu},
                     {"rouge_l", it.rouge},
                     {"accurate", it.accurate},
                     {"has_ground_truth", it.has_ground_truth},
                     {"contribution", it.contribution}});
  }
  return {{"overall_dh", f.overall_dh},
          {"per_item_mean", f.per_item_mean},
          {"per_group_d", f.per_group_d},
          {"per_item", items}};
}

json method_json(const MethodReport& m) {
  json owa = json::object();
  for (const auto& [w, s] : m.owa_scores) owa[weight_key(w)] = s;
  json groups = json::array();
  for (const auto& g : m.plan.groups) {
    json gj = {{"k", g.k}, {"members", g.member_ids}};
    if (g.concept_label) gj["concept"] = *g.concept_label;
    groups.push_back(gj);
  }
  json j = {{"method", clique::method_tag(m.method)},
            {"batch_size", m.plan.batch_size},
            {"group_count", m.plan.groups.size()},
            {"groups", groups},
            {"call_count", m.call_count},
            {"parse_failure_count", m.parse_failure_count},
            {"fallback_count", m.fallback_count},
            {"missing_count", m.missing_count},
            {"repetition_times_s", m.repetition_times},
            {"efficiency", efficiency_json(m.efficiency)},
            {"faithfulness", faithfulness_json(m.faithfulness)},
            {"labeled_count", m.labeled_count},
            {"owa_scores", owa}};
  j["accuracy"] = m.accuracy ? json(*m.accuracy) : json(nullptr);
  return j;
}

std::string cell(double v, int precision) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

}  // namespace

std::string report_to_json(const ExperimentReport& report) {
  json per_method = json::array();
  for (const auto& m : report.per_method) per_method.push_back(method_json(m));
  json selection = json::object();
  for (const auto& [w, method] : report.owa_selection) selection[weight_key(w)] = clique::method_tag(method);

  json j = {{"template_version", batch::kTemplateVersion},
            {"config_echo", json::parse(config_to_json(report.config))},
            {"workload", {{"name", report.workload_name}, {"prompts", report.prompt_count}}},
            {"backend", report.backend_id},
            {"live", report.live},
            {"reproducible", !report.live},
            {"partial", report.partial},
            {"separate_sanity",
             {{"expected_e", report.config.efficiency_weight + 1.0}, {"observed_e", report.separate_self_efficiency}}},
            {"per_method", per_method},
            {"owa_selection", selection}};
  if (report.error) {
    j["error"] = {{"code", errc_name(*report.error_code)}, {"message", *report.error}};
  }
  if (!report.config.deterministic_report) j["generated_at"] = utc_now();
  return j.dump(2) + "\n";
}

std::string report_table(const ExperimentReport& report) {
  std::ostringstream out;
  out << "workload " << report.workload_name << " (" << report.prompt_count << " prompts), backend "
      << report.backend_id << ", l=" << report.config.batch_size << ", w=" << report.config.efficiency_weight << "\n";
  if (report.live) out << "live run: results are not reproducible\n";
  if (report.partial) out << "PARTIAL REPORT" << (report.error ? ": " + *report.error : std::string()) << "\n";
  out << std::left << std::setw(10) << "method" << std::right << std::setw(7) << "groups" << std::setw(7) << "calls"
      << std::setw(12) << "time_s" << std::setw(10) << "in_tok" << std::setw(10) << "out_tok" << std::setw(8) << "c"
      << std::setw(8) << "e" << std::setw(9) << "D_H" << std::setw(8) << "acc" << std::setw(8) << "parse!"
      << "\n";
  for (const auto& m : report.per_method) {
    const auto& e = m.efficiency;
    out << std::left << std::setw(10) << clique::method_tag(m.method) << std::right << std::setw(7)
        << m.plan.groups.size() << std::setw(7) << m.call_count << std::setw(12) << cell(e.total_time_s, 3)
        << std::setw(10) << e.total_in_tokens << std::setw(10) << e.total_out_tokens << std::setw(8)
        << cell(e.relative_cost_c, 3) << std::setw(8) << cell(e.weighted_efficiency_e, 3) << std::setw(9)
        << cell(m.faithfulness.overall_dh, 3) << std::setw(8) << (m.accuracy ? cell(*m.accuracy, 3) : "n/a")
        << std::setw(8) << m.parse_failure_count << "\n";
  }
  if (!report.owa_selection.empty()) {
    out << "OWA selection:";
    for (const auto& [w, method] : report.owa_selection) out << " " << weight_key(w) << "=" << clique::method_tag(method);
    out << "\n";
  }
  return out.str();
}

std::string timing_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "method,repetition,seconds\n";
  for (const auto& m : report.per_method) {
    for (std::size_t r = 0; r < m.repetition_times.size(); ++r) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.12g", m.repetition_times[r]);
      out << clique::method_tag(m.method) << ',' << r + 1 << ',' << buf << '\n';
    }
  }
  return out.str();
}

}  // namespace cliqueparcel::experiment
