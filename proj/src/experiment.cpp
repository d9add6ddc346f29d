// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include "cliqueparcel/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "cliqueparcel/tradeoff.hpp"

namespace cliqueparcel::experiment {
namespace {

using clique::CliqueMethod;
using nlohmann::json;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<double> sweep_weights(const ExperimentConfig& config) {
  return config.owa_sweep.empty() ? tradeoff::weight_grid(0.0, 1.0, 0.1) : config.owa_sweep;
}

std::string_view overhead_name(backend::OverheadMode mode) {
  return mode == backend::OverheadMode::kZero ? "zero" : "counted";
}

backend::OverheadMode parse_overhead(std::string_view name) {
  if (name == "zero") return backend::OverheadMode::kZero;
  if (name == "counted") return backend::OverheadMode::kCounted;
  throw Error(Errc::kInvalidConfig, "overhead must be 'counted' or 'zero', got '" + std::string(name) + "'");
}

template <typename T>
T get_as(const json& j, std::string_view key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::kInvalidConfig, "config field '" + std::string(key) + "' has the wrong type");
  }
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(Errc::kInvalidConfig, "unknown " + std::string(where) + " key '" + key + "'");
    }
  }
}

backend::BackendConfig backend_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::kInvalidConfig, "backend must be an object");
  reject_unknown(j,
                 {"kind", "endpoint_url", "model_name", "temperature", "max_in_flight", "timeout_seconds",
                  "fallback_separate", "cache_path", "max_retries", "retry_backoff_seconds"},
                 "backend");
  backend::BackendConfig b;
  for (const auto& [key, v] : j.items()) {
    if (key == "kind") b.kind = backend::parse_kind(get_as<std::string>(v, key));
    if (key == "endpoint_url") b.endpoint_url = get_as<std::string>(v, key);
    if (key == "model_name") b.model_name = get_as<std::string>(v, key);
    if (key == "temperature") b.temperature = get_as<double>(v, key);
    if (key == "max_in_flight") b.max_in_flight = get_as<std::size_t>(v, key);
    if (key == "timeout_seconds") b.timeout_seconds = get_as<double>(v, key);
    if (key == "fallback_separate") b.fallback_separate = get_as<bool>(v, key);
    if (key == "cache_path") b.cache_path = get_as<std::string>(v, key);
    if (key == "max_retries") b.max_retries = get_as<int>(v, key);
    if (key == "retry_backoff_seconds") b.retry_backoff_seconds = get_as<double>(v, key);
  }
  return b;
}

json backend_to_json(const backend::BackendConfig& b) {
  json j = {{"kind", backend::kind_name(b.kind)},
            {"temperature", b.temperature},
            {"max_in_flight", b.max_in_flight},
            {"timeout_seconds", b.timeout_seconds},
            {"fallback_separate", b.fallback_separate},
            {"max_retries", b.max_retries},
            {"retry_backoff_seconds", b.retry_backoff_seconds}};
  if (b.endpoint_url) j["endpoint_url"] = *b.endpoint_url;
  if (b.model_name) j["model_name"] = *b.model_name;
  if (b.cache_path) j["cache_path"] = b.cache_path->string();
  return j;
}

bool deterministic_backend(const ExperimentConfig& config) {
  return config.backend.kind != backend::BackendKind::kHttp;
}

// Per-repetition observations of one plan.
struct PlanRun {
  std::vector<double> repetition_times;
  double mean_time = 0.0;
  std::size_t in_tokens = 0;
  std::size_t out_tokens = 0;
  std::size_t calls = 0;
  std::size_t parse_failures = 0;
  std::size_t fallbacks = 0;
  std::size_t missing = 0;
  eval::AnswerMap answers;
};

struct Observation {
  std::vector<backend::GroupOutcome> outcomes;
  std::vector<double> latencies;
};

Observation run_plan_once(const clique::GroupingPlan& plan, const data::Workload& workload,
                          backend::CompletionBackend& backend, std::size_t max_in_flight, bool fallback) {
  std::unordered_map<std::string_view, const data::Prompt*> by_id;
  for (const auto& p : workload.prompts) by_id.emplace(p.id, &p);
  std::vector<std::vector<data::Prompt>> groups;
  for (const auto& g : plan.groups) {
    auto& members = groups.emplace_back();
    for (const auto& id : g.member_ids) members.push_back(*by_id.at(id));
  }

  const std::size_t n = groups.size();
  std::vector<backend::GroupOutcome> outcomes(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const backend::RunGroupOptions options{fallback};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        outcomes[i] = backend::run_group(backend, groups[i], options);
      } catch (const backend::DispatchIncomplete& e) {
        outcomes[i] = e.outcome();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(max_in_flight, 1), n);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Observation obs;
  for (const auto& o : outcomes) {
    auto lat = o.latencies();
    obs.latencies.insert(obs.latencies.end(), lat.begin(), lat.end());
  }
  obs.outcomes = std::move(outcomes);
  return obs;
}

bool same_content(const Observation& a, const Observation& b) {
  if (a.outcomes.size() != b.outcomes.size()) return false;
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
    const auto& x = a.outcomes[i];
    const auto& y = b.outcomes[i];
    if (x.answers != y.answers || x.calls.size() != y.calls.size()) return false;
    for (std::size_t c = 0; c < x.calls.size(); ++c) {
      if (x.calls[c].text != y.calls[c].text || x.calls[c].input_tokens != y.calls[c].input_tokens ||
          x.calls[c].output_tokens != y.calls[c].output_tokens) {
        return false;
      }
    }
  }
  return true;
}

PlanRun run_plan(const ExperimentConfig& config, const clique::GroupingPlan& plan, const data::Workload& workload,
                 backend::CompletionBackend& backend) {
  PlanRun run;
  std::optional<Observation> first;
  for (std::size_t r = 0; r < config.repetitions; ++r) {
    auto obs = run_plan_once(plan, workload, backend, config.backend.max_in_flight,
                             config.backend.fallback_separate);
    run.repetition_times.push_back(eval::ordered_sum(obs.latencies));
    if (!first) {
      first = std::move(obs);
    } else if (deterministic_backend(config) && !same_content(*first, obs)) {
      throw Error(Errc::kNondeterministicBackend,
                  "repetition " + std::to_string(r + 1) + " of " + std::string(clique::method_tag(plan.method)) +
                      " differs from the first");
    }
  }
  run.mean_time = eval::ordered_sum(run.repetition_times) / static_cast<double>(config.repetitions);
  for (const auto& o : first->outcomes) {
    run.in_tokens += o.input_tokens();
    run.out_tokens += o.output_tokens();
    run.calls += o.calls.size();
    if (o.parse_failed) ++run.parse_failures;
    run.fallbacks += static_cast<std::size_t>(std::count(o.from_fallback.begin(), o.from_fallback.end(), true));
    run.missing += o.missing.size();
    for (std::size_t i = 0; i < o.member_ids.size(); ++i) run.answers[o.member_ids[i]] = o.answers[i];
  }
  return run;
}

void fill_accuracy(MethodReport& report, const data::Workload& workload) {
  std::size_t hits = 0;
  for (const auto& p : workload.prompts) {
    if (!p.ground_truth) continue;
    ++report.labeled_count;
    auto it = report.answers.find(p.id);
    if (it != report.answers.end() && eval::accuracy_match(it->second, p)) ++hits;
  }
  if (report.labeled_count > 0) {
    report.accuracy = static_cast<double>(hits) / static_cast<double>(report.labeled_count);
  }
}

void fill_owa(ExperimentReport& report) {
  if (report.per_method.empty()) return;
  std::vector<tradeoff::ObjectivePoint> points;
  for (const auto& m : report.per_method) {
    tradeoff::ObjectivePoint p;
    p.method = m.method;
    p.efficiency_raw = m.efficiency.weighted_efficiency_e;
    p.faithfulness_raw = m.faithfulness.overall_dh;
    points.push_back(p);
  }
  const auto normalized = tradeoff::normalize_objectives(points);
  for (double w : sweep_weights(report.config)) {
    const auto sel = tradeoff::select_method(normalized, tradeoff::OwaWeights{w});
    report.owa_selection.emplace_back(w, sel.method);
    for (auto& m : report.per_method) m.owa_scores.emplace_back(w, sel.scores.at(m.method));
  }
}

clique::CliqueMethod sweep_method(const ExperimentConfig& config) {
  for (auto m : config.methods) {
    if (m != CliqueMethod::kSeparate) return m;
  }
  return CliqueMethod::kRC;
}

}  // namespace

void validate(const ExperimentConfig& config) {
  if (config.batch_size < 1) throw Error(Errc::kInvalidConfig, "batch_size must be >= 1");
  if (config.repetitions < 1) throw Error(Errc::kInvalidConfig, "repetitions must be >= 1");
  if (!(config.efficiency_weight >= 0.0)) throw Error(Errc::kInvalidConfig, "efficiency_weight must be >= 0");
  if (!(config.simulation.discount > 0.0 && config.simulation.discount <= 1.0)) {
    throw Error(Errc::kInvalidConfig, "discount must lie in (0, 1]");
  }
  for (double w : config.owa_sweep) {
    if (!(w >= 0.0 && w <= 1.0)) throw Error(Errc::kInvalidConfig, "OWA weights must lie in [0, 1]");
  }
  if (config.users && *config.users == 0) throw Error(Errc::kInvalidConfig, "users must be >= 1");
  if (config.embedding_dim < 8) throw Error(Errc::kInvalidConfig, "embedding_dim must be >= 8");
  if (config.cost_params) backend::validate(*config.cost_params);
  backend::validate(config.backend);
}

ExperimentConfig config_from_json(std::string_view json_text) {
  auto j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::kInvalidConfig, "config is not a JSON object");
  reject_unknown(j,
                 {"dataset_path", "methods", "batch_size", "repetitions", "seed", "backend", "cost_params",
                  "discount", "overhead", "efficiency_weight", "owa_sweep", "answers_path", "users", "output_path",
                  "deterministic_report", "embedding_dim"},
                 "config");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "dataset_path") c.dataset_path = get_as<std::string>(v, key);
    if (key == "methods") {
      for (const auto& tag : get_as<std::vector<std::string>>(v, key)) c.methods.push_back(clique::parse_method(tag));
    }
    if (key == "batch_size") c.batch_size = get_as<std::size_t>(v, key);
    if (key == "repetitions") c.repetitions = get_as<std::size_t>(v, key);
    if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
    if (key == "backend") c.backend = backend_from_json(v);
    if (key == "cost_params") {
      if (!v.is_object()) throw Error(Errc::kInvalidConfig, "cost_params must be an object");
      reject_unknown(v, {"base_seconds", "in_coeff", "out_coeff"}, "cost_params");
      backend::CostModelParams p;
      if (v.contains("base_seconds")) p.base_seconds = get_as<double>(v["base_seconds"], "base_seconds");
      if (v.contains("in_coeff")) p.in_coeff = get_as<double>(v["in_coeff"], "in_coeff");
      if (v.contains("out_coeff")) p.out_coeff = get_as<double>(v["out_coeff"], "out_coeff");
      c.cost_params = p;
    }
    if (key == "discount") c.simulation.discount = get_as<double>(v, key);
    if (key == "overhead") c.simulation.overhead = parse_overhead(get_as<std::string>(v, key));
    if (key == "efficiency_weight") c.efficiency_weight = get_as<double>(v, key);
    if (key == "owa_sweep") c.owa_sweep = get_as<std::vector<double>>(v, key);
    if (key == "answers_path") c.answers_path = get_as<std::string>(v, key);
    if (key == "users") c.users = get_as<std::size_t>(v, key);
    if (key == "output_path") c.output_path = get_as<std::string>(v, key);
    if (key == "deterministic_report") c.deterministic_report = get_as<bool>(v, key);
    if (key == "embedding_dim") c.embedding_dim = get_as<std::size_t>(v, key);
  }
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json methods = json::array();
  for (auto m : run_order(c)) methods.push_back(clique::method_tag(m));
  json j = {{"dataset_path", c.dataset_path.string()},
            {"methods", methods},
            {"batch_size", c.batch_size},
            {"repetitions", c.repetitions},
            {"seed", c.seed},
            {"backend", backend_to_json(c.backend)},
            {"discount", c.simulation.discount},
            {"overhead", overhead_name(c.simulation.overhead)},
            {"efficiency_weight", c.efficiency_weight},
            {"owa_sweep", sweep_weights(c)},
            {"deterministic_report", c.deterministic_report},
            {"embedding_dim", c.embedding_dim}};
  const auto p = c.cost_params.value_or(backend::CostModelParams{});
  j["cost_params"] = {{"base_seconds", p.base_seconds}, {"in_coeff", p.in_coeff}, {"out_coeff", p.out_coeff}};
  if (c.answers_path) j["answers_path"] = c.answers_path->string();
  if (c.users) j["users"] = *c.users;
  if (c.output_path) j["output_path"] = c.output_path->string();
  return j.dump(2);
}

std::vector<CliqueMethod> run_order(const ExperimentConfig& config) {
  std::vector<CliqueMethod> order{CliqueMethod::kSeparate};
  for (auto m : config.methods) {
    if (std::find(order.begin(), order.end(), m) == order.end()) order.push_back(m);
  }
  return order;
}

std::unique_ptr<backend::CompletionBackend> backend_for(const ExperimentConfig& config,
                                                        const data::Workload& workload) {
  backend::BackendResources res;
  if (config.backend.kind == backend::BackendKind::kSimulated) {
    res.answers = std::make_shared<const backend::ScriptedAnswers>(
        config.answers_path ? backend::ScriptedAnswers::from_file(workload, *config.answers_path)
                            : backend::ScriptedAnswers::from_workload(workload));
  }
  res.cost_params = config.cost_params.value_or(backend::CostModelParams{});
  res.simulation = config.simulation;
  return backend::make_backend(config.backend, res);
}

ExperimentReport run_experiment(const ExperimentConfig& config, const data::Workload& workload) {
  validate(config);
  auto backend = backend_for(config, workload);
  return run_experiment(config, workload, *backend);
}

ExperimentReport run_experiment(const ExperimentConfig& config, const data::Workload& workload,
                                backend::CompletionBackend& backend) {
  validate(config);
  if (workload.prompts.empty()) throw Error(Errc::kEmptyWorkload, "workload has no prompts");
  ExperimentReport report;
  report.config = config;
  report.workload_name = workload.name;
  report.prompt_count = workload.size();
  report.backend_id = backend.id();
  report.live = !deterministic_backend(config);

  const clique::GroupingOptions grouping{true, config.embedding_dim};
  eval::MethodTotals base_totals;
  for (auto method : run_order(config)) {
    MethodReport m;
    m.method = method;
    try {
      m.plan = clique::make_grouping(method, workload, config.batch_size, config.seed, grouping);
      auto run = run_plan(config, m.plan, workload, backend);
      const eval::MethodTotals totals{run.mean_time, run.in_tokens, run.out_tokens};
      if (method == CliqueMethod::kSeparate) base_totals = totals;
      m.efficiency =
          eval::efficiency_report(method, totals, CliqueMethod::kSeparate, base_totals, config.efficiency_weight);
      m.repetition_times = std::move(run.repetition_times);
      m.call_count = run.calls;
      m.parse_failure_count = run.parse_failures;
      m.fallback_count = run.fallbacks;
      m.missing_count = run.missing;
      m.answers = std::move(run.answers);
    } catch (const Error& e) {
      report.partial = true;
      report.error = e.what();
      report.error_code = e.code();
      break;
    }
    report.per_method.push_back(std::move(m));
    auto& added = report.per_method.back();
    // SEPARATE always runs first, so front() holds the baseline answers.
    added.faithfulness = eval::method_faithfulness(added.plan, added.answers, report.per_method.front().answers,
                                                   workload, config.embedding_dim);
    fill_accuracy(added, workload);
    if (added.missing_count > 0) report.partial = true;
  }
  if (!report.per_method.empty()) {
    report.separate_self_efficiency = report.per_method.front().efficiency.weighted_efficiency_e;
  }
  fill_owa(report);
  return report;
}

std::vector<SweepRow> sweep_batch_size(const ExperimentConfig& config, const data::Workload& workload,
                                       backend::CompletionBackend& backend, const std::vector<std::size_t>& sizes) {
  validate(config);
  if (sizes.empty()) throw Error(Errc::kInvalidConfig, "sweep needs at least one batch size");
  const clique::GroupingOptions grouping{true, config.embedding_dim};
  const auto separate = clique::make_grouping(CliqueMethod::kSeparate, workload, 1, config.seed, grouping);
  const auto base = run_plan(config, separate, workload, backend);
  const auto method = sweep_method(config);
  std::vector<SweepRow> rows;
  for (auto l : sizes) {
    const auto plan = clique::make_grouping(method, workload, l, config.seed, grouping);
    const auto run = run_plan(config, plan, workload, backend);
    SweepRow row;
    row.l = l;
    row.total_time_s = run.mean_time;
    row.gain = base.mean_time / run.mean_time;
    row.output_ratio = static_cast<double>(run.out_tokens) / static_cast<double>(base.out_tokens);
    row.input_ratio = static_cast<double>(run.in_tokens) / static_cast<double>(base.in_tokens);
    row.calls = run.calls;
    row.parse_failures = run.parse_failures;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "l,total_time_s,gain,output_ratio,input_ratio,calls,parse_failures\n";
  for (const auto& r : rows) {
    out << r.l << ',' << fmt(r.total_time_s) << ',' << fmt(r.gain) << ',' << fmt(r.output_ratio) << ','
        << fmt(r.input_ratio) << ',' << r.calls << ',' << r.parse_failures << '\n';
  }
  return out.str();
}

std::string stats_csv(const data::Workload& workload, double bin_width) {
  const auto stats = data::length_dispersion_stats(workload);
  std::ostringstream out;
  out << "dataset,prompts,mean_tokens,stdev_tokens,rsd_percent\n";
  out << workload.name << ',' << workload.size() << ',' << fmt(stats.mean_tokens) << ',' << fmt(stats.stdev_tokens)
      << ',' << fmt(stats.rsd_percent) << "\n\n";
  const auto [zmin, zmax] = std::minmax_element(stats.z_scores.begin(), stats.z_scores.end());
  const double lo = std::floor(*zmin / bin_width) * bin_width;
  const double hi = std::max(lo + bin_width, (std::floor(*zmax / bin_width) + 1.0) * bin_width);
  out << "bin_lo,bin_hi,count\n";
  for (const auto& b : data::histogram(stats.z_scores, lo, hi, bin_width)) {
    out << fmt(b.lo) << ',' << fmt(b.hi) << ',' << b.count << '\n';
  }
  return out.str();
}

std::vector<eval::TimingSample> load_timing_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open timing log '" + path.string() + "'");
  std::vector<eval::TimingSample> samples;
  std::string line;
  long line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto bad = [&] {
      return Error(Errc::kParseError, path.string() + ": bad timing record on line " + std::to_string(line_no),
                   line_no);
    };
    if (line[first] == '{') {
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded()) throw bad();
      try {
        samples.push_back({j.at("in_tokens").get<double>(), j.at("out_tokens").get<double>(),
                           j.at("latency_s").get<double>()});
      } catch (const json::exception&) {
        throw bad();
      }
      continue;
    }
    if (!header_seen && line.find("in_tokens") != std::string::npos) {
      header_seen = true;
      continue;
    }
    std::istringstream fields(line);
    eval::TimingSample s{};
    char c1 = 0;
    char c2 = 0;
    if (!(fields >> s.in_tokens >> c1 >> s.out_tokens >> c2 >> s.seconds) || c1 != ',' || c2 != ',') throw bad();
    samples.push_back(s);
  }
  return samples;
}

}  // namespace cliqueparcel::experiment
