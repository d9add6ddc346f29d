// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cliqueparcel/experiment.hpp"
#include "cliqueparcel/tradeoff.hpp"

namespace cp = cliqueparcel;
namespace ex = cliqueparcel::experiment;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitDataset = 2;
constexpr int kExitBackend = 3;

struct Flags {
  std::string config_path;
  std::string dataset;
  std::string methods;
  std::optional<std::size_t> batch_size;
  std::optional<std::uint64_t> seed;
  std::string backend;
  std::string out;
  bool deterministic = false;
  std::string owa_weights;
  std::optional<std::size_t> repetitions;
  std::optional<std::size_t> users;
  std::string endpoint;
  std::string model;
  std::string cache;
  bool fallback = false;
  std::optional<double> discount;
  std::string overhead;
  std::string answers;
  std::optional<double> w;
  std::optional<std::size_t> max_in_flight;
  std::string timing_csv;
  std::string sizes = "1,2,4,8,16";
  double bin_width = 0.5;
  std::string timing_log;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cp::Error(cp::Errc::kInvalidConfig, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw cp::Error(cp::Errc::kIoError, "cannot write '" + path + "'");
  out << content;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

std::vector<double> parse_weights(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.size() != 3) throw cp::Error(cp::Errc::kInvalidConfig, "--owa-weights expects lo:hi:step");
  try {
    return cp::tradeoff::weight_grid(std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2]));
  } catch (const std::logic_error&) {
    throw cp::Error(cp::Errc::kInvalidConfig, "--owa-weights has a non-numeric field");
  }
}

// Config file first, flags override.
ex::ExperimentConfig build_config(const Flags& f) {
  ex::ExperimentConfig c;
  if (!f.config_path.empty()) c = ex::config_from_json(read_file(f.config_path));
  if (!f.dataset.empty()) c.dataset_path = f.dataset;
  if (!f.methods.empty()) {
    c.methods.clear();
    for (const auto& tag : split(f.methods, ',')) c.methods.push_back(cp::clique::parse_method(tag));
  }
  if (f.batch_size) c.batch_size = *f.batch_size;
  if (f.seed) c.seed = *f.seed;
  if (!f.backend.empty()) c.backend.kind = cp::backend::parse_kind(f.backend);
  if (!f.out.empty()) c.output_path = f.out;
  if (f.deterministic) c.deterministic_report = true;
  if (!f.owa_weights.empty()) c.owa_sweep = parse_weights(f.owa_weights);
  if (f.repetitions) c.repetitions = *f.repetitions;
  if (f.users) c.users = *f.users;
  if (!f.endpoint.empty()) c.backend.endpoint_url = f.endpoint;
  if (!f.model.empty()) c.backend.model_name = f.model;
  if (!f.cache.empty()) c.backend.cache_path = f.cache;
  if (f.fallback) c.backend.fallback_separate = true;
  if (f.discount) c.simulation.discount = *f.discount;
  if (f.overhead == "zero") c.simulation.overhead = cp::backend::OverheadMode::kZero;
  if (!f.overhead.empty() && f.overhead != "zero" && f.overhead != "counted") {
    throw cp::Error(cp::Errc::kInvalidConfig, "--overhead must be counted or zero");
  }
  if (!f.answers.empty()) c.answers_path = f.answers;
  if (f.w) c.efficiency_weight = *f.w;
  if (f.max_in_flight) c.backend.max_in_flight = *f.max_in_flight;
  if (c.dataset_path.empty()) throw cp::Error(cp::Errc::kInvalidConfig, "no dataset given");
  ex::validate(c);
  return c;
}

cp::data::Workload load_workload(const ex::ExperimentConfig& c) {
  auto w = cp::data::load_dataset(c.dataset_path);
  if (c.users) cp::data::assign_users_round_robin(w, *c.users);
  return w;
}

void emit(const std::optional<std::filesystem::path>& path, const std::string& content) {
  if (path) {
    write_file(path->string(), content);
  } else {
    std::cout << content;
  }
}

int fail(int code, const std::exception& e) {
  std::cerr << "cliqueparcel: " << e.what() << "\n";
  return code;
}

// Runs `body` with config and dataset errors mapped to their exit codes.
template <typename Body>
int staged(const Flags& f, Body body) {
  ex::ExperimentConfig config;
  try {
    config = build_config(f);
  } catch (const cp::Error& e) {
    return fail(kExitConfig, e);
  }
  cp::data::Workload workload;
  try {
    workload = load_workload(config);
  } catch (const cp::Error& e) {
    return fail(kExitDataset, e);
  }
  try {
    return body(config, workload);
  } catch (const cp::Error& e) {
    if (e.code() == cp::Errc::kInvalidConfig) return fail(kExitConfig, e);
    if (e.code() == cp::Errc::kMissingConcept || e.code() == cp::Errc::kSchemaError) return fail(kExitDataset, e);
    return fail(kExitBackend, e);
  }
}

int run_command(const Flags& f) {
  return staged(f, [&](const ex::ExperimentConfig& config, const cp::data::Workload& workload) {
    std::unique_ptr<cp::backend::CompletionBackend> backend;
    try {
      backend = ex::backend_for(config, workload);
    } catch (const cp::Error& e) {
      return fail(e.code() == cp::Errc::kInvalidConfig ? kExitConfig : kExitBackend, e);
    }
    const auto report = ex::run_experiment(config, workload, *backend);
    if (config.output_path) {
      write_file(config.output_path->string(), ex::report_to_json(report));
      std::cout << ex::report_table(report);
    } else {
      std::cout << ex::report_to_json(report);
      std::cerr << ex::report_table(report);
    }
    if (!f.timing_csv.empty()) write_file(f.timing_csv, ex::timing_csv(report));
    if (report.error) {
      std::cerr << "cliqueparcel: " << *report.error << "\n";
      return *report.error_code == cp::Errc::kInvalidConfig ? kExitConfig : kExitBackend;
    }
    return 0;
  });
}

int sweep_command(const Flags& f) {
  return staged(f, [&](const ex::ExperimentConfig& config, const cp::data::Workload& workload) {
    std::vector<std::size_t> sizes;
    for (const auto& s : split(f.sizes, ',')) {
      try {
        sizes.push_back(std::stoul(s));
      } catch (const std::logic_error&) {
        return fail(kExitConfig, cp::Error(cp::Errc::kInvalidConfig, "bad batch size '" + s + "'"));
      }
    }
    auto backend = ex::backend_for(config, workload);
    emit(config.output_path, ex::sweep_csv(ex::sweep_batch_size(config, workload, *backend, sizes)));
    return 0;
  });
}

int stats_command(const Flags& f) {
  cp::data::Workload workload;
  try {
    if (f.dataset.empty()) throw cp::Error(cp::Errc::kInvalidConfig, "no dataset given");
    workload = cp::data::load_dataset(f.dataset);
  } catch (const cp::Error& e) {
    return fail(e.code() == cp::Errc::kInvalidConfig ? kExitConfig : kExitDataset, e);
  }
  try {
    const auto csv = ex::stats_csv(workload, f.bin_width);
    emit(f.out.empty() ? std::nullopt : std::optional<std::filesystem::path>(f.out), csv);
  } catch (const cp::Error& e) {
    return fail(kExitConfig, e);
  }
  return 0;
}

int fit_command(const Flags& f) {
  std::vector<cp::eval::TimingSample> samples;
  try {
    samples = ex::load_timing_log(f.timing_log);
  } catch (const cp::Error& e) {
    return fail(kExitDataset, e);
  }
  try {
    const auto fit = cp::eval::fit_cost_model(samples);
    nlohmann::json j = {{"samples", samples.size()},
                        {"base_seconds", fit.params.base_seconds},
                        {"in_coeff", fit.params.in_coeff},
                        {"out_coeff", fit.params.out_coeff},
                        {"rms_residual", fit.rms_residual},
                        {"output_dominates", fit.params.output_dominates()}};
    if (fit.params.in_coeff != 0.0) j["out_over_in"] = fit.params.out_coeff / fit.params.in_coeff;
    emit(f.out.empty() ? std::nullopt : std::optional<std::filesystem::path>(f.out), j.dump(2) + "\n");
  } catch (const cp::Error& e) {
    return fail(kExitDataset, e);
  }
  return 0;
}

void experiment_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment config");
  cmd->add_option("--dataset", f.dataset, "JSONL dataset");
  cmd->add_option("--methods", f.methods, "Comma-separated method tags (SEPARATE is always included)");
  cmd->add_option("--batch-size", f.batch_size, "Batch size l");
  cmd->add_option("--seed", f.seed, "Seed for randomized methods");
  cmd->add_option("--backend", f.backend, "http, simulated or replay");
  cmd->add_option("--out", f.out, "Output path");
  cmd->add_flag("--deterministic-report", f.deterministic, "Omit timestamps from the report");
  cmd->add_option("--owa-weights", f.owa_weights, "OWA weight grid lo:hi:step");
  cmd->add_option("--repetitions", f.repetitions, "Timing repetitions per method");
  cmd->add_option("--users", f.users, "Assign prompts to this many users round-robin");
  cmd->add_option("--endpoint", f.endpoint, "Chat-completions endpoint URL");
  cmd->add_option("--model", f.model, "Model name");
  cmd->add_option("--cache", f.cache, "Replay cache path");
  cmd->add_flag("--fallback", f.fallback, "Re-issue unparsed items individually");
  cmd->add_option("--discount", f.discount, "Simulated fraction of each answer kept in batches");
  cmd->add_option("--overhead", f.overhead, "Simulated template overhead: counted or zero");
  cmd->add_option("--answers", f.answers, "JSONL of scripted simulator answers");
  cmd->add_option("--w", f.w, "Input-token weight in the relative cost");
  cmd->add_option("--max-in-flight", f.max_in_flight, "Concurrent backend calls");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt batching experiments"};
  app.require_subcommand(1);
  Flags f;

  auto* run = app.add_subcommand("run", "Run methods against the SEPARATE baseline and report");
  experiment_flags(run, f);
  run->add_option("--timing-csv", f.timing_csv, "Per-repetition timing CSV");

  auto* sweep = app.add_subcommand("sweep", "Running time and gain across batch sizes");
  experiment_flags(sweep, f);
  sweep->add_option("--sizes", f.sizes, "Comma-separated batch sizes");

  auto* stats = app.add_subcommand("stats", "Prompt length dispersion");
  stats->add_option("--dataset", f.dataset, "JSONL dataset")->required();
  stats->add_option("--out", f.out, "Output CSV path");
  stats->add_option("--bin-width", f.bin_width, "z-score histogram bin width");

  auto* fit = app.add_subcommand("fit-cost-model", "Fit base and per-token latency from a timing log");
  fit->add_option("timing_log", f.timing_log, "CSV (in_tokens,out_tokens,seconds) or cache JSONL")->required();
  fit->add_option("--out", f.out, "Output JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  try {
    if (*run) return run_command(f);
    if (*sweep) return sweep_command(f);
    if (*stats) return stats_command(f);
    if (*fit) return fit_command(f);
  } catch (const cp::Error& e) {
    return fail(kExitBackend, e);
  }
  return 0;
}
