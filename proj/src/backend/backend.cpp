// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "cliqueparcel/backend.hpp"
#include "cliqueparcel/text.hpp"

namespace cliqueparcel::backend {

void validate(const CostModelParams& params) {
  if (!(params.base_seconds > 0.0) || !std::isfinite(params.base_seconds)) {
    throw Error(Errc::kInvalidConfig, "cost model base_seconds must be > 0");
  }
  if (!(params.in_coeff >= 0.0) || !(params.out_coeff >= 0.0)) {
    throw Error(Errc::kInvalidConfig, "cost model coefficients must be >= 0");
  }
}

std::string_view kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::kHttp: return "http";
    case BackendKind::kSimulated: return "simulated";
    case BackendKind::kReplay: return "replay";
  }
  return "?";
}

BackendKind parse_kind(std::string_view name) {
  const auto lower = text::casefold(name);
  if (lower == "http") return BackendKind::kHttp;
  if (lower == "simulated") return BackendKind::kSimulated;
  if (lower == "replay") return BackendKind::kReplay;
  throw Error(Errc::kInvalidConfig, "unknown backend kind '" + std::string(name) + "'");
}

void validate(const BackendConfig& config) {
  if (config.max_in_flight == 0) throw Error(Errc::kInvalidConfig, "max_in_flight must be >= 1");
  if (!(config.timeout_seconds > 0.0)) throw Error(Errc::kInvalidConfig, "timeout_seconds must be > 0");
  if (config.max_retries < 0) throw Error(Errc::kInvalidConfig, "max_retries must be >= 0");
  switch (config.kind) {
    case BackendKind::kHttp:
      if (!config.endpoint_url || config.endpoint_url->empty() || !config.model_name || config.model_name->empty()) {
        throw Error(Errc::kInvalidConfig, "http backend requires endpoint_url and model_name");
      }
      break;
    case BackendKind::kReplay:
      if (!config.cache_path) throw Error(Errc::kInvalidConfig, "replay backend requires cache_path");
      break;
    case BackendKind::kSimulated:
      break;
  }
}

ThrottledBackend::ThrottledBackend(std::shared_ptr<CompletionBackend> inner, std::size_t max_in_flight)
    : inner_(std::move(inner)), limit_(max_in_flight) {
  if (limit_ == 0) throw Error(Errc::kInvalidConfig, "max_in_flight must be >= 1");
}

CompletionResult ThrottledBackend::complete(std::string_view prompt_text) {
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
  }
  struct Release {
    ThrottledBackend* self;
    ~Release() {
      {
        std::lock_guard lock(self->mu_);
        --self->in_flight_;
      }
      self->cv_.notify_one();
    }
  } release{this};
  return inner_->complete(prompt_text);
}

std::unique_ptr<CompletionBackend> make_backend(const BackendConfig& config, const BackendResources& resources) {
  validate(config);
  switch (config.kind) {
    case BackendKind::kSimulated:
      if (!resources.answers) throw Error(Errc::kInvalidConfig, "simulated backend needs scripted answers");
      validate(resources.cost_params);
      return std::make_unique<SimulatedBackend>(resources.cost_params, resources.answers, resources.simulation,
                                                resources.clock);
    case BackendKind::kReplay: {
      auto cache = std::make_shared<ReplayCache>(*config.cache_path);
      return std::make_unique<ReplayBackend>(std::move(cache), config.model_name.value_or(""));
    }
    case BackendKind::kHttp: {
      auto http = std::make_unique<HttpBackend>(config);
      if (!config.cache_path) return http;
      auto cache = std::make_shared<ReplayCache>(*config.cache_path);
      return std::make_unique<RecordingBackend>(std::move(http), std::move(cache), *config.model_name);
    }
  }
  throw Error(Errc::kInvalidConfig, "unhandled backend kind");
}

CompletionResult complete(const BackendConfig& config, std::string_view prompt_text,
                          const BackendResources& resources) {
  if (prompt_text.empty()) throw Error(Errc::kInvalidConfig, "prompt text must be non-empty");
  return make_backend(config, resources)->complete(prompt_text);
}

}  // namespace cliqueparcel::backend
