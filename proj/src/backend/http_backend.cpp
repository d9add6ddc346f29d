// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <thread>

#include "cliqueparcel/backend.hpp"
#include "cliqueparcel/text.hpp"

namespace cliqueparcel::backend {
namespace {

// Splits "scheme://host[:port]/path" into ("scheme://host[:port]", "/path").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(Errc::kInvalidConfig, "endpoint_url needs a scheme: " + url);
  const auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

}  // namespace

CompletionResult parse_chat_response(std::string_view body, double latency_seconds, std::string backend_id,
                                     std::string_view prompt_text) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::kMalformedResponse, "response is not a JSON object");
  CompletionResult r;
  r.latency_seconds = latency_seconds;
  r.backend_id = std::move(backend_id);
  try {
    r.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::kMalformedResponse, "missing choices[0].message.content");
  }
  const auto usage = j.find("usage");
  auto usage_count = [&](const char* key, std::size_t fallback) -> std::size_t {
    if (usage == j.end() || !usage->is_object()) return fallback;
    auto it = usage->find(key);
    if (it == usage->end() || !it->is_number_unsigned()) return fallback;
    return it->get<std::size_t>();
  };
  // Providers that omit usage fall back to the local tokenizer.
  r.input_tokens = usage_count("prompt_tokens", text::tokenize_count(prompt_text));
  r.output_tokens = usage_count("completion_tokens", text::tokenize_count(r.text));
  return r;
}

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  validate(config_);
  std::tie(base_url_, path_) = split_url(*config_.endpoint_url);
}

std::string HttpBackend::request_body(std::string_view prompt_text) const {
  nlohmann::json body = {
      {"model", *config_.model_name},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", std::string(prompt_text)}}})},
      {"temperature", config_.temperature},
  };
  return body.dump();
}

CompletionResult HttpBackend::attempt(std::string_view prompt_text) {
  httplib::Client client(base_url_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(config_.timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (const char* key = std::getenv(std::string(kApiKeyEnv).c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto start = std::chrono::steady_clock::now();
  auto res = client.Post(path_, headers, request_body(prompt_text), "application/json");
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw Error(Errc::kTimeout, "request to " + base_url_ + " timed out (" + httplib::to_string(err) + ")");
    }
    throw Error(Errc::kTransportError, "request to " + base_url_ + " failed: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(Errc::kHttpStatus, "HTTP " + std::to_string(res->status), res->status);
  }
  return parse_chat_response(res->body, elapsed, id(), prompt_text);
}

CompletionResult HttpBackend::complete(std::string_view prompt_text) {
  if (prompt_text.empty()) throw Error(Errc::kInvalidConfig, "prompt text must be non-empty");
  for (int retry = 0;; ++retry) {
    try {
      return attempt(prompt_text);
    } catch (const Error& e) {
      if (!e.retriable() || retry >= config_.max_retries) throw;
      const double wait = config_.retry_backoff_seconds * std::pow(2.0, retry);
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
  }
}

}  // namespace cliqueparcel::backend
