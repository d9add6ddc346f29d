// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <nlohmann/json.hpp>

#include "cliqueparcel/backend.hpp"

namespace cliqueparcel::backend {

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::kIoError, "SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

ReplayCache::ReplayCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;  // a missing cache file is an empty cache
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto malformed = [&] {
      return Error(Errc::kParseError, path_.string() + ": malformed cache line " + std::to_string(line_no), line_no);
    };
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw malformed();
    try {
      CacheRecord rec;
      rec.key_hash = j.at("key_hash").get<std::string>();
      rec.model = j.at("model").get<std::string>();
      rec.prompt_sha256 = j.at("prompt_sha256").get<std::string>();
      rec.response_text = j.at("response_text").get<std::string>();
      rec.in_tokens = j.at("in_tokens").get<std::size_t>();
      rec.out_tokens = j.at("out_tokens").get<std::size_t>();
      rec.latency_s = j.at("latency_s").get<double>();
      records_.insert_or_assign(rec.key_hash, std::move(rec));
    } catch (const nlohmann::json::exception&) {
      throw malformed();
    }
  }
}

std::string ReplayCache::key_for(std::string_view model, std::string_view prompt_text) {
  return sha256_hex(std::string(model) + '\n' + sha256_hex(prompt_text));
}

std::optional<CacheRecord> ReplayCache::lookup(std::string_view model, std::string_view prompt_text) const {
  const auto key = key_for(model, prompt_text);
  std::shared_lock lock(mu_);
  auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void ReplayCache::record(std::string_view model, std::string_view prompt_text, const CompletionResult& result) {
  CacheRecord rec;
  rec.prompt_sha256 = sha256_hex(prompt_text);
  rec.model = std::string(model);
  rec.key_hash = sha256_hex(rec.model + '\n' + rec.prompt_sha256);
  rec.response_text = result.text;
  rec.in_tokens = result.input_tokens;
  rec.out_tokens = result.output_tokens;
  rec.latency_s = result.latency_seconds;
  nlohmann::json j = {{"key_hash", rec.key_hash},         {"model", rec.model},
                      {"prompt_sha256", rec.prompt_sha256}, {"response_text", rec.response_text},
                      {"in_tokens", rec.in_tokens},         {"out_tokens", rec.out_tokens},
                      {"latency_s", rec.latency_s}};
  std::unique_lock lock(mu_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(Errc::kIoError, "cannot append to cache '" + path_.string() + "'");
  out << j.dump() << '\n';
  records_.insert_or_assign(rec.key_hash, std::move(rec));
}

std::size_t ReplayCache::size() const {
  std::shared_lock lock(mu_);
  return records_.size();
}

ReplayBackend::ReplayBackend(std::shared_ptr<const ReplayCache> cache, std::string model)
    : cache_(std::move(cache)), model_(std::move(model)) {}

CompletionResult ReplayBackend::complete(std::string_view prompt_text) {
  auto rec = cache_->lookup(model_, prompt_text);
  if (!rec) throw Error(Errc::kCacheMiss, "no cached completion for model '" + model_ + "'");
  return CompletionResult{rec->response_text, rec->in_tokens, rec->out_tokens, rec->latency_s, id()};
}

RecordingBackend::RecordingBackend(std::unique_ptr<CompletionBackend> inner, std::shared_ptr<ReplayCache> cache,
                                   std::string model)
    : inner_(std::move(inner)), cache_(std::move(cache)), model_(std::move(model)) {}

CompletionResult RecordingBackend::complete(std::string_view prompt_text) {
  auto r = inner_->complete(prompt_text);
  cache_->record(model_, prompt_text, r);
  return r;
}

}  // namespace cliqueparcel::backend
