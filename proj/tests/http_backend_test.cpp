// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <httplib.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <thread>

#include <unistd.h>

#include "cliqueparcel/backend.hpp"

namespace backend = cliqueparcel::backend;
using cliqueparcel::Errc;
using cliqueparcel::Error;

namespace {

// Local chat-completions stand-in on an ephemeral port.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  backend::BackendConfig config() const {
    backend::BackendConfig c;
    c.kind = backend::BackendKind::kHttp;
    c.endpoint_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    c.model_name = "test-model";
    c.retry_backoff_seconds = 0.0;
    c.timeout_seconds = 5.0;
    return c;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string chat_body(const std::string& content, bool usage = true) {
  nlohmann::json j = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
  if (usage) j["usage"] = {{"prompt_tokens", 17}, {"completion_tokens", 5}};
  return j.dump();
}

}  // namespace

TEST(HttpBackend, SuccessWithUsage) {
  std::string seen_body;
  std::string seen_auth;
  FakeEndpoint ep([&](const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    seen_auth = req.get_header_value("Authorization");
    res.set_content(chat_body("Oslo."), "application/json");
  });
  ::setenv("CLIQUEPARCEL_API_KEY", "secret-key", 1);
  backend::HttpBackend http(ep.config());
  const auto r = http.complete("Capital of Norway?");
  ::unsetenv("CLIQUEPARCEL_API_KEY");
  EXPECT_EQ(r.text, "Oslo.");
  EXPECT_EQ(r.input_tokens, 17u);
  EXPECT_EQ(r.output_tokens, 5u);
  EXPECT_GE(r.latency_seconds, 0.0);
  EXPECT_EQ(seen_auth, "Bearer secret-key");
  const auto body = nlohmann::json::parse(seen_body);
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "Capital of Norway?");
  EXPECT_EQ(body["temperature"], 0.0);
}

TEST(HttpBackend, MissingUsageFallsBackToTokenizer) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
    res.set_content(chat_body("Two words", false), "application/json");
  });
  backend::HttpBackend http(ep.config());
  const auto r = http.complete("one two three");
  EXPECT_EQ(r.input_tokens, 3u);
  EXPECT_EQ(r.output_tokens, 2u);
}

TEST(HttpBackend, RetriesTooManyRequests) {
  std::atomic<int> hits{0};
  FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
    if (++hits <= 2) {
      res.status = 429;
      return;
    }
    res.set_content(chat_body("ok"), "application/json");
  });
  backend::HttpBackend http(ep.config());
  EXPECT_EQ(http.complete("hi").text, "ok");
  EXPECT_EQ(hits.load(), 3);
}

TEST(HttpBackend, GivesUpAfterMaxRetries) {
  std::atomic<int> hits{0};
  FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  backend::HttpBackend http(ep.config());
  try {
    http.complete("hi");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kHttpStatus);
    EXPECT_EQ(e.detail(), 503);
    EXPECT_TRUE(e.retriable());
  }
  EXPECT_EQ(hits.load(), 4);
}

TEST(HttpBackend, ClientErrorNotRetried) {
  std::atomic<int> hits{0};
  FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
  });
  backend::HttpBackend http(ep.config());
  try {
    http.complete("hi");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kHttpStatus);
    EXPECT_EQ(e.detail(), 400);
  }
  EXPECT_EQ(hits.load(), 1);
}

TEST(HttpBackend, MalformedResponse) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices": []})", "application/json");
  });
  backend::HttpBackend http(ep.config());
  try {
    http.complete("hi");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kMalformedResponse);
  }
  EXPECT_THROW(backend::parse_chat_response("not json", 0, "x", "p"), Error);
}

TEST(HttpBackend, Timeout) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    res.set_content(chat_body("late"), "application/json");
  });
  auto c = ep.config();
  c.timeout_seconds = 0.1;
  c.max_retries = 0;
  backend::HttpBackend http(c);
  try {
    http.complete("hi");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kTimeout);
  }
}

TEST(HttpBackend, ConnectionRefused) {
  // Bind an ephemeral port without listening, read it back, then release it.
  int port = 0;
  {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    ASSERT_GE(fd, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
    socklen_t len = sizeof addr;
    ASSERT_EQ(::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len), 0);
    port = ntohs(addr.sin_port);
    ::close(fd);
  }
  backend::BackendConfig c;
  c.kind = backend::BackendKind::kHttp;
  c.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  c.model_name = "m";
  c.max_retries = 1;
  c.retry_backoff_seconds = 0.0;
  backend::HttpBackend http(c);
  try {
    http.complete("hi");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kTransportError);
  }
}

TEST(HttpBackend, RecordingThenReplay) {
  FakeEndpoint ep([](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    res.set_content(chat_body("echo: " + body["messages"][0]["content"].get<std::string>()), "application/json");
  });
  const auto cache = std::filesystem::temp_directory_path() / ("cliqueparcel_rec_" + std::to_string(::getpid()));
  std::filesystem::remove(cache);
  auto c = ep.config();
  c.cache_path = cache;
  const auto live = backend::make_backend(c)->complete("ping");
  c.kind = backend::BackendKind::kReplay;
  const auto replayed = backend::make_backend(c)->complete("ping");
  EXPECT_EQ(replayed.text, live.text);
  EXPECT_EQ(replayed.input_tokens, live.input_tokens);
  EXPECT_EQ(replayed.output_tokens, live.output_tokens);
  EXPECT_DOUBLE_EQ(replayed.latency_seconds, live.latency_seconds);
  std::filesystem::remove(cache);
}
