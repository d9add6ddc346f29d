// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include "cliqueparcel/backend.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <unistd.h>

#include "cliqueparcel/text.hpp"
#include "test_util.hpp"

namespace backend = cliqueparcel::backend;
namespace data = cliqueparcel::data;
namespace text = cliqueparcel::text;
using cliqueparcel::Errc;
using cliqueparcel::Error;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cliqueparcel_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove(p);
  return p;
}

data::Workload small_workload(std::size_t m, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  return cptest::random_workload(rng, m);
}

// Answers batched prompts but leaves out one item.
class DroppingBackend : public backend::CompletionBackend {
 public:
  DroppingBackend(std::shared_ptr<const backend::ScriptedAnswers> answers, std::size_t drop)
      : answers_(std::move(answers)), drop_(drop) {}

  backend::CompletionResult complete(std::string_view prompt) override {
    ++calls;
    backend::CompletionResult r;
    r.backend_id = id();
    r.input_tokens = text::tokenize_count(prompt);
    if (auto direct = answers_->lookup(prompt)) {
      r.text = *direct;
    } else {
      const auto members = answers_->split_batch(prompt).value();
      for (std::size_t k = 1; k <= members.size(); ++k) {
        if (k == drop_) continue;
        r.text += std::to_string(k) + ". " + *answers_->lookup(members[k - 1]) + "\n";
      }
    }
    r.output_tokens = text::tokenize_count(r.text);
    r.latency_seconds = 1.0;
    return r;
  }
  std::string id() const override { return "dropping"; }

  int calls = 0;

 private:
  std::shared_ptr<const backend::ScriptedAnswers> answers_;
  std::size_t drop_;
};

}  // namespace

TEST(CostModel, DirectSubstitution) {
  const backend::CostModelParams p;
  EXPECT_NEAR(p.latency(100, 40), 2.6, 1e-12);
  EXPECT_NEAR(p.latency(100, 0), 0.6, 1e-12);
  EXPECT_TRUE(p.output_dominates());
  EXPECT_THROW(backend::validate(backend::CostModelParams{0.0, 0.001, 0.05}), Error);
  EXPECT_THROW(backend::validate(backend::CostModelParams{0.5, -1.0, 0.05}), Error);
}

TEST(Simulate, DirectAndBatch) {
  backend::ScriptedAnswers answers;
  answers.add("What is copper?", "A metal.");
  answers.add("Who rows back?", "The losing crew.");
  backend::SimClock clock;
  const backend::CostModelParams p;
  const auto single = backend::simulate_complete(p, "What is copper?", answers, clock);
  EXPECT_EQ(single.text, "A metal.");
  EXPECT_EQ(single.input_tokens, 4u);
  EXPECT_EQ(single.output_tokens, 3u);
  EXPECT_DOUBLE_EQ(single.latency_seconds, p.latency(4, 3));
  EXPECT_DOUBLE_EQ(clock.now(), single.latency_seconds);

  const std::vector<std::string> texts{"What is copper?", "Who rows back?"};
  const auto prompt = cliqueparcel::batch::build_batch(texts).text;
  const auto batched = backend::simulate_complete(p, prompt, answers, clock);
  EXPECT_EQ(batched.text, "1. A metal.\n2. The losing crew.");
  EXPECT_EQ(batched.input_tokens, text::tokenize_count(prompt));
  EXPECT_EQ(batched.output_tokens, text::tokenize_count(batched.text));
  EXPECT_DOUBLE_EQ(batched.latency_seconds, p.latency(batched.input_tokens, batched.output_tokens));

  backend::SimClock zero_clock;
  const auto zero = backend::simulate_complete(p, prompt, answers, zero_clock, {1.0, backend::OverheadMode::kZero});
  EXPECT_EQ(zero.input_tokens, 4u + 4u);
  EXPECT_EQ(zero.output_tokens, 3u + 4u);
}

TEST(Simulate, UnknownPrompt) {
  backend::ScriptedAnswers answers;
  answers.add("known", "yes");
  backend::SimClock clock;
  try {
    backend::simulate_complete({}, "unknown", answers, clock);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownPrompt);
  }
  const std::vector<std::string> texts{"known", "stranger"};
  EXPECT_THROW(backend::simulate_complete({}, cliqueparcel::batch::build_batch(texts).text, answers, clock), Error);
}

TEST(Simulate, DiscountTruncatesBatchedAnswersOnly) {
  backend::ScriptedAnswers answers;
  answers.add("q1", "one two three four five six seven eight nine ten");
  answers.add("q2", "alpha beta gamma delta");
  backend::SimClock clock;
  const backend::SimulationOptions half{0.5, backend::OverheadMode::kZero};
  EXPECT_EQ(backend::simulate_complete({}, "q1", answers, clock, half).output_tokens, 10u);
  const std::vector<std::string> texts{"q1", "q2"};
  const auto r = backend::simulate_complete({}, cliqueparcel::batch::build_batch(texts).text, answers, clock, half);
  EXPECT_EQ(r.text, "1. one two three four five\n2. alpha beta");
  EXPECT_EQ(r.output_tokens, 7u);
}

TEST(Simulate, SplitBatchHandlesPrefixTexts) {
  backend::ScriptedAnswers answers;
  answers.add("Why", "a");
  answers.add("Why 2. not", "b");
  answers.add("not", "c");
  const std::vector<std::string> texts{"Why 2. not", "not"};
  const auto members = answers.split_batch(cliqueparcel::batch::build_batch(texts).text);
  ASSERT_TRUE(members);
  EXPECT_EQ(*members, texts);
}

TEST(Simulate, DeterministicAcrossThreads) {
  const auto w = small_workload(40);
  auto answers = std::make_shared<const backend::ScriptedAnswers>(backend::ScriptedAnswers::from_workload(w));
  backend::SimulatedBackend sim({}, answers);
  std::vector<backend::CompletionResult> serial;
  for (const auto& p : w.prompts) serial.push_back(sim.complete(p.text));
  std::vector<backend::CompletionResult> parallel(w.size());
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = static_cast<std::size_t>(t); i < w.size(); i += 4) parallel[i] = sim.complete(w.prompts[i].text);
    });
  }
  for (auto& t : pool) t.join();
  EXPECT_EQ(serial, parallel);
}

TEST(Simulate, BadDiscountRejected) {
  auto answers = std::make_shared<const backend::ScriptedAnswers>();
  EXPECT_THROW(backend::SimulatedBackend({}, answers, {0.0, backend::OverheadMode::kCounted}), Error);
  EXPECT_THROW(backend::SimulatedBackend({}, answers, {1.5, backend::OverheadMode::kCounted}), Error);
}

TEST(ScriptedAnswers, FromWorkload) {
  auto w = data::parse_dataset(
      R"({"id":"a","question":"Capital?","answer":"Oslo"})"
      "\n"
      R"({"id":"b","question":"Pick","choices":["red","blue"],"answer":"B"})"
      "\n"
      R"({"id":"c","question":"Open?"})");
  const auto answers = backend::ScriptedAnswers::from_workload(w);
  EXPECT_EQ(answers.lookup("Capital?"), "The answer to \"Capital?\" is Oslo.");
  EXPECT_EQ(answers.lookup("Pick"), "The answer to \"Pick\" is B) blue.");
  EXPECT_EQ(answers.lookup("Open?"), "Regarding \"Open?\": no reference answer is available.");
}

TEST(ScriptedAnswers, FromFile) {
  const auto w = small_workload(3);
  const auto path = temp_file("answers.jsonl");
  {
    std::ofstream out(path);
    out << R"({"id":"p1","answer":"custom"})" << "\n";
  }
  const auto answers = backend::ScriptedAnswers::from_file(w, path);
  EXPECT_EQ(answers.lookup(w.prompts[1].text), "custom");
  {
    std::ofstream out(path);
    out << R"({"id":"nope","answer":"x"})" << "\n";
  }
  EXPECT_THROW(backend::ScriptedAnswers::from_file(w, path), Error);
  std::filesystem::remove(path);
}

TEST(RunGroup, SingletonMatchesDirectCompletion) {
  const auto w = small_workload(3);
  auto answers = std::make_shared<const backend::ScriptedAnswers>(backend::ScriptedAnswers::from_workload(w));
  backend::SimulatedBackend sim({}, answers);
  const auto out = backend::run_group(sim, std::span(w.prompts).subspan(0, 1));
  ASSERT_EQ(out.calls.size(), 1u);
  EXPECT_FALSE(out.batched);
  EXPECT_EQ(out.calls[0], sim.complete(w.prompts[0].text));
  EXPECT_EQ(out.answers[0], out.calls[0].text);
}

TEST(RunGroup, EchoBatchOfFour) {
  const auto w = small_workload(4);
  auto answers = std::make_shared<const backend::ScriptedAnswers>(backend::ScriptedAnswers::from_workload(w));
  backend::SimulatedBackend sim({}, answers);
  const auto out = backend::run_group(sim, w.prompts);
  EXPECT_EQ(out.calls.size(), 1u);
  EXPECT_TRUE(out.parse->complete);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out.answers[i], answers->lookup(w.prompts[i].text));
}

TEST(RunGroup, FallbackReissuesMissingItem) {
  const auto w = small_workload(4);
  auto answers = std::make_shared<const backend::ScriptedAnswers>(backend::ScriptedAnswers::from_workload(w));
  DroppingBackend dropping(answers, 3);
  const auto out = backend::run_group(dropping, w.prompts, {true});
  EXPECT_EQ(dropping.calls, 2);
  EXPECT_EQ(out.calls.size(), 2u);
  EXPECT_TRUE(out.parse_failed);
  EXPECT_TRUE(out.from_fallback[2]);
  EXPECT_EQ(out.answers[2], answers->lookup(w.prompts[2].text));
  EXPECT_EQ(out.input_tokens(), out.calls[0].input_tokens + out.calls[1].input_tokens);
  EXPECT_EQ(out.output_tokens(), out.calls[0].output_tokens + out.calls[1].output_tokens);
}

TEST(RunGroup, DispatchIncompleteWithoutFallback) {
  const auto w = small_workload(4);
  auto answers = std::make_shared<const backend::ScriptedAnswers>(backend::ScriptedAnswers::from_workload(w));
  DroppingBackend dropping(answers, 3);
  try {
    backend::run_group(dropping, w.prompts);
    FAIL();
  } catch (const backend::DispatchIncomplete& e) {
    EXPECT_EQ(e.code(), Errc::kDispatchIncomplete);
    EXPECT_EQ(e.outcome().missing, std::vector<std::size_t>{3});
    EXPECT_TRUE(e.outcome().answered[0]);
    EXPECT_FALSE(e.outcome().answered[2]);
  }
}

TEST(RunGroup, FlagsAnchorLikePrompts) {
  auto w = small_workload(2);
  w.prompts[0].text = "Steps:\n1. mix";
  backend::ScriptedAnswers answers;
  answers.add(w.prompts[0], "stir");
  answers.add(w.prompts[1], "bake");
  backend::SimulatedBackend sim({}, std::make_shared<const backend::ScriptedAnswers>(answers));
  const auto out = backend::run_group(sim, w.prompts);
  EXPECT_TRUE(out.anchor_like_prompt);
}

TEST(Throttle, NeverExceedsLimit) {
  class Slow : public backend::CompletionBackend {
   public:
    backend::CompletionResult complete(std::string_view) override {
      const int now = ++active;
      int seen = peak.load();
      while (now > seen && !peak.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
      --active;
      return {"ok", 1, 1, 0.1, "slow"};
    }
    std::string id() const override { return "slow"; }
    std::atomic<int> active{0};
    std::atomic<int> peak{0};
  };
  auto slow = std::make_shared<Slow>();
  backend::ThrottledBackend throttled(slow, 3);
  std::vector<std::thread> pool;
  for (int t = 0; t < 8; ++t) {
    pool.emplace_back([&] {
      for (int i = 0; i < 10; ++i) throttled.complete("x");
    });
  }
  for (auto& t : pool) t.join();
  EXPECT_LE(slow->peak.load(), 3);
  EXPECT_GE(slow->peak.load(), 1);
}

TEST(ReplayCache, RecordThenReplay) {
  const auto path = temp_file("cache.jsonl");
  auto cache = std::make_shared<backend::ReplayCache>(path);
  EXPECT_EQ(cache->size(), 0u);
  const backend::CompletionResult r{"Paris", 12, 3, 0.75, "http:m"};
  cache->record("m", "Capital of France?", r);

  auto reloaded = std::make_shared<const backend::ReplayCache>(path);
  EXPECT_EQ(reloaded->size(), 1u);
  backend::ReplayBackend replay(reloaded, "m");
  const auto a = replay.complete("Capital of France?");
  EXPECT_EQ(a, replay.complete("Capital of France?"));
  EXPECT_EQ(a.text, "Paris");
  EXPECT_EQ(a.input_tokens, 12u);
  EXPECT_EQ(a.output_tokens, 3u);
  EXPECT_DOUBLE_EQ(a.latency_seconds, 0.75);

  try {
    replay.complete("Capital of Spain?");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kCacheMiss);
  }
  backend::ReplayBackend other_model(reloaded, "n");
  EXPECT_THROW(other_model.complete("Capital of France?"), Error);
  std::filesystem::remove(path);
}

TEST(ReplayCache, KeyIsModelAndPromptHash) {
  EXPECT_EQ(backend::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(backend::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(backend::ReplayCache::key_for("m", "p"), backend::sha256_hex("m\n" + backend::sha256_hex("p")));
}

TEST(ReplayCache, MalformedLine) {
  const auto path = temp_file("bad_cache.jsonl");
  {
    std::ofstream out(path);
    out << "{\"key_hash\": 1}\n";
  }
  try {
    backend::ReplayCache cache(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kParseError);
    EXPECT_EQ(e.detail(), 1);
  }
  std::filesystem::remove(path);
}

TEST(ReplayCache, ConcurrentRecordAndLookup) {
  const auto path = temp_file("concurrent.jsonl");
  auto cache = std::make_shared<backend::ReplayCache>(path);
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t) {
    pool.emplace_back([&, t] {
      for (int i = 0; i < 25; ++i) {
        const auto prompt = "t" + std::to_string(t) + "-" + std::to_string(i);
        cache->record("m", prompt, {prompt, 1, 1, 0.1, "x"});
        EXPECT_TRUE(cache->lookup("m", prompt));
      }
    });
  }
  for (auto& t : pool) t.join();
  EXPECT_EQ(backend::ReplayCache(path).size(), 100u);
  std::filesystem::remove(path);
}

TEST(MakeBackend, ConfigValidation) {
  backend::BackendConfig c;
  c.kind = backend::BackendKind::kReplay;
  EXPECT_THROW(backend::make_backend(c), Error);
  c.kind = backend::BackendKind::kHttp;
  EXPECT_THROW(backend::make_backend(c), Error);
  c.kind = backend::BackendKind::kSimulated;
  EXPECT_THROW(backend::make_backend(c), Error);  // no scripted answers
  c.max_in_flight = 0;
  EXPECT_THROW(backend::validate(c), Error);
  EXPECT_EQ(backend::parse_kind("Replay"), backend::BackendKind::kReplay);
  EXPECT_THROW(backend::parse_kind("grpc"), Error);
}

TEST(MakeBackend, SimulatedDelegates) {
  backend::BackendConfig c;
  backend::BackendResources res;
  auto answers = std::make_shared<backend::ScriptedAnswers>();
  answers->add("hello there", "general");
  res.answers = answers;
  const auto r = backend::complete(c, "hello there", res);
  backend::SimClock clock;
  EXPECT_EQ(r, backend::simulate_complete({}, "hello there", *answers, clock));
  EXPECT_THROW(backend::complete(c, "", res), Error);
}
