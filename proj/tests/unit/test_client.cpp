#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include "pausebench/client.hpp"
#include "pausebench/error.hpp"
#include "stub_server.hpp"

using namespace pausebench;
using testsupport::StubReply;
using testsupport::StubServer;
using testsupport::completion_body;

namespace {

ModelProfile profile_for(const StubServer& server) {
  ModelProfile p;
  p.name = "stub";
  p.base_url = server.base_url();
  p.timeout_ms = 5000;
  return p;
}

RetryPolicy recording_policy(std::vector<std::chrono::milliseconds>* sleeps) {
  RetryPolicy policy;
  policy.sleep = [sleeps](std::chrono::milliseconds d) { sleeps->push_back(d); };
  return policy;
}

const std::vector<Message> kHello{{Role::user, "hello"}};

}  // namespace

TEST(Client, RequestBodyIsDeterministic) {
  ModelProfile p;
  p.name = "gpt-x";
  p.base_url = "http://x";
  p.max_output_tokens = 64;
  const std::string body = build_request_body(p, {{Role::system, "s"}, {Role::user, "u"}}, {});
  EXPECT_EQ(body,
            R"({"model":"gpt-x","messages":[{"role":"system","content":"s"},{"role":"user","content":"u"}],)"
            R"("temperature":0.0,"max_tokens":64})");
  EXPECT_EQ(body, build_request_body(p, {{Role::system, "s"}, {Role::user, "u"}}, {}));
  p.model_id = "wire-name";
  CompletionParams params;
  params.max_tokens = 8;
  EXPECT_NE(build_request_body(p, kHello, params).find(R"("model":"wire-name")"), std::string::npos);
  EXPECT_NE(build_request_body(p, kHello, params).find(R"("max_tokens":8)"), std::string::npos);
}

TEST(Client, ParseCompletionBody) {
  EXPECT_EQ(parse_completion_body(completion_body("hi")), "hi");
  EXPECT_THROW(parse_completion_body("{}"), ParseError);
  EXPECT_THROW(parse_completion_body("not json"), ParseError);
}

TEST(Client, ValidateProfile) {
  ModelProfile p;
  p.name = "m";
  p.base_url = "http://x";
  EXPECT_NO_THROW(validate(p));
  p.max_context_tokens = 512;
  EXPECT_THROW(validate(p), InvalidArgument);
  p.max_context_tokens = 4096;
  p.temperature = -0.1;
  EXPECT_THROW(validate(p), InvalidArgument);
  p.temperature = 0;
  p.base_url.clear();
  EXPECT_THROW(validate(p), InvalidArgument);
}

TEST(Client, BackoffSchedule) {
  RetryPolicy policy;
  Rng rng(1);
  for (int retry = 1; retry <= 5; ++retry) {
    const double nominal = 1000.0 * (1 << (retry - 1));
    for (int k = 0; k < 50; ++k) {
      const auto d = static_cast<double>(backoff_delay(policy, retry, rng).count());
      EXPECT_GE(d, nominal * 0.8 - 1);
      EXPECT_LE(d, nominal * 1.2 + 1);
    }
  }
}

TEST(Client, SuccessfulCall) {
  StubServer server([](const nlohmann::json& req, int) {
    return StubReply{200, completion_body("echo:" + testsupport::user_content(req))};
  });
  ChatClient client;
  const CompletionResult r = client.complete(profile_for(server), kHello);
  EXPECT_EQ(r.text, "echo:hello");
  EXPECT_EQ(r.attempt_count, 1);
  EXPECT_EQ(r.request_fingerprint.size(), 64u);
  ASSERT_EQ(server.request_count(), 1);
  EXPECT_EQ(server.requests()[0]["temperature"], 0.0);
  EXPECT_EQ(server.auth_headers()[0], "");
}

TEST(Client, RetriesThenSucceeds) {
  StubServer server([](const nlohmann::json&, int i) {
    if (i == 0) return StubReply{429, "slow down"};
    if (i == 1) return StubReply{503, "busy"};
    return StubReply{200, completion_body("ok")};
  });
  std::vector<std::chrono::milliseconds> sleeps;
  ChatClient client(recording_policy(&sleeps));
  const CompletionResult r = client.complete(profile_for(server), kHello);
  EXPECT_EQ(r.text, "ok");
  EXPECT_EQ(r.attempt_count, 3);
  ASSERT_EQ(sleeps.size(), 2u);
  EXPECT_NEAR(sleeps[0].count(), 1000, 200);
  EXPECT_NEAR(sleeps[1].count(), 2000, 400);
}

TEST(Client, GivesUpAfterSixAttempts) {
  StubServer server([](const nlohmann::json&, int) { return StubReply{500, "boom"}; });
  std::vector<std::chrono::milliseconds> sleeps;
  ChatClient client(recording_policy(&sleeps));
  try {
    client.complete(profile_for(server), kHello);
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 500);
    EXPECT_EQ(e.attempts(), 6);
  }
  EXPECT_EQ(server.request_count(), 6);
  EXPECT_EQ(sleeps.size(), 5u);
}

TEST(Client, ClientErrorIsPermanent) {
  StubServer server([](const nlohmann::json&, int) { return StubReply{400, "bad request"}; });
  std::vector<std::chrono::milliseconds> sleeps;
  ChatClient client(recording_policy(&sleeps));
  EXPECT_THROW(client.complete(profile_for(server), kHello), PermanentError);
  EXPECT_EQ(server.request_count(), 1);
  EXPECT_TRUE(sleeps.empty());
}

TEST(Client, TimeoutIsRetried) {
  StubServer server([](const nlohmann::json&, int i) {
    if (i == 0) return StubReply{200, completion_body("late"), 1500};
    return StubReply{200, completion_body("fast")};
  });
  std::vector<std::chrono::milliseconds> sleeps;
  ChatClient client(recording_policy(&sleeps));
  ModelProfile p = profile_for(server);
  p.timeout_ms = 300;
  const CompletionResult r = client.complete(p, kHello);
  EXPECT_EQ(r.text, "fast");
  EXPECT_EQ(r.attempt_count, 2);
}

TEST(Client, ConnectionRefusedExhaustsRetries) {
  ModelProfile p;
  {
    StubServer server([](const nlohmann::json&, int) { return StubReply{}; });
    p = profile_for(server);
  }
  std::vector<std::chrono::milliseconds> sleeps;
  RetryPolicy policy = recording_policy(&sleeps);
  policy.max_attempts = 2;
  ChatClient client(policy);
  try {
    client.complete(p, kHello);
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 0);
  }
}

TEST(Client, ApiKeyFromEnvironment) {
  StubServer server([](const nlohmann::json&, int) { return StubReply{200, completion_body("ok")}; });
  ModelProfile p = profile_for(server);
  p.api_key_env = "PAUSEBENCH_TEST_KEY_UNSET_XYZ";
  ::unsetenv(p.api_key_env.c_str());
  ChatClient client;
  EXPECT_THROW(client.complete(p, kHello), InvalidArgument);
  ::setenv("PAUSEBENCH_TEST_KEY", "sk-test", 1);
  p.api_key_env = "PAUSEBENCH_TEST_KEY";
  client.complete(p, kHello);
  EXPECT_EQ(server.auth_headers().back(), "Bearer sk-test");
  // The key never lands in the body.
  EXPECT_EQ(server.requests().back().dump().find("sk-test"), std::string::npos);
}

TEST(Client, InflightLimiterBoundsConcurrency) {
  InflightLimiter limiter(2);
  std::atomic<int> active{0}, worst{0};
  std::vector<std::jthread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      InflightLimiter::Guard guard(&limiter);
      const int now = ++active;
      int seen = worst.load();
      while (now > seen && !worst.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
      --active;
    });
  }
  threads.clear();
  EXPECT_LE(worst.load(), 2);
  EXPECT_LE(limiter.peak(), 2u);
  EXPECT_GE(limiter.peak(), 1u);
}
