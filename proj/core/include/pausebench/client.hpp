#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pausebench/error.hpp"
#include "pausebench/prompts.hpp"
#include "pausebench/util.hpp"

namespace pausebench {

class Tokenizer;

struct ModelProfile {
  std::string name;
  std::string base_url;            // e.g. "http://127.0.0.1:8000/v1"
  std::string api_key_env;         // empty: no auth header
  std::size_t max_context_tokens = 16000;
  double temperature = 0.0;
  int max_output_tokens = 256;
  std::string model_id;            // sent as "model"; defaults to name
  std::string system_prompt;       // prepended as a system message when set
  int timeout_ms = 120000;

  const std::string& wire_model() const { return model_id.empty() ? name : model_id; }
};

// Throws InvalidArgument when the profile breaks its invariants.
void validate(const ModelProfile& profile);

struct CompletionParams {
  std::optional<double> temperature;
  std::optional<int> max_tokens;
};

struct CompletionResult {
  std::string text;
  long latency_ms = 0;
  int attempt_count = 1;
  std::string request_fingerprint;
};

// Retries exhausted on 429/5xx/timeouts. status 0 means no HTTP response.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int status, int attempts)
      : Error(what), status_(status), attempts_(attempts) {}
  int status() const { return status_; }
  int attempts() const { return attempts_; }

 private:
  int status_;
  int attempts_;
};

// 4xx other than 429; never retried.
class PermanentError : public Error {
 public:
  PermanentError(const std::string& what, int status) : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct RetryPolicy {
  int max_attempts = 6;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  double jitter = 0.2;  // +/- fraction of the nominal delay
  // Replaceable so tests do not sleep.
  std::function<void(std::chrono::milliseconds)> sleep;
};

// Delay before retry number `retry` (1-based), jittered with `rng`.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry, Rng& rng);

// Counting limiter bounding calls in flight across threads.
class InflightLimiter {
 public:
  explicit InflightLimiter(std::size_t limit);

  void acquire();
  void release();
  std::size_t limit() const { return limit_; }
  std::size_t peak() const;

  class Guard {
   public:
    explicit Guard(InflightLimiter* limiter) : limiter_(limiter) {
      if (limiter_) limiter_->acquire();
    }
    ~Guard() {
      if (limiter_) limiter_->release();
    }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    InflightLimiter* limiter_;
  };

 private:
  const std::size_t limit_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
  std::size_t peak_ = 0;
};

// Serializes an OpenAI-compatible chat-completions request body.
// Deterministic for fixed inputs; never contains credentials.
std::string build_request_body(const ModelProfile& profile, const std::vector<Message>& messages,
                               const CompletionParams& params);

// Extracts choices[0].message.content; throws ParseError.
std::string parse_completion_body(const std::string& body);

// Shareable across threads; every call is independent.
class ChatClient {
 public:
  explicit ChatClient(RetryPolicy policy = {}, const Tokenizer* budget_tokenizer = nullptr);

  CompletionResult complete(const ModelProfile& profile, const std::vector<Message>& messages,
                            const CompletionParams& params = {}) const;

 private:
  RetryPolicy policy_;
  const Tokenizer* budget_tokenizer_;
  mutable std::mutex rng_mu_;
  mutable Rng jitter_rng_;
};

}  // namespace pausebench
