#include "pausebench/client.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "pausebench/token.hpp"

namespace pausebench {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // .../chat/completions
};

Endpoint split_base_url(const std::string& base_url) {
  const std::size_t scheme = base_url.find("://");
  if (scheme == std::string::npos) throw InvalidArgument("base_url needs a scheme: " + base_url);
  const std::size_t slash = base_url.find('/', scheme + 3);
  Endpoint e;
  e.origin = base_url.substr(0, slash);
  std::string prefix = slash == std::string::npos ? "" : base_url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  e.path = prefix + "/chat/completions";
  return e;
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

void validate(const ModelProfile& p) {
  if (p.name.empty()) throw InvalidArgument("model profile needs a name");
  if (p.base_url.empty()) throw InvalidArgument("model profile " + p.name + " needs a base_url");
  if (p.max_context_tokens < 1024) {
    throw InvalidArgument("model profile " + p.name + ": max_context_tokens must be >= 1024");
  }
  if (!(p.temperature >= 0.0)) throw InvalidArgument("model profile " + p.name + ": temperature must be >= 0");
  if (p.max_output_tokens <= 0) {
    throw InvalidArgument("model profile " + p.name + ": max_output_tokens must be positive");
  }
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry, Rng& rng) {
  const double nominal =
      static_cast<double>(policy.base_delay.count()) * std::pow(policy.factor, retry - 1);
  const double scale = 1.0 + policy.jitter * (2.0 * rng.uniform01() - 1.0);
  return std::chrono::milliseconds(static_cast<long long>(std::llround(nominal * scale)));
}

InflightLimiter::InflightLimiter(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}

void InflightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < limit_; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
}

void InflightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::size_t InflightLimiter::peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

std::string build_request_body(const ModelProfile& profile, const std::vector<Message>& messages,
                               const CompletionParams& params) {
  nlohmann::ordered_json body;
  body["model"] = profile.wire_model();
  nlohmann::ordered_json msgs = nlohmann::ordered_json::array();
  for (const Message& m : messages) {
    msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  body["messages"] = std::move(msgs);
  body["temperature"] = params.temperature.value_or(profile.temperature);
  body["max_tokens"] = params.max_tokens.value_or(profile.max_output_tokens);
  return body.dump();
}

std::string parse_completion_body(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return {};
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed completion response: ") + e.what());
  }
}

ChatClient::ChatClient(RetryPolicy policy, const Tokenizer* budget_tokenizer)
    : policy_(std::move(policy)),
      budget_tokenizer_(budget_tokenizer),
      jitter_rng_(std::random_device{}()) {
  if (policy_.max_attempts < 1) policy_.max_attempts = 1;
  if (!policy_.sleep) {
    policy_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

CompletionResult ChatClient::complete(const ModelProfile& profile, const std::vector<Message>& messages,
                                      const CompletionParams& params) const {
  if (messages.empty()) throw InvalidArgument("complete() needs at least one message");

  if (budget_tokenizer_) {
    std::size_t tokens = 0;
    for (const Message& m : messages) tokens += budget_tokenizer_->count_tokens(m.content);
    if (tokens > profile.max_context_tokens) {
      spdlog::warn("prompt for {} has ~{} tokens, above its {}-token context", profile.name, tokens,
                   profile.max_context_tokens);
    }
  }

  const Endpoint endpoint = split_base_url(profile.base_url);
  const std::string body = build_request_body(profile, messages, params);

  httplib::Headers headers;
  if (!profile.api_key_env.empty()) {
    const char* key = std::getenv(profile.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw InvalidArgument("environment variable " + profile.api_key_env + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  CompletionResult result;
  result.request_fingerprint = sha256_hex(profile.base_url + "\n" + body);
  const auto started = std::chrono::steady_clock::now();

  int last_status = 0;
  std::string last_error;
  for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::chrono::milliseconds delay;
      {
        std::lock_guard lock(rng_mu_);
        delay = backoff_delay(policy_, attempt - 1, jitter_rng_);
      }
      policy_.sleep(delay);
    }
    result.attempt_count = attempt;

    httplib::Result res;
    {
      httplib::Client http(endpoint.origin);
      const auto timeout = std::chrono::milliseconds(profile.timeout_ms);
      http.set_connection_timeout(timeout);
      http.set_read_timeout(timeout);
      http.set_write_timeout(timeout);
      res = http.Post(endpoint.path, headers, body, "application/json");
    }

    if (!res) {
      last_status = 0;
      last_error = httplib::to_string(res.error());
      spdlog::debug("{}: attempt {} failed: {}", profile.name, attempt, last_error);
      continue;
    }
    if (res->status == 200) {
      result.text = parse_completion_body(res->body);
      result.latency_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                std::chrono::steady_clock::now() - started)
                                                .count());
      return result;
    }
    last_status = res->status;
    last_error = res->body.substr(0, 200);
    if (!retryable(res->status)) {
      throw PermanentError(profile.name + ": HTTP " + std::to_string(res->status) + ": " + last_error,
                           res->status);
    }
    spdlog::debug("{}: attempt {} got HTTP {}", profile.name, attempt, res->status);
  }
  throw TransportError(profile.name + ": giving up after " + std::to_string(policy_.max_attempts) +
                           " attempts (last status " + std::to_string(last_status) + ": " + last_error + ")",
                       last_status, policy_.max_attempts);
}

}  // namespace pausebench
