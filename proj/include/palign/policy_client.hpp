#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace palign {

struct SamplingConfig {
  std::size_t num_samples = 10;  // k
  double temperature = 1.0;
  std::size_t max_response_tokens = 2048;
  std::uint64_t seed = 0;  // consumed by the mock backend only
};

void validate(const SamplingConfig& cfg);

enum class FinishReason { Stop, Length, Error };

std::string to_string(FinishReason reason);
FinishReason finish_reason_from_string(const std::string& name);

struct Candidate {
  std::string problem_id;
  std::string text;
  std::vector<double> token_logprobs;  // natural log, each <= 0
  FinishReason finish_reason = FinishReason::Stop;
};

struct RetryPolicy {
  std::size_t max_attempts = 3;
  std::uint64_t backoff_base_ms = 100;
  std::uint64_t backoff_cap_ms = 5000;
};

struct ClientPolicy {
  std::string endpoint_url;
  std::string model = "default";
  std::string api_key_env = "PALIGN_API_KEY";
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
  std::uint64_t timeout_ms = 30000;
};

void validate(const ClientPolicy& policy);

/// Exponential backoff before retry `attempt` (1-based): base * 2^(attempt-1),
/// capped. Nondecreasing in attempt by construction.
std::chrono::milliseconds backoff_delay(const RetryPolicy& retry, std::size_t attempt);

struct GenerationRequest {
  std::string prompt;
  SamplingConfig cfg;
  std::size_t request_index = 0;  // position within the k-candidate batch
};

/// One blocking operation against a serving backend. Implementations:
/// HttpTransport (OpenAI-compatible endpoints) and MockTransport (scripted).
class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws TransientError for retryable failures.
  virtual Candidate complete(const GenerationRequest& request) = 0;
  /// Teacher-forced per-token log-probabilities of `completion` given `prompt`.
  virtual std::vector<double> score(const std::string& prompt, const std::string& completion) = 0;
  virtual bool supports_scoring() const = 0;
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

/// Fans requests out across at most max_in_flight worker threads, retries each
/// request up to the budget with capped exponential backoff, and reassembles
/// results in request order.
class PolicyClient {
 public:
  PolicyClient(std::shared_ptr<Transport> transport, ClientPolicy policy, SleepFn sleep = {});
  ~PolicyClient();

  PolicyClient(const PolicyClient&) = delete;
  PolicyClient& operator=(const PolicyClient&) = delete;

  /// Returns exactly cfg.num_samples candidates in request order. Requests that
  /// exhaust their retry budget yield finish_reason=Error with empty text;
  /// if every request fails, throws BatchError with per-request causes.
  std::vector<Candidate> sample(const std::string& prompt, const SamplingConfig& cfg);

  /// Non-sampling scoring of a fixed completion. CapabilityError when the
  /// backend cannot score.
  std::vector<double> score_logprobs(const std::string& prompt, const std::string& completion);

  const ClientPolicy& policy() const { return policy_; }
  Transport& transport() { return *transport_; }

 private:
  void worker_loop();
  void submit(std::function<void()> task);

  std::shared_ptr<Transport> transport_;
  ClientPolicy policy_;
  SleepFn sleep_;

  std::mutex mutex_;
  std::condition_variable queue_cv_;
  std::deque<std::function<void()>> queue_;
  std::vector<std::thread> workers_;
  bool shutting_down_ = false;
};

}  // namespace palign
