#include "palign/policy_client.hpp"

#include "palign/errors.hpp"

#include <atomic>
#include <thread>

namespace palign {

void validate(const SamplingConfig& cfg) {
  if (cfg.num_samples < 1) throw ConfigError("sampling.num_samples must be >= 1");
  if (cfg.temperature < 0.0) throw ConfigError("sampling.temperature must be >= 0");
  if (cfg.max_response_tokens < 1) throw ConfigError("sampling.max_response_tokens must be >= 1");
}

void validate(const ClientPolicy& policy) {
  if (policy.max_in_flight < 1) throw ConfigError("endpoint.max_in_flight must be >= 1");
  if (policy.retry.max_attempts < 1) throw ConfigError("endpoint.retry.max_attempts must be >= 1");
}

std::string to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Error: return "error";
  }
  return "error";
}

FinishReason finish_reason_from_string(const std::string& name) {
  if (name == "stop") return FinishReason::Stop;
  if (name == "length") return FinishReason::Length;
  if (name == "error") return FinishReason::Error;
  throw ConfigError("unknown finish_reason: " + name);
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& retry, std::size_t attempt) {
  std::uint64_t delay = retry.backoff_base_ms;
  for (std::size_t i = 1; i < attempt && delay < retry.backoff_cap_ms; ++i) {
    delay *= 2;
  }
  return std::chrono::milliseconds(std::min(delay, retry.backoff_cap_ms));
}

PolicyClient::PolicyClient(std::shared_ptr<Transport> transport, ClientPolicy policy, SleepFn sleep)
    : transport_(std::move(transport)), policy_(std::move(policy)), sleep_(std::move(sleep)) {
  validate(policy_);
  if (!transport_) throw ConfigError("PolicyClient requires a transport");
  if (!sleep_) {
    sleep_ = [](std::chrono::milliseconds delay) { std::this_thread::sleep_for(delay); };
  }
  workers_.reserve(policy_.max_in_flight);
  for (std::size_t i = 0; i < policy_.max_in_flight; ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

PolicyClient::~PolicyClient() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    shutting_down_ = true;
  }
  queue_cv_.notify_all();
  for (auto& worker : workers_) {
    if (worker.joinable()) worker.join();
  }
}

void PolicyClient::worker_loop() {
  for (;;) {
    std::function<void()> task;
    {
      std::unique_lock<std::mutex> lock(mutex_);
      queue_cv_.wait(lock, [this] { return shutting_down_ || !queue_.empty(); });
      if (queue_.empty()) {
        if (shutting_down_) return;
        continue;
      }
      task = std::move(queue_.front());
      queue_.pop_front();
    }
    task();
  }
}

void PolicyClient::submit(std::function<void()> task) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    queue_.push_back(std::move(task));
  }
  queue_cv_.notify_one();
}

std::vector<Candidate> PolicyClient::sample(const std::string& prompt, const SamplingConfig& cfg) {
  validate(cfg);
  const std::size_t k = cfg.num_samples;
  std::vector<Candidate> results(k);
  std::vector<std::string> causes(k);
  std::atomic<std::size_t> pending{k};
  std::atomic<std::size_t> failed{0};
  std::mutex done_mutex;
  std::condition_variable done_cv;

  for (std::size_t i = 0; i < k; ++i) {
    submit([&, i] {
      GenerationRequest request{prompt, cfg, i};
      std::string last_cause;
      bool ok = false;
      for (std::size_t attempt = 1; attempt <= policy_.retry.max_attempts; ++attempt) {
        try {
          results[i] = transport_->complete(request);
          ok = true;
          break;
        } catch (const TransientError& error) {
          last_cause = error.what();
          if (attempt < policy_.retry.max_attempts) {
            sleep_(backoff_delay(policy_.retry, attempt));
          }
        } catch (const std::exception& error) {
          last_cause = error.what();
          break;  // non-transient: do not burn the retry budget
        }
      }
      if (!ok) {
        results[i] = Candidate{"", "", {}, FinishReason::Error};
        causes[i] = last_cause;
        failed.fetch_add(1);
      }
      if (pending.fetch_sub(1) == 1) {
        std::lock_guard<std::mutex> lock(done_mutex);
        done_cv.notify_all();
      }
    });
  }

  {
    std::unique_lock<std::mutex> lock(done_mutex);
    done_cv.wait(lock, [&] { return pending.load() == 0; });
  }

  if (failed.load() == k) {
    std::vector<std::string> nonempty;
    for (auto& cause : causes) {
      if (!cause.empty()) nonempty.push_back(cause);
    }
    throw BatchError("all " + std::to_string(k) + " generation requests failed", nonempty);
  }
  return results;
}

std::vector<double> PolicyClient::score_logprobs(const std::string& prompt,
                                                 const std::string& completion) {
  if (completion.empty()) throw ConfigError("score_logprobs requires a nonempty completion");
  if (!transport_->supports_scoring()) {
    throw CapabilityError(
        "endpoint lacks teacher-forced scoring support; use the mock backend or a "
        "score-capable endpoint");
  }
  std::string last_cause;
  for (std::size_t attempt = 1; attempt <= policy_.retry.max_attempts; ++attempt) {
    try {
      return transport_->score(prompt, completion);
    } catch (const TransientError& error) {
      last_cause = error.what();
      if (attempt < policy_.retry.max_attempts) {
        sleep_(backoff_delay(policy_.retry, attempt));
      }
    }
  }
  throw TransientError("scoring failed after " + std::to_string(policy_.retry.max_attempts) +
                       " attempts: " + last_cause);
}

}  // namespace palign
