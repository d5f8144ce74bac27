#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "palign/policy_client.hpp"

namespace palign {

/// One scripted candidate. Absent logprobs are synthesized deterministically
/// from (prompt hash, candidate index) alone, so scoring a sampled text always
/// reproduces the sampled logprobs.
struct MockCandidateScript {
  std::string text;
  std::optional<std::vector<double>> logprobs;
  std::size_t fail_times = 0;  // first N attempts raise a transient failure
  FinishReason finish_reason = FinishReason::Stop;
};

/// Compact per-prompt script: candidate texts are synthesized, with the listed
/// indices carrying the gold answer in a final \boxed{}.
struct CompactScript {
  std::size_t k = 0;
  std::vector<std::size_t> correct_indices;
  std::string gold;
};

struct MockPromptScript {
  std::vector<MockCandidateScript> candidates;  // explicit form
  std::optional<CompactScript> compact;         // compact form
  bool always_fail = false;                     // every attempt raises a transient failure
};

enum class MockScoringMode { Candidates, Uniform, ProbOne, Bigram, Scripted, None };

struct MockScoring {
  MockScoringMode mode = MockScoringMode::Candidates;
  std::size_t vocab_size = 0;                     // Uniform
  std::map<std::string, double> bigram;           // Bigram: "prev next" -> prob, "<s>" starts
  // Scripted: keyed by (fnv(prompt), fnv(completion))
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::vector<double>> scripted;
};

/// Scripted fixture file for the deterministic mock backend, keyed by the
/// fnv1a64 hash of the exact prompt text.
struct MockFixture {
  std::unordered_map<std::uint64_t, MockPromptScript> prompts;
  MockScoring scoring;
  std::uint32_t latency_us_min = 0;
  std::uint32_t latency_us_max = 0;

  void add_prompt(const std::string& prompt, MockPromptScript script);
  void add_compact(const std::string& prompt, std::size_t k,
                   std::vector<std::size_t> correct_indices, std::string gold);

  nlohmann::json to_json() const;
  static MockFixture from_json(const nlohmann::json& doc);
  void save(const std::string& path) const;
  static MockFixture from_file(const std::string& path);
};

std::string synth_candidate_text(bool correct, std::size_t index, const std::string& gold);
std::vector<double> synth_logprobs(std::uint64_t prompt_hash, std::size_t index,
                                   std::size_t token_count);

/// Deterministic, instrumented in-process backend.
class MockTransport : public Transport {
 public:
  explicit MockTransport(MockFixture fixture);

  Candidate complete(const GenerationRequest& request) override;
  std::vector<double> score(const std::string& prompt, const std::string& completion) override;
  bool supports_scoring() const override;

  // instrumentation
  std::size_t max_in_flight_observed() const { return max_in_flight_observed_.load(); }
  std::size_t total_complete_calls() const { return total_complete_calls_.load(); }
  std::size_t attempts_for(std::uint64_t prompt_hash, std::size_t request_index) const;
  std::unordered_map<std::uint64_t, std::size_t> complete_calls_per_prompt() const;
  void reset_instrumentation();

 private:
  Candidate build_candidate(std::uint64_t prompt_hash, const MockPromptScript& script,
                            const GenerationRequest& request) const;
  void apply_latency();

  MockFixture fixture_;
  mutable std::mutex mutex_;
  std::unordered_map<std::uint64_t, std::size_t> attempts_;  // key: hash ^ mixed index
  std::unordered_map<std::uint64_t, std::size_t> calls_per_prompt_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_observed_{0};
  std::atomic<std::size_t> total_complete_calls_{0};
  std::atomic<std::uint64_t> latency_state_{0x9E3779B97F4A7C15ull};
};

}  // namespace palign
