#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "palign/corpus.hpp"
#include "palign/mock_backend.hpp"
#include "palign/policy_client.hpp"
#include "palign/records.hpp"
#include "palign/util.hpp"

namespace palign::testing {

// Pin the output timestamp so byte-identity assertions hold across runs.
struct PinClock {
  PinClock() { ::setenv("SOURCE_DATE_EPOCH", "1700000000", 0); }
};
inline PinClock pin_clock_instance;

class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    static std::atomic<unsigned> counter{0};
    path_ = base / ("palign_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string dir() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

inline Problem make_problem(const std::string& id, const std::string& statement,
                            const std::string& solution, const std::string& gold) {
  return Problem{id, statement, solution, gold};
}

inline void write_corpus_file(const std::vector<Problem>& problems, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& p : problems) {
    nlohmann::json record{{"id", p.id},
                          {"statement", p.statement},
                          {"expert_solution", p.expert_solution},
                          {"gold_answer", p.gold_answer}};
    out << record.dump() << '\n';
  }
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Explicit mock candidate whose text ends in \boxed{answer}.
inline MockCandidateScript boxed_candidate(const std::string& answer, std::size_t fail_times = 0) {
  MockCandidateScript candidate;
  candidate.text = "Reasoning follows. The final answer is \\boxed{" + answer + "}.";
  candidate.fail_times = fail_times;
  return candidate;
}

// A prompt script with k candidates where exactly the listed indices are
// boxed with `gold` and the rest carry a wrong answer.
inline MockPromptScript script_with_correct(std::size_t k, const std::vector<std::size_t>& correct,
                                            const std::string& gold) {
  MockPromptScript script;
  for (std::size_t i = 0; i < k; ++i) {
    const bool is_correct =
        std::find(correct.begin(), correct.end(), i) != correct.end();
    script.candidates.push_back(boxed_candidate(is_correct ? gold : "wrong-" + std::to_string(i)));
  }
  return script;
}

}  // namespace palign::testing
