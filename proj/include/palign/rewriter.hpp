#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "palign/corpus.hpp"
#include "palign/policy_client.hpp"
#include "palign/verifier.hpp"

namespace palign {

/// Prompt used by the guided stage: shows the reference solution and asks the
/// model to re-solve in its own words. Treated as data, not code.
struct RetellPromptTemplate {
  std::string text;
  std::string name = "custom";
  std::string version = "0";

  static RetellPromptTemplate builtin();
  static RetellPromptTemplate from_file(const std::string& path);

  /// ConfigError unless {statement} and {reference_solution} each appear exactly once.
  void validate() const;
  std::string render(const Problem& problem) const;
};

/// Renders the training-side prompt; the template must contain {statement}.
std::string render_problem_prompt(const Problem& problem, const std::string& prompt_template);

/// Per-problem audit record, one ledger line per completed problem.
struct StageOutcome {
  std::string problem_id;
  Provenance stage_reached = Provenance::Expert;
  std::size_t self_correct_count = 0;
  std::size_t retell_correct_count = 0;
  std::uint64_t rng_draw = 0;
  bool error_fallback = false;  // fell back because the endpoint failed, not because wrong

  bool operator==(const StageOutcome&) const = default;
};

nlohmann::json outcome_to_json(const StageOutcome& outcome);
StageOutcome outcome_from_json(const nlohmann::json& record);

struct RewriteOptions {
  SamplingConfig sampling;
  RetellPromptTemplate retell_template = RetellPromptTemplate::builtin();
  std::string problem_prompt_template = "{statement}";
  std::uint64_t seed = 0;
  VerifierOptions verifier;
  std::string checkpoint_path;  // empty disables checkpointing
  std::size_t stop_after = 0;   // stop once this many problems are complete (0 = all)
  std::string config_digest;
  std::function<void(const std::string&)> log;  // defaults to stderr
};

struct StageAttempt {
  std::optional<RewrittenExample> example;
  std::size_t correct_count = 0;
  std::uint64_t rng_draw = 0;
};

/// Stage 1: sample k candidates on the bare problem prompt, verify each, and
/// uniformly retain one correct candidate.
StageAttempt self_align(const Problem& problem, PolicyClient& client,
                        const RewriteOptions& options);

/// Stage 2: sample k digest-and-retell candidates on the rendered template.
/// The stored prompt is the ORIGINAL problem prompt — training must not
/// condition on the reference solution.
StageAttempt guided_align(const Problem& problem, PolicyClient& client,
                          const RewriteOptions& options);

struct RewriteResult {
  MixtureDataset dataset;
  std::vector<StageOutcome> outcomes;
  std::size_t resumed_problems = 0;
  bool stopped_early = false;
};

/// Routes every problem through self-align -> guided-align -> expert fallback,
/// checkpointing one ledger line per completed problem so interrupted runs
/// resume without resampling.
RewriteResult rewrite_corpus(const std::vector<Problem>& problems, PolicyClient& client,
                             const RewriteOptions& options);

}  // namespace palign
