#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "palign/records.hpp"

namespace palign {

/// A task instance: statement, behavior-policy demonstration, canonical answer.
struct Problem {
  std::string id;
  std::string statement;
  std::string expert_solution;
  std::string gold_answer;
};

enum class Provenance { SelfAlign, Retell, Expert };

std::string to_string(Provenance provenance);
Provenance provenance_from_string(const std::string& name);

/// One training record of the mixture dataset.
struct RewrittenExample {
  std::string problem_id;
  std::string prompt;
  std::string response;
  Provenance provenance = Provenance::Expert;
  std::size_t num_candidates_sampled = 0;
  std::size_t num_correct = 0;
  std::optional<std::size_t> selected_index;
  std::size_t response_token_count = 0;

  bool operator==(const RewrittenExample&) const = default;
};

struct StageStats {
  std::size_t self_align = 0;
  std::size_t retell = 0;
  std::size_t expert = 0;

  std::size_t total() const { return self_align + retell + expert; }
  std::size_t& for_provenance(Provenance provenance);
  std::size_t for_provenance(Provenance provenance) const;
  bool operator==(const StageStats&) const = default;
};

struct MixtureDataset {
  std::vector<RewrittenExample> examples;
  StageStats stats;

  bool operator==(const MixtureDataset&) const = default;
};

StageStats recount(const std::vector<RewrittenExample>& examples);

/// Throws ConfigError when any dataset invariant fails: duplicate problem ids
/// (partition property), stats not matching a recount, per-example invariants.
void validate_dataset(const MixtureDataset& dataset);

using TokenCounter = std::function<std::size_t(std::string_view)>;

/// statement + expert_solution tokens under `counter` (whitespace words by default).
std::size_t problem_token_count(const Problem& problem, const TokenCounter& counter);

struct FilterReport {
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::vector<std::string> dropped_ids;
};

/// Reads a line-delimited problem corpus, keeping records whose
/// statement+expert_solution token count is <= max_tokens. Order preserving.
/// A leading header record (as written by the ingest subcommand) is accepted.
std::vector<Problem> ingest_corpus(const std::string& path, std::size_t max_tokens,
                                   FilterReport* report = nullptr,
                                   const TokenCounter& counter = {});

void write_problems(const std::vector<Problem>& problems, const std::string& path,
                    const FileHeader& header);

nlohmann::json example_to_json(const RewrittenExample& example);
RewrittenExample example_from_json(const nlohmann::json& record);

/// Line-delimited layout: header record, stats record, then one example per line.
void write_mixture(const MixtureDataset& dataset, const std::string& path,
                   const FileHeader& header);
MixtureDataset read_mixture(const std::string& path, FileHeader* header_out = nullptr);

}  // namespace palign
