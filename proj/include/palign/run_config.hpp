#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "palign/analytics.hpp"
#include "palign/policy_client.hpp"

namespace palign {

/// Resolved run configuration: config file values with flag overrides applied.
/// The digest of this resolved form stamps every output file.
struct RunConfig {
  std::string corpus_path;
  std::string output_dir;

  ClientPolicy endpoint;
  std::string mock_fixture;  // mock backend when nonempty

  SamplingConfig sampling;

  std::string template_path;  // builtin template when empty
  std::string problem_prompt_template = "{statement}";

  std::size_t max_tokens = 4096;
  std::optional<std::uint64_t> seed;
  Aggregation aggregation = Aggregation::PerSequenceSum;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  /// Hash of the resolved config along with the retell-template version and the
  /// verifier normalization version.
  std::string digest() const;
};

}  // namespace palign
