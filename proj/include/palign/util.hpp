#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace palign {

constexpr std::uint64_t kFnvOffsetBasis = 1469598103934665603ull;

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = kFnvOffsetBasis);
std::string to_hex(std::uint64_t value);

std::vector<std::string> split_whitespace(std::string_view text);
std::size_t whitespace_token_count(std::string_view text);

std::optional<std::string> read_env(const std::string& name);

/// RFC 3339 UTC timestamp. Honors SOURCE_DATE_EPOCH when set so that runs with
/// identical resolved configs produce byte-identical output files.
std::string utc_timestamp();

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

struct UniformDraw {
  std::size_t index;   // value in [0, n)
  std::uint64_t raw;   // the accepted raw generator output, kept for auditing
};

/// Unbiased bounded draw via rejection sampling. Deterministic given the
/// generator state (does not depend on std::uniform_int_distribution, whose
/// output is implementation-defined).
UniformDraw uniform_index(std::mt19937_64& rng, std::size_t n);

/// Seed for the per-problem, per-stage random substream. Keyed by problem id
/// so that execution order can never change selections.
std::uint64_t substream_seed(std::uint64_t run_seed, std::string_view problem_id,
                             std::string_view stage);

}  // namespace palign
