#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace palign {

enum class AnswerKind { Integer, Rational, Decimal, Symbolic, Unparsed };

std::string to_string(AnswerKind kind);

struct ExtractedAnswer {
  std::string raw;         // the matched span, verbatim from the response
  std::string normalized;  // canonical rational for numeric kinds, else normalized text
  AnswerKind kind = AnswerKind::Unparsed;
};

/// Bumped whenever the ordered normalization pass list changes; folded into the
/// run config digest.
constexpr std::string_view kNormalizationVersion = "norm-v1";

struct VerifierOptions {
  /// Matched case-insensitively; the rightmost occurrence wins.
  std::vector<std::string> answer_markers = {"final answer is", "answer is", "answer:"};
};

/// Ordered normalization passes: drop \left/\right, unwrap \text{...}, drop $,
/// drop \( \) \[ \], \dfrac|\tfrac -> \frac, drop whitespace, strip enclosing
/// parentheses.
std::string normalize_answer(std::string_view text);

/// Canonical reduced rational ("p/q" or "n") when the normalized text parses as
/// an exact rational: integers, finite decimals, a/b, \frac{a}{b}.
std::optional<std::string> canonical_rational(std::string_view normalized);

/// Last balanced \boxed{...} wins; otherwise the trailing expression after the
/// rightmost answer marker. Total: never throws, absent answer -> nullopt.
std::optional<ExtractedAnswer> extract_answer(const std::string& response,
                                              const VerifierOptions& options = {});

bool answers_equivalent(const ExtractedAnswer& answer, const std::string& gold);
/// Symmetric form used by property tests; runs both sides through the pipeline.
bool answers_equivalent(const std::string& a, const std::string& b);

bool verify(const std::string& response, const std::string& gold,
            const VerifierOptions& options = {});

struct VerifierCase {
  std::string response;
  std::string gold;
  bool expected = false;
  std::size_t line = 0;
};

/// Tab-separated (response, gold, expected_bool) triples; '#' lines are comments.
std::vector<VerifierCase> load_verifier_corpus(const std::string& path);

struct VerifierCorpusResult {
  std::size_t total = 0;
  std::size_t agreed = 0;
  std::vector<VerifierCase> disagreements;
};

VerifierCorpusResult run_verifier_corpus(const std::vector<VerifierCase>& cases,
                                         const VerifierOptions& options = {});

}  // namespace palign
