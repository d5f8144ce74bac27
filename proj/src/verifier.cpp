#include "palign/verifier.hpp"

#include "palign/errors.hpp"
#include "palign/util.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>

namespace palign {

namespace {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

bool is_digit(char c) { return c >= '0' && c <= '9'; }

void erase_all(std::string& text, std::string_view needle) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.erase(pos, needle.size());
  }
}

// Returns the index one past the matching close brace, or npos.
std::size_t balanced_end(std::string_view text, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    if (text[i] == '{') {
      ++depth;
    } else if (text[i] == '}') {
      --depth;
      if (depth == 0) return i + 1;
      if (depth < 0) return std::string_view::npos;
    }
  }
  return std::string_view::npos;
}

void unwrap_text_commands(std::string& text) {
  std::size_t pos = 0;
  while ((pos = text.find("\\text{", pos)) != std::string::npos) {
    std::size_t open = pos + 5;  // index of '{'
    std::size_t end = balanced_end(text, open);
    if (end == std::string::npos) {
      pos += 6;
      continue;
    }
    std::string inner = text.substr(open + 1, end - open - 2);
    text.replace(pos, end - pos, inner);
  }
}

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
}

void strip_whitespace(std::string& text) {
  text.erase(std::remove_if(text.begin(), text.end(),
                            [](unsigned char c) { return std::isspace(c) != 0; }),
             text.end());
}

void strip_enclosing_parens(std::string& text) {
  while (text.size() >= 2 && text.front() == '(' && text.back() == ')') {
    int depth = 0;
    bool wraps = true;
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '(') ++depth;
      if (text[i] == ')') {
        --depth;
        if (depth == 0 && i + 1 != text.size()) {
          wraps = false;
          break;
        }
      }
    }
    if (!wraps || depth != 0) break;
    text = text.substr(1, text.size() - 2);
  }
}

// Plain signed integer or finite decimal. Exact: a decimal with k fractional
// digits becomes p / 10^k.
std::optional<cpp_rational> parse_simple_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::size_t i = 0;
  bool negative = false;
  if (text[i] == '+' || text[i] == '-') {
    negative = text[i] == '-';
    ++i;
  }
  std::string int_part, frac_part;
  while (i < text.size() && is_digit(text[i])) int_part.push_back(text[i++]);
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && is_digit(text[i])) frac_part.push_back(text[i++]);
  }
  if (i != text.size()) return std::nullopt;
  if (int_part.empty() && frac_part.empty()) return std::nullopt;
  cpp_int numerator = int_part.empty() ? cpp_int(0) : cpp_int(int_part);
  cpp_int denominator = 1;
  for (std::size_t k = 0; k < frac_part.size(); ++k) {
    numerator *= 10;
    denominator *= 10;
  }
  if (!frac_part.empty()) numerator += cpp_int(frac_part);
  if (negative) numerator = -numerator;
  return cpp_rational(numerator, denominator);
}

struct ParsedRational {
  cpp_rational value;
  bool fraction_form = false;  // came from \frac{a}{b} or a/b
  bool decimal_form = false;   // contained a '.'
};

std::optional<ParsedRational> parse_rational(std::string_view text) {
  if (text.empty()) return std::nullopt;
  bool negative = false;
  if (text.front() == '+' || text.front() == '-') {
    negative = text.front() == '-';
    text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
  }

  std::optional<cpp_rational> value;
  bool fraction_form = false;
  bool decimal_form = text.find('.') != std::string_view::npos;

  if (text.rfind("\\frac{", 0) == 0) {
    std::size_t open1 = 5;
    std::size_t end1 = balanced_end(text, open1);
    if (end1 == std::string_view::npos || end1 >= text.size() || text[end1] != '{') {
      return std::nullopt;
    }
    std::size_t end2 = balanced_end(text, end1);
    if (end2 != text.size()) return std::nullopt;
    auto numerator = parse_simple_number(text.substr(open1 + 1, end1 - open1 - 2));
    auto denominator = parse_simple_number(text.substr(end1 + 1, end2 - end1 - 2));
    if (!numerator || !denominator || *denominator == 0) return std::nullopt;
    value = *numerator / *denominator;
    fraction_form = true;
  } else if (std::count(text.begin(), text.end(), '/') == 1) {
    std::size_t slash = text.find('/');
    auto numerator = parse_simple_number(text.substr(0, slash));
    auto denominator = parse_simple_number(text.substr(slash + 1));
    if (!numerator || !denominator || *denominator == 0) return std::nullopt;
    value = *numerator / *denominator;
    fraction_form = true;
  } else {
    value = parse_simple_number(text);
  }

  if (!value) return std::nullopt;
  if (negative) *value = -*value;
  return ParsedRational{*value, fraction_form, decimal_form};
}

std::string rational_to_string(const cpp_rational& value) {
  cpp_int num = boost::multiprecision::numerator(value);
  cpp_int den = boost::multiprecision::denominator(value);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

std::string to_lower_copy(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

ExtractedAnswer classify(std::string raw) {
  ExtractedAnswer answer;
  answer.raw = std::move(raw);
  std::string normalized = normalize_answer(answer.raw);
  if (normalized.empty()) {
    answer.normalized = normalized;
    answer.kind = AnswerKind::Unparsed;
    return answer;
  }
  auto parsed = parse_rational(normalized);
  if (parsed) {
    answer.normalized = rational_to_string(parsed->value);
    if (parsed->fraction_form) {
      answer.kind = AnswerKind::Rational;
    } else if (parsed->decimal_form) {
      answer.kind = AnswerKind::Decimal;
    } else {
      answer.kind = AnswerKind::Integer;
    }
  } else {
    answer.normalized = normalized;
    answer.kind = AnswerKind::Symbolic;
  }
  return answer;
}

}  // namespace

std::string to_string(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::Integer: return "integer";
    case AnswerKind::Rational: return "rational";
    case AnswerKind::Decimal: return "decimal";
    case AnswerKind::Symbolic: return "symbolic";
    case AnswerKind::Unparsed: return "unparsed";
  }
  return "unparsed";
}

std::string normalize_answer(std::string_view text) {
  std::string out(text);
  erase_all(out, "\\left");
  erase_all(out, "\\right");
  unwrap_text_commands(out);
  erase_all(out, "$");
  erase_all(out, "\\(");
  erase_all(out, "\\)");
  erase_all(out, "\\[");
  erase_all(out, "\\]");
  replace_all(out, "\\dfrac", "\\frac");
  replace_all(out, "\\tfrac", "\\frac");
  strip_whitespace(out);
  strip_enclosing_parens(out);
  return out;
}

std::optional<std::string> canonical_rational(std::string_view normalized) {
  auto parsed = parse_rational(normalized);
  if (!parsed) return std::nullopt;
  return rational_to_string(parsed->value);
}

std::optional<ExtractedAnswer> extract_answer(const std::string& response,
                                              const VerifierOptions& options) {
  // Last balanced box wins.
  std::optional<std::pair<std::size_t, std::size_t>> best;  // content [begin, end)
  std::size_t pos = 0;
  while ((pos = response.find("\\boxed{", pos)) != std::string::npos) {
    std::size_t open = pos + 6;
    std::size_t end = balanced_end(response, open);
    if (end != std::string::npos) {
      best = {open + 1, end - 1};
    }
    pos = open + 1;
  }
  if (best) {
    return classify(response.substr(best->first, best->second - best->first));
  }

  const std::string lowered = to_lower_copy(response);
  std::size_t marker_end = std::string::npos;
  for (const auto& marker : options.answer_markers) {
    const std::string needle = to_lower_copy(marker);
    if (needle.empty()) continue;
    std::size_t at = lowered.rfind(needle);
    if (at == std::string::npos) continue;
    std::size_t end = at + needle.size();
    if (marker_end == std::string::npos || end > marker_end) marker_end = end;
  }
  if (marker_end == std::string::npos) return std::nullopt;

  std::size_t line_end = response.find('\n', marker_end);
  if (line_end == std::string::npos) line_end = response.size();
  std::size_t begin = marker_end;
  while (begin < line_end && std::isspace(static_cast<unsigned char>(response[begin]))) ++begin;
  std::size_t end = line_end;
  while (end > begin) {
    char c = response[end - 1];
    if (std::isspace(static_cast<unsigned char>(c)) || c == '.' || c == '!' || c == '?' ||
        c == ',' || c == ';') {
      --end;
    } else {
      break;
    }
  }
  if (begin >= end) return std::nullopt;
  return classify(response.substr(begin, end - begin));
}

namespace {

// Maps a side to its comparison key: canonical rational when numeric, else the
// normalized text. Symmetric by construction.
std::string comparison_key(std::string_view text) {
  std::string normalized = normalize_answer(text);
  if (auto canonical = canonical_rational(normalized)) return *canonical;
  return normalized;
}

}  // namespace

bool answers_equivalent(const ExtractedAnswer& answer, const std::string& gold) {
  if (answer.kind == AnswerKind::Unparsed && answer.normalized.empty()) {
    return comparison_key(gold).empty();
  }
  return answer.normalized == comparison_key(gold);
}

bool answers_equivalent(const std::string& a, const std::string& b) {
  return comparison_key(a) == comparison_key(b);
}

bool verify(const std::string& response, const std::string& gold,
            const VerifierOptions& options) {
  auto extracted = extract_answer(response, options);
  if (!extracted) return false;
  return answers_equivalent(*extracted, gold);
}

std::vector<VerifierCase> load_verifier_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open verifier corpus: " + path);
  std::vector<VerifierCase> cases;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::size_t tab1 = line.find('\t');
    std::size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        line.find('\t', tab2 + 1) != std::string::npos) {
      throw ConfigError("verifier corpus line " + std::to_string(line_number) +
                        ": expected exactly three tab-separated fields");
    }
    VerifierCase test_case;
    test_case.response = line.substr(0, tab1);
    test_case.gold = line.substr(tab1 + 1, tab2 - tab1 - 1);
    std::string expected = line.substr(tab2 + 1);
    if (expected == "true") {
      test_case.expected = true;
    } else if (expected == "false") {
      test_case.expected = false;
    } else {
      throw ConfigError("verifier corpus line " + std::to_string(line_number) +
                        ": expected_bool must be 'true' or 'false'");
    }
    test_case.line = line_number;
    cases.push_back(std::move(test_case));
  }
  return cases;
}

VerifierCorpusResult run_verifier_corpus(const std::vector<VerifierCase>& cases,
                                         const VerifierOptions& options) {
  VerifierCorpusResult result;
  result.total = cases.size();
  for (const auto& test_case : cases) {
    bool actual = verify(test_case.response, test_case.gold, options);
    if (actual == test_case.expected) {
      ++result.agreed;
    } else {
      result.disagreements.push_back(test_case);
    }
  }
  return result;
}

}  // namespace palign
