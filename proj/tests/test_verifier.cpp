#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"

#include "palign/errors.hpp"
#include "palign/verifier.hpp"

#include <cstdint>
#include <random>

using namespace palign;
using namespace palign::testing;

TEST_CASE("a single boxed integer extracts with kind integer") {
  auto answer = extract_answer("We compute carefully, so \\boxed{42}.");
  REQUIRE(answer.has_value());
  CHECK(answer->raw == "42");
  CHECK(answer->kind == AnswerKind::Integer);
  CHECK(answer->normalized == "42");
}

TEST_CASE("the last balanced box wins") {
  const std::string response =
      "First we find \\boxed{\\frac{7}{2}} but doubling gives \\boxed{14}";
  auto answer = extract_answer(response);
  REQUIRE(answer.has_value());
  // manual scan oracle: the rightmost box contains exactly "14"
  CHECK(answer->raw == "14");
  CHECK(answer->kind == AnswerKind::Integer);
}

TEST_CASE("nested braces stay balanced inside a box") {
  auto answer = extract_answer("thus \\boxed{\\frac{1}{\\text{2}}}");
  REQUIRE(answer.has_value());
  CHECK(answer->raw == "\\frac{1}{\\text{2}}");
  CHECK(answer->kind == AnswerKind::Rational);
  CHECK(answer->normalized == "1/2");
}

TEST_CASE("an unbalanced trailing box falls back to the previous balanced one") {
  auto answer = extract_answer("\\boxed{3} and then \\boxed{truncated");
  REQUIRE(answer.has_value());
  CHECK(answer->raw == "3");
}

TEST_CASE("marker extraction takes the trailing expression") {
  auto answer = extract_answer("Long derivation.\nThe final answer is 12.");
  REQUIRE(answer.has_value());
  CHECK(answer->raw == "12");
  CHECK(answer->kind == AnswerKind::Integer);
}

TEST_CASE("responses with no box and no marker extract nothing") {
  CHECK_FALSE(extract_answer("no final answer given").has_value());
  CHECK_FALSE(extract_answer("").has_value());
}

TEST_CASE("raw is always a contiguous substring of the response") {
  const std::string responses[] = {
      "so \\boxed{\\frac{-3}{4}} done",
      "Answer: x + 1",
      "the answer is   spaced out  ",
  };
  for (const auto& response : responses) {
    auto answer = extract_answer(response);
    REQUIRE(answer.has_value());
    CHECK(response.find(answer->raw) != std::string::npos);
  }
}

TEST_CASE("fractions, decimals, and integers compare as exact rationals") {
  CHECK(answers_equivalent(std::string("\\frac{1}{2}"), std::string("0.5")));
  CHECK(answers_equivalent(std::string("42"), std::string("42")));
  CHECK(answers_equivalent(std::string("2/4"), std::string("1/2")));
  CHECK(answers_equivalent(std::string("-\\frac{7}{2}"), std::string("-3.5")));
  CHECK(answers_equivalent(std::string("0.125"), std::string("1/8")));
  CHECK_FALSE(answers_equivalent(std::string("1/3"), std::string("0.333333")));
  CHECK_FALSE(answers_equivalent(std::string("2"), std::string("3")));
}

TEST_CASE("symbolic reordering is not recognized") {
  CHECK_FALSE(answers_equivalent(std::string("x+1"), std::string("1+x")));
  CHECK(answers_equivalent(std::string("x+1"), std::string("x + 1")));
}

TEST_CASE("latex wrappers are stripped before comparison") {
  CHECK(answers_equivalent(std::string("$\\frac{1}{2}$"), std::string("1/2")));
  CHECK(answers_equivalent(std::string("\\left(\\frac{7}{2}\\right)"), std::string("3.5")));
  CHECK(answers_equivalent(std::string("\\text{7}"), std::string("7")));
  CHECK(answers_equivalent(std::string("\\dfrac{3}{4}"), std::string("0.75")));
  CHECK(answers_equivalent(std::string("\\(5\\)"), std::string("5")));
}

TEST_CASE("verify composes extraction and equivalence") {
  CHECK(verify("the result: \\boxed{0.5}", "1/2"));
  CHECK_FALSE(verify("", "1/2"));
  CHECK_FALSE(verify("we get \\boxed{3} finally \\boxed{4}", "3"));
  CHECK(verify("we get \\boxed{3} finally \\boxed{4}", "4"));
}

TEST_CASE("reflexivity: a verbatim boxed gold always verifies") {
  std::mt19937_64 rng(99);
  const std::string golds[] = {"17", "-3/4", "0.25", "x^2+1", "\\sqrt{2}", "12345678901234567890"};
  for (const auto& gold : golds) {
    CHECK(verify("thus \\boxed{" + gold + "}", gold));
  }
  for (int i = 0; i < 200; ++i) {
    const std::string gold = std::to_string(static_cast<std::int64_t>(rng() % 2000000) - 1000000);
    CHECK(verify("thus \\boxed{" + gold + "}", gold));
  }
}

TEST_CASE("equivalence is symmetric over random pairs") {
  std::mt19937_64 rng(7);
  auto random_token = [&]() -> std::string {
    switch (rng() % 5) {
      case 0: return std::to_string(static_cast<int>(rng() % 100));
      case 1: return std::to_string(static_cast<int>(rng() % 9) + 1) + "/" +
                     std::to_string(static_cast<int>(rng() % 9) + 1);
      case 2: return "0." + std::to_string(static_cast<int>(rng() % 100));
      case 3: return "x+" + std::to_string(static_cast<int>(rng() % 10));
      default: return "\\frac{" + std::to_string(static_cast<int>(rng() % 9) + 1) + "}{" +
                      std::to_string(static_cast<int>(rng() % 9) + 1) + "}";
    }
  };
  for (int i = 0; i < 500; ++i) {
    const std::string a = random_token();
    const std::string b = random_token();
    CHECK(answers_equivalent(a, b) == answers_equivalent(b, a));
  }
}

TEST_CASE("numeric path agrees with direct integer cross-multiplication") {
  // oracle: p1/q1 == p2/q2  iff  p1*q2 == p2*q1, exact in int64 for |p|,|q| <= 1e6
  std::mt19937_64 rng(31337);
  auto draw = [&](std::int64_t bound) {
    return static_cast<std::int64_t>(rng() % (2 * bound + 1)) - bound;
  };
  int equal_seen = 0;
  for (int i = 0; i < 2000; ++i) {
    std::int64_t p1 = draw(1000000), p2 = draw(1000000);
    std::int64_t q1 = draw(1000000), q2 = draw(1000000);
    if (q1 == 0 || q2 == 0) continue;
    bool expect = p1 * q2 == p2 * q1;
    if (i % 10 == 0) {  // force equal pairs so the true branch is exercised
      std::int64_t scale = 1 + static_cast<std::int64_t>(rng() % 7);
      if (std::abs(p1) <= 100000 && std::abs(q1) <= 100000) {
        p2 = p1 * scale;
        q2 = q1 * scale;
        expect = true;
      }
    }
    const std::string lhs = std::to_string(p1) + "/" + std::to_string(q1);
    const std::string rhs = std::to_string(p2) + "/" + std::to_string(q2);
    CHECK(answers_equivalent(lhs, rhs) == expect);
    if (expect) ++equal_seen;
  }
  CHECK(equal_seen > 100);
}

TEST_CASE("finite decimals round trip exactly against their fraction") {
  // oracle: build the decimal by exact long division for denominators 2^a 5^b
  std::mt19937_64 rng(555);
  for (int i = 0; i < 300; ++i) {
    std::int64_t den = 1;
    const int twos = static_cast<int>(rng() % 7);
    const int fives = static_cast<int>(rng() % 7);
    for (int t = 0; t < twos; ++t) den *= 2;
    for (int f = 0; f < fives; ++f) den *= 5;
    const std::int64_t num = static_cast<std::int64_t>(rng() % 100000) - 50000;
    // exact decimal expansion: scale so that den divides a power of ten
    std::int64_t pow10 = 1;
    int digits = 0;
    while (pow10 % den != 0) {
      pow10 *= 10;
      ++digits;
    }
    const std::int64_t scaled = num * (pow10 / den);
    std::string decimal;
    if (digits == 0) {
      decimal = std::to_string(scaled);
    } else {
      const bool negative = scaled < 0;
      std::string body = std::to_string(std::abs(scaled));
      while (body.size() <= static_cast<std::size_t>(digits)) body.insert(0, "0");
      body.insert(body.size() - digits, ".");
      decimal = (negative ? "-" : "") + body;
    }
    CHECK(answers_equivalent(std::to_string(num) + "/" + std::to_string(den), decimal));
  }
}

TEST_CASE("huge integers compare without overflow") {
  CHECK(answers_equivalent(std::string("123456789012345678901234567890"),
                           std::string("123456789012345678901234567890")));
  CHECK_FALSE(answers_equivalent(std::string("123456789012345678901234567890"),
                                 std::string("123456789012345678901234567891")));
}

TEST_CASE("no input crashes the verifier") {
  std::mt19937_64 rng(0xFEED);
  for (int i = 0; i < 20000; ++i) {
    std::string bytes(rng() % 120, '\0');
    for (auto& c : bytes) c = static_cast<char>(rng() % 256);
    CHECK_NOTHROW((void)verify(bytes, "42"));
    CHECK_NOTHROW((void)verify("\\boxed{" + bytes, bytes));
  }
}

TEST_CASE("the bundled verifier corpus agrees 100 percent") {
  auto cases = load_verifier_corpus(std::string(PALIGN_TEST_DATA_DIR) + "/verifier_corpus.tsv");
  REQUIRE(cases.size() >= 200);
  auto result = run_verifier_corpus(cases);
  for (const auto& miss : result.disagreements) {
    CAPTURE(miss.line);
    CAPTURE(miss.response);
    CAPTURE(miss.gold);
    CHECK_MESSAGE(false, "verifier disagreement at corpus line ", miss.line);
  }
  CHECK(result.agreed == result.total);
}

TEST_CASE("corpus files with malformed rows are rejected") {
  TempDir tmp;
  write_text_file(tmp.file("bad.tsv"), "only-two\tfields\n");
  CHECK_THROWS_AS(load_verifier_corpus(tmp.file("bad.tsv")), ConfigError);
  write_text_file(tmp.file("bad2.tsv"), "a\tb\tmaybe\n");
  CHECK_THROWS_AS(load_verifier_corpus(tmp.file("bad2.tsv")), ConfigError);
}
