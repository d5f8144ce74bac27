#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"

#include "palign/corpus.hpp"
#include "palign/errors.hpp"
#include "palign/util.hpp"

#include <random>

using namespace palign;
using namespace palign::testing;

namespace {

std::string words(std::size_t n, const std::string& stem = "w") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += stem + std::to_string(i);
  }
  return out;
}

RewrittenExample make_example(const std::string& id, Provenance provenance) {
  RewrittenExample example;
  example.problem_id = id;
  example.prompt = "prompt for " + id;
  example.response = "response for " + id + " \\boxed{1}";
  example.provenance = provenance;
  example.num_candidates_sampled = provenance == Provenance::Expert ? 20 : 10;
  example.num_correct = provenance == Provenance::Expert ? 0 : 3;
  if (provenance != Provenance::Expert) example.selected_index = 2;
  example.response_token_count = whitespace_token_count(example.response);
  return example;
}

MixtureDataset random_dataset(std::mt19937_64& rng, std::size_t n) {
  MixtureDataset dataset;
  for (std::size_t i = 0; i < n; ++i) {
    const auto provenance = static_cast<Provenance>(rng() % 3);
    auto example = make_example("p" + std::to_string(i), provenance);
    example.num_correct = provenance == Provenance::Expert ? 0 : 1 + rng() % 9;
    if (provenance != Provenance::Expert) {
      example.selected_index = rng() % example.num_candidates_sampled;
    }
    dataset.examples.push_back(std::move(example));
  }
  dataset.stats = recount(dataset.examples);
  return dataset;
}

}  // namespace

TEST_CASE("ingest keeps records under the token budget and reports drops") {
  TempDir tmp;
  // record 2 exceeds the budget: statement 8 + solution 8 = 16 > 10
  std::vector<Problem> problems = {
      make_problem("a", words(3), words(4), "1"),
      make_problem("b", words(8), words(8, "s"), "2"),
      make_problem("c", words(2), words(5), "3"),
  };
  write_corpus_file(problems, tmp.file("corpus.jsonl"));

  FilterReport report;
  auto kept = ingest_corpus(tmp.file("corpus.jsonl"), 10, &report);

  // independent token count on the fixture: whitespace-delimited words
  REQUIRE(whitespace_token_count(problems[1].statement) +
              whitespace_token_count(problems[1].expert_solution) ==
          16);
  CHECK(kept.size() == 2);
  CHECK(kept[0].id == "a");
  CHECK(kept[1].id == "c");
  CHECK(report.kept == 2);
  CHECK(report.dropped == 1);
  REQUIRE(report.dropped_ids.size() == 1);
  CHECK(report.dropped_ids[0] == "b");
}

TEST_CASE("ingest of an empty file yields an empty corpus and a zero report") {
  TempDir tmp;
  write_corpus_file({}, tmp.file("empty.jsonl"));
  FilterReport report;
  auto kept = ingest_corpus(tmp.file("empty.jsonl"), 100, &report);
  CHECK(kept.empty());
  CHECK(report.kept == 0);
  CHECK(report.dropped == 0);
}

TEST_CASE("ingest rejects malformed lines naming the line number") {
  TempDir tmp;
  write_text_file(tmp.file("bad.jsonl"),
                  R"({"id":"a","statement":"s","expert_solution":"e","gold_answer":"1"})"
                  "\nnot json\n");
  CHECK_THROWS_WITH_AS(ingest_corpus(tmp.file("bad.jsonl"), 100),
                       doctest::Contains("line 2"), ConfigError);
}

TEST_CASE("ingest rejects duplicate ids naming the id") {
  TempDir tmp;
  write_corpus_file({make_problem("dup", "s", "e", "1"), make_problem("dup", "t", "f", "2")},
                    tmp.file("dup.jsonl"));
  CHECK_THROWS_WITH_AS(ingest_corpus(tmp.file("dup.jsonl"), 100),
                       doctest::Contains("'dup'"), ConfigError);
}

TEST_CASE("ingest rejects records with missing fields") {
  TempDir tmp;
  write_text_file(tmp.file("missing.jsonl"), R"({"id":"a","statement":"s"})" "\n");
  CHECK_THROWS_AS(ingest_corpus(tmp.file("missing.jsonl"), 100), ConfigError);
}

TEST_CASE("ingest accepts a leading header record") {
  TempDir tmp;
  std::string content = header_to_json(FileHeader::make("cafe")).dump() + "\n";
  content += nlohmann::json{{"id", "a"},
                            {"statement", "s"},
                            {"expert_solution", "e"},
                            {"gold_answer", "1"}}
                 .dump() +
             "\n";
  write_text_file(tmp.file("with_header.jsonl"), content);
  auto kept = ingest_corpus(tmp.file("with_header.jsonl"), 100);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].id == "a");
}

TEST_CASE("filtering is order preserving and deterministic") {
  TempDir tmp;
  std::vector<Problem> problems;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    problems.push_back(
        make_problem("p" + std::to_string(i), words(1 + rng() % 12), words(1 + rng() % 12), "7"));
  }
  write_corpus_file(problems, tmp.file("corpus.jsonl"));
  auto first = ingest_corpus(tmp.file("corpus.jsonl"), 12);
  auto second = ingest_corpus(tmp.file("corpus.jsonl"), 12);
  REQUIRE(first.size() == second.size());
  std::size_t cursor = 0;
  for (const auto& kept : first) {
    // kept order respects input order
    while (cursor < problems.size() && problems[cursor].id != kept.id) ++cursor;
    REQUIRE(cursor < problems.size());
  }
  for (std::size_t i = 0; i < first.size(); ++i) CHECK(first[i].id == second[i].id);
}

TEST_CASE("a 50,000-record corpus filters down to the expected survivor count") {
  TempDir tmp;
  // 48,006 records at 6 tokens, 1,994 overlong at 40 tokens
  std::string content;
  content.reserve(50'000 * 96);
  for (int i = 0; i < 50'000; ++i) {
    const bool overlong = i % 25 == 7 && i < 49'850;  // 1,994 of them
    nlohmann::json record{{"id", "p" + std::to_string(i)},
                          {"statement", overlong ? words(20) : words(3)},
                          {"expert_solution", overlong ? words(20, "s") : words(3, "s")},
                          {"gold_answer", "42"}};
    content += record.dump();
    content += '\n';
  }
  write_text_file(tmp.file("big.jsonl"), content);
  FilterReport report;
  auto kept = ingest_corpus(tmp.file("big.jsonl"), 16, &report);
  CHECK(kept.size() == 48'006);
  CHECK(report.dropped == 1'994);
}

TEST_CASE("a pluggable tokenizer replaces the whitespace rule") {
  TempDir tmp;
  write_corpus_file({make_problem("a", "abcdef", "gh", "1")}, tmp.file("c.jsonl"));
  // byte-count tokenizer: 6 + 2 = 8 > 7 -> dropped
  FilterReport report;
  auto kept = ingest_corpus(tmp.file("c.jsonl"), 7, &report,
                            [](std::string_view text) { return text.size(); });
  CHECK(kept.empty());
  CHECK(report.dropped == 1);
}

TEST_CASE("mixture write/read round trips structurally") {
  TempDir tmp;
  MixtureDataset dataset;
  dataset.examples = {make_example("a", Provenance::SelfAlign),
                      make_example("b", Provenance::Retell),
                      make_example("c", Provenance::Expert)};
  dataset.stats = recount(dataset.examples);

  write_mixture(dataset, tmp.file("mix.jsonl"), FileHeader::make("deadbeef"));
  FileHeader header;
  MixtureDataset loaded = read_mixture(tmp.file("mix.jsonl"), &header);
  CHECK(loaded == dataset);
  CHECK(header.config_digest == "deadbeef");
}

TEST_CASE("mixture round trip is the identity over generated datasets") {
  TempDir tmp;
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    MixtureDataset dataset = random_dataset(rng, rng() % 12);
    const std::string path = tmp.file("mix_" + std::to_string(trial) + ".jsonl");
    write_mixture(dataset, path, FileHeader::make("d1"));
    CHECK(read_mixture(path) == dataset);
    // and write(read(write(d))) is byte identical
    const std::string again = tmp.file("mix_again_" + std::to_string(trial) + ".jsonl");
    write_mixture(read_mixture(path), again, FileHeader::make("d1"));
    CHECK(slurp(path) == slurp(again));
  }
}

TEST_CASE("a dataset violating the partition property is refused") {
  TempDir tmp;
  MixtureDataset dataset;
  dataset.examples = {make_example("same", Provenance::SelfAlign),
                      make_example("same", Provenance::Expert)};
  dataset.stats = recount(dataset.examples);
  CHECK_THROWS_WITH_AS(write_mixture(dataset, tmp.file("bad.jsonl"), FileHeader::make("x")),
                       doctest::Contains("partition"), ConfigError);
}

TEST_CASE("stats record matches an independent scan of the written file") {
  TempDir tmp;
  MixtureDataset dataset;
  dataset.examples = {make_example("a", Provenance::SelfAlign),
                      make_example("b", Provenance::SelfAlign),
                      make_example("c", Provenance::Retell),
                      make_example("d", Provenance::Expert)};
  dataset.stats = recount(dataset.examples);
  write_mixture(dataset, tmp.file("mix.jsonl"), FileHeader::make("x"));

  // independent scan: parse raw lines, recount provenance values
  std::size_t self = 0, retell = 0, expert = 0;
  nlohmann::json stats_line;
  std::size_t line_no = 0;
  for_each_jsonl_record(tmp.file("mix.jsonl"), [&](std::size_t, const nlohmann::json& record) {
    ++line_no;
    if (line_no == 2) stats_line = record;
    if (!record.contains("provenance")) return;
    const std::string p = record["provenance"].get<std::string>();
    if (p == "self_align") ++self;
    if (p == "retell") ++retell;
    if (p == "expert") ++expert;
  });
  CHECK(self == 2);
  CHECK(retell == 1);
  CHECK(expert == 1);
  CHECK(stats_line["stats"]["self_align"] == 2);
  CHECK(stats_line["stats"]["retell"] == 1);
  CHECK(stats_line["stats"]["expert"] == 1);
  CHECK(stats_line["stats"]["total"] == 4);
}

TEST_CASE("stored stats that disagree with the examples are refused") {
  TempDir tmp;
  MixtureDataset dataset;
  dataset.examples = {make_example("a", Provenance::SelfAlign)};
  dataset.stats.expert = 1;  // wrong on purpose
  CHECK_THROWS_WITH_AS(write_mixture(dataset, tmp.file("bad.jsonl"), FileHeader::make("x")),
                       doctest::Contains("stats"), ConfigError);
}

TEST_CASE("per-example invariants are enforced") {
  MixtureDataset dataset;
  auto example = make_example("a", Provenance::SelfAlign);
  example.num_correct = 0;  // sampled provenance requires >= 1
  dataset.examples = {example};
  dataset.stats = recount(dataset.examples);
  CHECK_THROWS_AS(validate_dataset(dataset), ConfigError);

  auto oversized = make_example("b", Provenance::Retell);
  oversized.selected_index = oversized.num_candidates_sampled;  // out of range
  dataset.examples = {oversized};
  dataset.stats = recount(dataset.examples);
  CHECK_THROWS_AS(validate_dataset(dataset), ConfigError);

  auto empty_response = make_example("c", Provenance::Expert);
  empty_response.response_token_count = 0;
  dataset.examples = {empty_response};
  dataset.stats = recount(dataset.examples);
  CHECK_THROWS_AS(validate_dataset(dataset), ConfigError);
}

TEST_CASE("unwritable path raises an io error") {
  MixtureDataset dataset;
  dataset.examples = {make_example("a", Provenance::Expert)};
  dataset.stats = recount(dataset.examples);
  CHECK_THROWS_AS(write_mixture(dataset, "/nonexistent_dir/mix.jsonl", FileHeader::make("x")),
                  IoError);
}
