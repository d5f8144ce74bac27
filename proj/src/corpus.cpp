#include "palign/corpus.hpp"

#include "palign/errors.hpp"
#include "palign/util.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

namespace palign {

using nlohmann::json;

std::string to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::SelfAlign: return "self_align";
    case Provenance::Retell: return "retell";
    case Provenance::Expert: return "expert";
  }
  throw ConfigError("unknown provenance value");
}

Provenance provenance_from_string(const std::string& name) {
  if (name == "self_align") return Provenance::SelfAlign;
  if (name == "retell") return Provenance::Retell;
  if (name == "expert") return Provenance::Expert;
  throw ConfigError("unknown provenance: " + name);
}

std::size_t& StageStats::for_provenance(Provenance provenance) {
  switch (provenance) {
    case Provenance::SelfAlign: return self_align;
    case Provenance::Retell: return retell;
    case Provenance::Expert: return expert;
  }
  throw ConfigError("unknown provenance value");
}

std::size_t StageStats::for_provenance(Provenance provenance) const {
  return const_cast<StageStats*>(this)->for_provenance(provenance);
}

StageStats recount(const std::vector<RewrittenExample>& examples) {
  StageStats stats;
  for (const auto& example : examples) stats.for_provenance(example.provenance) += 1;
  return stats;
}

namespace {

void validate_example(const RewrittenExample& example) {
  if (example.problem_id.empty()) {
    throw ConfigError("example with empty problem_id");
  }
  if (example.response_token_count == 0) {
    throw ConfigError("example " + example.problem_id + ": response_token_count must be > 0");
  }
  if (example.provenance != Provenance::Expert) {
    if (example.num_correct < 1) {
      throw ConfigError("example " + example.problem_id + ": sampled provenance requires num_correct >= 1");
    }
    if (!example.selected_index.has_value() ||
        *example.selected_index >= example.num_candidates_sampled) {
      throw ConfigError("example " + example.problem_id + ": selected_index out of range");
    }
  }
}

}  // namespace

void validate_dataset(const MixtureDataset& dataset) {
  std::unordered_set<std::string> seen;
  seen.reserve(dataset.examples.size());
  for (const auto& example : dataset.examples) {
    validate_example(example);
    if (!seen.insert(example.problem_id).second) {
      throw ConfigError("partition violation: problem " + example.problem_id +
                        " appears in more than one example");
    }
  }
  const StageStats actual = recount(dataset.examples);
  if (actual != dataset.stats) {
    std::ostringstream msg;
    msg << "stats mismatch: stored " << dataset.stats.self_align << "/" << dataset.stats.retell
        << "/" << dataset.stats.expert << ", recounted " << actual.self_align << "/"
        << actual.retell << "/" << actual.expert;
    throw ConfigError(msg.str());
  }
}

std::size_t problem_token_count(const Problem& problem, const TokenCounter& counter) {
  if (counter) return counter(problem.statement) + counter(problem.expert_solution);
  return whitespace_token_count(problem.statement) + whitespace_token_count(problem.expert_solution);
}

namespace {

Problem problem_from_json(const json& record, std::size_t line_number, const std::string& path) {
  auto require = [&](const char* field) -> std::string {
    if (!record.contains(field) || !record.at(field).is_string()) {
      throw ConfigError("malformed record at line " + std::to_string(line_number) + " of " + path +
                        ": missing string field '" + field + "'");
    }
    return record.at(field).get<std::string>();
  };
  Problem problem;
  problem.id = require("id");
  problem.statement = require("statement");
  problem.expert_solution = require("expert_solution");
  problem.gold_answer = require("gold_answer");
  if (problem.id.empty()) {
    throw ConfigError("empty id at line " + std::to_string(line_number) + " of " + path);
  }
  if (problem.statement.empty() || problem.expert_solution.empty()) {
    throw ConfigError("empty statement or expert_solution for id '" + problem.id + "' at line " +
                      std::to_string(line_number) + " of " + path);
  }
  return problem;
}

}  // namespace

std::vector<Problem> ingest_corpus(const std::string& path, std::size_t max_tokens,
                                   FilterReport* report, const TokenCounter& counter) {
  std::vector<Problem> kept;
  FilterReport local;
  std::unordered_set<std::string> ids;
  bool first = true;
  for_each_jsonl_record(path, [&](std::size_t line_number, const json& record) {
    if (first && is_header_record(record)) {
      first = false;
      return;
    }
    first = false;
    Problem problem = problem_from_json(record, line_number, path);
    if (!ids.insert(problem.id).second) {
      throw ConfigError("duplicate id '" + problem.id + "' at line " + std::to_string(line_number) +
                        " of " + path);
    }
    if (problem_token_count(problem, counter) <= max_tokens) {
      kept.push_back(std::move(problem));
      ++local.kept;
    } else {
      ++local.dropped;
      local.dropped_ids.push_back(problem.id);
    }
  });
  if (report) *report = std::move(local);
  return kept;
}

void write_problems(const std::vector<Problem>& problems, const std::string& path,
                    const FileHeader& header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << dump_record(header_to_json(header)) << '\n';
  for (const auto& problem : problems) {
    json record{{"id", problem.id},
                {"statement", problem.statement},
                {"expert_solution", problem.expert_solution},
                {"gold_answer", problem.gold_answer}};
    out << dump_record(record) << '\n';
  }
  if (!out) throw IoError("write failure: " + path);
}

json example_to_json(const RewrittenExample& example) {
  json record{{"problem_id", example.problem_id},
              {"prompt", example.prompt},
              {"response", example.response},
              {"provenance", to_string(example.provenance)},
              {"num_candidates_sampled", example.num_candidates_sampled},
              {"num_correct", example.num_correct},
              {"response_token_count", example.response_token_count}};
  if (example.selected_index.has_value()) {
    record["selected_index"] = *example.selected_index;
  } else {
    record["selected_index"] = nullptr;
  }
  return record;
}

RewrittenExample example_from_json(const json& record) {
  RewrittenExample example;
  example.problem_id = record.at("problem_id").get<std::string>();
  example.prompt = record.at("prompt").get<std::string>();
  example.response = record.at("response").get<std::string>();
  example.provenance = provenance_from_string(record.at("provenance").get<std::string>());
  example.num_candidates_sampled = record.at("num_candidates_sampled").get<std::size_t>();
  example.num_correct = record.at("num_correct").get<std::size_t>();
  example.response_token_count = record.at("response_token_count").get<std::size_t>();
  const auto& selected = record.at("selected_index");
  if (!selected.is_null()) example.selected_index = selected.get<std::size_t>();
  return example;
}

namespace {

json stats_to_json(const StageStats& stats) {
  return json{{"stats",
               json{{"self_align", stats.self_align},
                    {"retell", stats.retell},
                    {"expert", stats.expert},
                    {"total", stats.total()}}}};
}

StageStats stats_from_json(const json& record) {
  const json& body = record.at("stats");
  StageStats stats;
  stats.self_align = body.at("self_align").get<std::size_t>();
  stats.retell = body.at("retell").get<std::size_t>();
  stats.expert = body.at("expert").get<std::size_t>();
  if (body.contains("total") && body.at("total").get<std::size_t>() != stats.total()) {
    throw ConfigError("stats record total does not match per-stage counts");
  }
  return stats;
}

}  // namespace

void write_mixture(const MixtureDataset& dataset, const std::string& path,
                   const FileHeader& header) {
  validate_dataset(dataset);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << dump_record(header_to_json(header)) << '\n';
  out << dump_record(stats_to_json(dataset.stats)) << '\n';
  for (const auto& example : dataset.examples) {
    out << dump_record(example_to_json(example)) << '\n';
  }
  if (!out) throw IoError("write failure: " + path);
}

MixtureDataset read_mixture(const std::string& path, FileHeader* header_out) {
  MixtureDataset dataset;
  bool have_header = false;
  bool have_stats = false;
  for_each_jsonl_record(path, [&](std::size_t line_number, const json& record) {
    if (!have_header) {
      if (!is_header_record(record)) {
        throw ConfigError("missing header record at line " + std::to_string(line_number) + " of " + path);
      }
      FileHeader header = header_from_json(record);
      if (header_out) *header_out = header;
      have_header = true;
      return;
    }
    if (!have_stats) {
      if (!record.contains("stats")) {
        throw ConfigError("missing stats record at line " + std::to_string(line_number) + " of " + path);
      }
      dataset.stats = stats_from_json(record);
      have_stats = true;
      return;
    }
    dataset.examples.push_back(example_from_json(record));
  });
  if (!have_header || !have_stats) {
    throw ConfigError("mixture file lacks header or stats record: " + path);
  }
  validate_dataset(dataset);
  return dataset;
}

}  // namespace palign
