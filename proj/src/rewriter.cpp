#include "palign/rewriter.hpp"

#include "palign/errors.hpp"
#include "palign/records.hpp"
#include "palign/util.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace palign {

using nlohmann::json;

namespace {

constexpr std::string_view kStatementSlot = "{statement}";
constexpr std::string_view kReferenceSlot = "{reference_solution}";

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string_view::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

std::string replace_once(std::string text, std::string_view slot, const std::string& value) {
  std::size_t pos = text.find(slot);
  if (pos != std::string::npos) text.replace(pos, slot.size(), value);
  return text;
}

void default_log(const std::string& message) { std::cerr << message << '\n'; }

}  // namespace

RetellPromptTemplate RetellPromptTemplate::builtin() {
  RetellPromptTemplate tmpl;
  tmpl.name = "digest-and-retell";
  tmpl.version = "1";
  tmpl.text =
      "You are given a problem and a reference solution. Study the reference solution until\n"
      "you understand it fully, then solve the problem again in your own words. Do not copy\n"
      "the reference solution verbatim. Show your reasoning step by step and finish with your\n"
      "final answer in \\boxed{}.\n"
      "\n"
      "Problem:\n"
      "{statement}\n"
      "\n"
      "Reference solution:\n"
      "{reference_solution}\n";
  return tmpl;
}

RetellPromptTemplate RetellPromptTemplate::from_file(const std::string& path) {
  RetellPromptTemplate tmpl;
  tmpl.text = read_text_file(path);
  tmpl.name = std::filesystem::path(path).stem().string();
  tmpl.version = to_hex(fnv1a64(tmpl.text));
  tmpl.validate();
  return tmpl;
}

void RetellPromptTemplate::validate() const {
  if (count_occurrences(text, kStatementSlot) != 1) {
    throw ConfigError("retell template '" + name + "' must contain {statement} exactly once");
  }
  if (count_occurrences(text, kReferenceSlot) != 1) {
    throw ConfigError("retell template '" + name +
                      "' must contain {reference_solution} exactly once");
  }
}

std::string RetellPromptTemplate::render(const Problem& problem) const {
  validate();
  std::string out = replace_once(text, kStatementSlot, problem.statement);
  return replace_once(std::move(out), kReferenceSlot, problem.expert_solution);
}

std::string render_problem_prompt(const Problem& problem, const std::string& prompt_template) {
  if (count_occurrences(prompt_template, kStatementSlot) == 0) {
    throw ConfigError("problem prompt template must contain {statement}");
  }
  std::string out = prompt_template;
  std::size_t pos = 0;
  while ((pos = out.find(kStatementSlot, pos)) != std::string::npos) {
    out.replace(pos, kStatementSlot.size(), problem.statement);
    pos += problem.statement.size();
  }
  return out;
}

json outcome_to_json(const StageOutcome& outcome) {
  return json{{"problem_id", outcome.problem_id},
              {"stage_reached", to_string(outcome.stage_reached)},
              {"self_correct_count", outcome.self_correct_count},
              {"retell_correct_count", outcome.retell_correct_count},
              {"rng_draw", outcome.rng_draw},
              {"error_fallback", outcome.error_fallback}};
}

StageOutcome outcome_from_json(const json& record) {
  StageOutcome outcome;
  outcome.problem_id = record.at("problem_id").get<std::string>();
  outcome.stage_reached = provenance_from_string(record.at("stage_reached").get<std::string>());
  outcome.self_correct_count = record.at("self_correct_count").get<std::size_t>();
  outcome.retell_correct_count = record.at("retell_correct_count").get<std::size_t>();
  outcome.rng_draw = record.at("rng_draw").get<std::uint64_t>();
  outcome.error_fallback = record.value("error_fallback", false);
  return outcome;
}

namespace {

struct StageRun {
  StageAttempt attempt;
  bool transport_failed = false;
  std::string failure;
};

StageRun run_stage(const Problem& problem, PolicyClient& client, const RewriteOptions& options,
                   const std::string& sample_prompt, const std::string& stored_prompt,
                   Provenance provenance, std::string_view stream_tag) {
  StageRun run;
  std::vector<Candidate> candidates;
  try {
    candidates = client.sample(sample_prompt, options.sampling);
  } catch (const Error& error) {
    run.transport_failed = true;
    run.failure = error.what();
    return run;
  }

  std::vector<std::size_t> correct;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].finish_reason == FinishReason::Error) continue;
    if (verify(candidates[i].text, problem.gold_answer, options.verifier)) {
      correct.push_back(i);
    }
  }
  run.attempt.correct_count = correct.size();
  if (correct.empty()) return run;

  std::mt19937_64 rng(substream_seed(options.seed, problem.id, stream_tag));
  const UniformDraw draw = uniform_index(rng, correct.size());
  run.attempt.rng_draw = draw.raw;

  const std::size_t chosen = correct[draw.index];
  RewrittenExample example;
  example.problem_id = problem.id;
  example.prompt = stored_prompt;
  example.response = candidates[chosen].text;
  example.provenance = provenance;
  example.num_candidates_sampled = options.sampling.num_samples;
  example.num_correct = correct.size();
  example.selected_index = chosen;
  example.response_token_count = whitespace_token_count(example.response);
  run.attempt.example = std::move(example);
  return run;
}

}  // namespace

StageAttempt self_align(const Problem& problem, PolicyClient& client,
                        const RewriteOptions& options) {
  const std::string prompt = render_problem_prompt(problem, options.problem_prompt_template);
  StageRun run = run_stage(problem, client, options, prompt, prompt, Provenance::SelfAlign, "self");
  if (run.transport_failed) {
    throw BatchError("self-align sampling failed for problem " + problem.id + ": " + run.failure,
                     {run.failure});
  }
  return run.attempt;
}

StageAttempt guided_align(const Problem& problem, PolicyClient& client,
                          const RewriteOptions& options) {
  options.retell_template.validate();
  const std::string stored_prompt =
      render_problem_prompt(problem, options.problem_prompt_template);
  const std::string retell_prompt = options.retell_template.render(problem);
  StageRun run = run_stage(problem, client, options, retell_prompt, stored_prompt,
                           Provenance::Retell, "retell");
  if (run.transport_failed) {
    throw BatchError("guided-align sampling failed for problem " + problem.id + ": " + run.failure,
                     {run.failure});
  }
  if (run.attempt.example) {
    // Both stages sampled k candidates by the time a retell is retained.
    run.attempt.example->num_candidates_sampled = 2 * options.sampling.num_samples;
  }
  return run.attempt;
}

namespace {

struct LedgerLine {
  StageOutcome outcome;
  RewrittenExample example;
};

std::vector<LedgerLine> load_checkpoint(const std::string& path, const std::string& config_digest) {
  std::vector<LedgerLine> lines;
  bool have_header = false;
  for_each_jsonl_record(path, [&](std::size_t line_number, const json& record) {
    if (!have_header) {
      if (!is_header_record(record)) {
        throw ConfigError("checkpoint ledger lacks a header record: " + path);
      }
      FileHeader header = header_from_json(record);
      if (!config_digest.empty() && !header.config_digest.empty() &&
          header.config_digest != config_digest) {
        throw ConfigError("checkpoint ledger was written under a different config (digest " +
                          header.config_digest + " vs " + config_digest + ")");
      }
      have_header = true;
      return;
    }
    LedgerLine line;
    line.outcome = outcome_from_json(record.at("outcome"));
    line.example = example_from_json(record.at("example"));
    if (line.outcome.problem_id != line.example.problem_id) {
      throw ConfigError("checkpoint line " + std::to_string(line_number) +
                        " has mismatched problem ids");
    }
    lines.push_back(std::move(line));
  });
  return lines;
}

}  // namespace

RewriteResult rewrite_corpus(const std::vector<Problem>& problems, PolicyClient& client,
                             const RewriteOptions& options) {
  validate(options.sampling);
  options.retell_template.validate();
  const auto log = options.log ? options.log : default_log;

  RewriteResult result;
  result.dataset.examples.reserve(problems.size());
  std::size_t start_index = 0;

  const bool checkpointing = !options.checkpoint_path.empty();
  if (checkpointing && std::filesystem::exists(options.checkpoint_path)) {
    auto lines = load_checkpoint(options.checkpoint_path, options.config_digest);
    if (lines.size() > problems.size()) {
      throw ConfigError("checkpoint ledger has more problems than the corpus");
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].outcome.problem_id != problems[i].id) {
        throw ConfigError("checkpoint ledger diverges from the corpus at problem " +
                          problems[i].id);
      }
      result.dataset.examples.push_back(std::move(lines[i].example));
      result.outcomes.push_back(std::move(lines[i].outcome));
    }
    start_index = lines.size();
    result.resumed_problems = start_index;
  }

  std::ofstream ledger;
  if (checkpointing) {
    const bool fresh = start_index == 0;
    ledger.open(options.checkpoint_path,
                std::ios::binary | (fresh ? std::ios::trunc : std::ios::app));
    if (!ledger) throw IoError("cannot open checkpoint ledger: " + options.checkpoint_path);
    if (fresh) {
      ledger << dump_record(header_to_json(FileHeader::make(options.config_digest))) << '\n';
      ledger.flush();
    }
  }

  for (std::size_t i = start_index; i < problems.size(); ++i) {
    if (options.stop_after > 0 && result.dataset.examples.size() >= options.stop_after) {
      result.stopped_early = true;
      break;
    }
    const Problem& problem = problems[i];
    const std::string prompt = render_problem_prompt(problem, options.problem_prompt_template);

    StageOutcome outcome;
    outcome.problem_id = problem.id;
    RewrittenExample example;
    std::size_t sampled_total = 0;

    try {
      StageRun self = run_stage(problem, client, options, prompt, prompt, Provenance::SelfAlign,
                                "self");
      if (self.transport_failed) {
        log("problem " + problem.id + ": self-align transport failure, falling back to expert (" +
            self.failure + ")");
        outcome.error_fallback = true;
      } else {
        sampled_total += options.sampling.num_samples;
        outcome.self_correct_count = self.attempt.correct_count;
        if (self.attempt.example) {
          outcome.stage_reached = Provenance::SelfAlign;
          outcome.rng_draw = self.attempt.rng_draw;
          example = std::move(*self.attempt.example);
        }
      }

      if (!outcome.error_fallback && !example.selected_index.has_value() &&
          outcome.stage_reached != Provenance::SelfAlign) {
        const std::string retell_prompt = options.retell_template.render(problem);
        StageRun retell = run_stage(problem, client, options, retell_prompt, prompt,
                                    Provenance::Retell, "retell");
        if (retell.transport_failed) {
          log("problem " + problem.id +
              ": guided-align transport failure, falling back to expert (" + retell.failure + ")");
          outcome.error_fallback = true;
        } else {
          sampled_total += options.sampling.num_samples;
          outcome.retell_correct_count = retell.attempt.correct_count;
          if (retell.attempt.example) {
            outcome.stage_reached = Provenance::Retell;
            outcome.rng_draw = retell.attempt.rng_draw;
            example = std::move(*retell.attempt.example);
            example.num_candidates_sampled = sampled_total;
          }
        }
      }
    } catch (const Error& error) {
      log("problem " + problem.id + ": unrecoverable client error, falling back to expert (" +
          error.what() + ")");
      outcome.error_fallback = true;
    }

    if (outcome.stage_reached == Provenance::Expert || !example.selected_index.has_value()) {
      outcome.stage_reached = Provenance::Expert;
      example = RewrittenExample{};
      example.problem_id = problem.id;
      example.prompt = prompt;
      example.response = problem.expert_solution;
      example.provenance = Provenance::Expert;
      example.num_candidates_sampled = sampled_total;
      example.num_correct = 0;
      example.selected_index = std::nullopt;
      example.response_token_count = whitespace_token_count(problem.expert_solution);
    }

    if (checkpointing) {
      ledger << dump_record(
                    json{{"outcome", outcome_to_json(outcome)}, {"example", example_to_json(example)}})
             << '\n';
      ledger.flush();
      if (!ledger) throw IoError("write failure on checkpoint ledger");
    }
    result.dataset.examples.push_back(std::move(example));
    result.outcomes.push_back(std::move(outcome));
  }

  result.dataset.stats = recount(result.dataset.examples);
  if (!result.stopped_early) {
    if (result.dataset.examples.size() != problems.size()) {
      throw ConfigError("rewrite did not produce one example per problem");
    }
    validate_dataset(result.dataset);
  }
  return result;
}

}  // namespace palign
