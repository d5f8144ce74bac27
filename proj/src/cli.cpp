#include "palign/cli.hpp"

#include "palign/analytics.hpp"
#include "palign/corpus.hpp"
#include "palign/errors.hpp"
#include "palign/http_backend.hpp"
#include "palign/loss_kernel.hpp"
#include "palign/mock_backend.hpp"
#include "palign/policy_client.hpp"
#include "palign/rewriter.hpp"
#include "palign/run_config.hpp"
#include "palign/util.hpp"
#include "palign/verifier.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>

namespace palign {

namespace {

namespace fs = std::filesystem;

// Documented exit codes; CLI11 usage errors keep their own codes.
constexpr int kExitOk = 0;
constexpr int kExitVerifyFalse = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitClient = 4;
constexpr int kExitVerifierCorpus = 5;
constexpr int kExitNumeric = 6;

constexpr double kGradCheckThreshold = 1e-5;

struct CommonArgs {
  std::string config_path;
  std::string corpus_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool quiet = false;
};

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig config;
  if (!args.config_path.empty()) config = RunConfig::from_file(args.config_path);
  if (!args.corpus_path.empty()) config.corpus_path = args.corpus_path;
  if (!args.out_dir.empty()) config.output_dir = args.out_dir;
  if (args.seed_given) config.seed = args.seed;
  return config;
}

void require_corpus(const RunConfig& config) {
  if (config.corpus_path.empty()) {
    throw ConfigError("a corpus path is required (config corpus_path or --corpus)");
  }
  if (!fs::exists(config.corpus_path)) {
    throw ConfigError("corpus path does not exist: " + config.corpus_path);
  }
}

void require_output_dir(const RunConfig& config) {
  if (config.output_dir.empty()) {
    throw ConfigError("an output directory is required (config output_dir or --out)");
  }
}

void require_seed(const RunConfig& config) {
  if (!config.seed.has_value()) {
    throw ConfigError("a seed is required (config seed or --seed); runs must be deterministic");
  }
}

void check_referenced_paths(const RunConfig& config) {
  if (!config.template_path.empty() && !fs::exists(config.template_path)) {
    throw ConfigError("template path does not exist: " + config.template_path);
  }
  if (!config.mock_fixture.empty() && !fs::exists(config.mock_fixture)) {
    throw ConfigError("mock fixture does not exist: " + config.mock_fixture);
  }
}

std::unique_ptr<PolicyClient> make_client(const RunConfig& config) {
  std::shared_ptr<Transport> transport;
  if (!config.mock_fixture.empty()) {
    transport = std::make_shared<MockTransport>(MockFixture::from_file(config.mock_fixture));
  } else if (!config.endpoint.endpoint_url.empty()) {
    transport = make_http_transport(config.endpoint);
  } else {
    throw ConfigError("no backend configured: set endpoint.endpoint_url or endpoint.mock_fixture");
  }
  return std::make_unique<PolicyClient>(std::move(transport), config.endpoint);
}

RetellPromptTemplate load_template(const RunConfig& config) {
  if (config.template_path.empty()) return RetellPromptTemplate::builtin();
  return RetellPromptTemplate::from_file(config.template_path);
}

std::string out_path(const RunConfig& config, const std::string& name) {
  return (fs::path(config.output_dir) / name).string();
}

int run_ingest(const CommonArgs& args) {
  RunConfig config = resolve_config(args);
  require_corpus(config);
  require_output_dir(config);
  check_referenced_paths(config);
  const std::string digest = config.digest();

  FilterReport report;
  auto problems = ingest_corpus(config.corpus_path, config.max_tokens, &report);

  fs::create_directories(config.output_dir);
  write_problems(problems, out_path(config, "problems.jsonl"), FileHeader::make(digest));
  nlohmann::json report_json{{"kept", report.kept},
                             {"dropped", report.dropped},
                             {"dropped_ids", report.dropped_ids},
                             {"config_digest", digest}};
  write_text_file(out_path(config, "ingest_report.json"), report_json.dump(2) + "\n");
  if (!args.quiet) {
    std::cout << "kept=" << report.kept << " dropped=" << report.dropped << "\n";
  }
  return kExitOk;
}

struct RewriteArgs {
  CommonArgs common;
  std::string template_path;
  std::size_t k = 0;
  double temperature = -1.0;
};

int run_rewrite(const RewriteArgs& args) {
  RunConfig config = resolve_config(args.common);
  if (!args.template_path.empty()) config.template_path = args.template_path;
  if (args.k > 0) config.sampling.num_samples = args.k;
  if (args.temperature >= 0.0) config.sampling.temperature = args.temperature;
  require_corpus(config);
  require_output_dir(config);
  require_seed(config);
  check_referenced_paths(config);
  validate(config.sampling);
  const std::string digest = config.digest();

  auto problems = ingest_corpus(config.corpus_path, config.max_tokens);
  auto client = make_client(config);

  fs::create_directories(config.output_dir);
  RewriteOptions options;
  options.sampling = config.sampling;
  options.retell_template = load_template(config);
  options.problem_prompt_template = config.problem_prompt_template;
  options.seed = *config.seed;
  options.checkpoint_path = out_path(config, "rewrite.ckpt");
  options.config_digest = digest;
  if (args.common.quiet) options.log = [](const std::string&) {};

  RewriteResult result = rewrite_corpus(problems, *client, options);
  write_mixture(result.dataset, out_path(config, "mixture.jsonl"), FileHeader::make(digest));
  if (!args.common.quiet) {
    std::cout << render_stats_table(result.dataset.stats);
    if (result.resumed_problems > 0) {
      std::cout << "resumed=" << result.resumed_problems << "\n";
    }
  }
  return kExitOk;
}

struct VerifyArgs {
  std::string response_file;
  std::string gold;
  std::string corpus_path;
  bool quiet = false;
};

int run_verify(const VerifyArgs& args) {
  if (!args.corpus_path.empty()) {
    auto cases = load_verifier_corpus(args.corpus_path);
    auto result = run_verifier_corpus(cases);
    if (!args.quiet) {
      std::cout << "agreed " << result.agreed << "/" << result.total << "\n";
      for (const auto& miss : result.disagreements) {
        std::cout << "disagreement at line " << miss.line << ": gold='" << miss.gold
                  << "' expected=" << (miss.expected ? "true" : "false") << "\n";
      }
    }
    return result.disagreements.empty() ? kExitOk : kExitVerifierCorpus;
  }
  if (args.response_file.empty()) {
    throw ConfigError("verify needs --response-file with --gold, or --corpus");
  }
  const std::string response = read_text_file(args.response_file);
  const bool ok = verify(response, args.gold);
  if (!args.quiet) std::cout << (ok ? "correct" : "incorrect") << "\n";
  return ok ? kExitOk : kExitVerifyFalse;
}

int run_stats(const std::string& dataset_path, bool quiet) {
  MixtureDataset dataset = read_mixture(dataset_path);
  if (!quiet) std::cout << render_stats_table(stats_table(dataset));
  return kExitOk;
}

struct ReportArgs {
  CommonArgs common;
  std::string dataset_path;
  std::string aggregation;
};

int run_report(const ReportArgs& args) {
  RunConfig config = resolve_config(args.common);
  if (!args.aggregation.empty()) config.aggregation = aggregation_from_string(args.aggregation);
  require_corpus(config);
  require_output_dir(config);
  check_referenced_paths(config);
  if (args.dataset_path.empty()) throw ConfigError("report needs --dataset");
  const std::string digest = config.digest();

  MixtureDataset dataset = read_mixture(args.dataset_path);
  auto problems = ingest_corpus(config.corpus_path, config.max_tokens);
  auto client = make_client(config);

  auto rows = gap_report(dataset, problems, *client, config.aggregation);
  fs::create_directories(config.output_dir);
  const FileHeader header = FileHeader::make(digest);
  emit_report(rows, ReportFormat::TableText, out_path(config, "gap_report.txt"), header);
  emit_report(rows, ReportFormat::LineRecords, out_path(config, "gap_report.jsonl"), header);
  emit_report(rows, ReportFormat::PlotSeries, out_path(config, "gap_report_plot.jsonl"), header);
  if (!args.common.quiet) {
    std::cout << read_text_file(out_path(config, "gap_report.txt"));
  }
  return kExitOk;
}

struct ExportArgs {
  CommonArgs common;
  std::string dataset_path;
};

int run_export_weights(const ExportArgs& args) {
  RunConfig config = resolve_config(args.common);
  require_output_dir(config);
  check_referenced_paths(config);
  if (args.dataset_path.empty()) throw ConfigError("export-weights needs --dataset");
  const std::string digest = config.digest();

  MixtureDataset dataset = read_mixture(args.dataset_path);
  auto client = make_client(config);

  std::vector<ExampleScores> scores;
  scores.reserve(dataset.examples.size());
  for (const auto& example : dataset.examples) {
    scores.push_back({example.problem_id,
                      client->score_logprobs(example.prompt, example.response)});
  }
  fs::create_directories(config.output_dir);
  export_weights(dataset, scores, out_path(config, "weights.jsonl"), FileHeader::make(digest));
  if (!args.common.quiet) {
    std::cout << "exported weights for " << dataset.examples.size() << " examples\n";
  }
  return kExitOk;
}

struct GradCheckArgs {
  std::string objective = "dft";
  std::size_t trials = 100;
  double epsilon = 1e-5;
  std::uint64_t seed = 20240704;
  bool quiet = false;
};

int run_gradcheck(const GradCheckArgs& args) {
  const Objective objective = objective_from_string(args.objective);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < args.trials; ++trial) {
    const std::size_t vocab = 4 + trial % 3;
    MicroModel model = MicroModel::random(vocab, args.seed + trial);
    MicroModel mix = MicroModel::random(vocab, args.seed + trial + 0x9E37ull);
    auto batch = random_batch(vocab, 3 + trial % 3, 6, args.seed * 31 + trial);
    GradCheckOptions options;
    options.epsilon = args.epsilon;
    const double err = grad_check(model, batch, objective, options,
                                  objective == Objective::IS ? &mix : nullptr);
    worst = std::max(worst, err);
  }
  const bool pass = worst < kGradCheckThreshold;
  if (!args.quiet) {
    std::cout << "objective=" << args.objective << " trials=" << args.trials
              << " max_rel_err=" << worst << " threshold=" << kGradCheckThreshold << " "
              << (pass ? "PASS" : "FAIL") << "\n";
  }
  return pass ? kExitOk : kExitNumeric;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_corpus = true) {
  cmd->add_option("--config", args.config_path, "run configuration file (JSON)");
  if (with_corpus) cmd->add_option("--corpus", args.corpus_path, "problem corpus (JSONL)");
  cmd->add_option("--out", args.out_dir, "output directory");
  auto* seed = cmd->add_option("--seed", args.seed, "run seed");
  cmd->parse_complete_callback([seed, &args] { args.seed_given = seed->count() > 0; });
  cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"policy-aligned SFT data rewriting toolkit"};
  app.require_subcommand(1);

  CommonArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "filter a corpus and persist it");
  add_common(ingest_cmd, ingest_args);

  RewriteArgs rewrite_args;
  auto* rewrite_cmd =
      app.add_subcommand("rewrite", "route problems through the three-stage rewriter");
  add_common(rewrite_cmd, rewrite_args.common);
  rewrite_cmd->add_option("--template", rewrite_args.template_path, "retell template file");
  rewrite_cmd->add_option("--k", rewrite_args.k, "candidates per stage");
  rewrite_cmd->add_option("--temperature", rewrite_args.temperature, "sampling temperature");

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "check a response against a gold answer");
  verify_cmd->add_option("--response-file", verify_args.response_file, "file with the response");
  verify_cmd->add_option("--gold", verify_args.gold, "gold answer");
  verify_cmd->add_option("--corpus", verify_args.corpus_path,
                         "TSV corpus of (response, gold, expected) triples");
  verify_cmd->add_flag("--quiet", verify_args.quiet, "suppress output");

  std::string stats_dataset;
  bool stats_quiet = false;
  auto* stats_cmd = app.add_subcommand("stats", "stage-count table of a mixture dataset");
  stats_cmd->add_option("--dataset", stats_dataset, "mixture dataset (JSONL)")->required();
  stats_cmd->add_flag("--quiet", stats_quiet, "suppress output");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "policy-gap report over a mixture dataset");
  add_common(report_cmd, report_args.common);
  report_cmd->add_option("--dataset", report_args.dataset_path, "mixture dataset (JSONL)");
  report_cmd->add_option("--aggregation", report_args.aggregation, "seq|token");

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export-weights", "per-token importance weights");
  add_common(export_cmd, export_args.common, /*with_corpus=*/false);
  export_cmd->add_option("--dataset", export_args.dataset_path, "mixture dataset (JSONL)");

  GradCheckArgs gradcheck_args;
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference check of the loss gradients");
  gradcheck_cmd->add_option("--objective", gradcheck_args.objective, "ce|dft|is");
  gradcheck_cmd->add_option("--trials", gradcheck_args.trials, "number of random fixtures");
  gradcheck_cmd->add_option("--epsilon", gradcheck_args.epsilon, "finite-difference step");
  gradcheck_cmd->add_option("--seed", gradcheck_args.seed, "fixture seed");
  gradcheck_cmd->add_flag("--quiet", gradcheck_args.quiet, "suppress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    return app.exit(error);
  }

  try {
    if (ingest_cmd->parsed()) return run_ingest(ingest_args);
    if (rewrite_cmd->parsed()) return run_rewrite(rewrite_args);
    if (verify_cmd->parsed()) return run_verify(verify_args);
    if (stats_cmd->parsed()) return run_stats(stats_dataset, stats_quiet);
    if (report_cmd->parsed()) return run_report(report_args);
    if (export_cmd->parsed()) return run_export_weights(export_args);
    if (gradcheck_cmd->parsed()) return run_gradcheck(gradcheck_args);
    throw ConfigError("no subcommand given");
  } catch (const ConfigError& error) {
    std::cerr << "config error: " << error.what() << "\n";
    return kExitConfig;
  } catch (const IoError& error) {
    std::cerr << "io error: " << error.what() << "\n";
    return kExitIo;
  } catch (const CapabilityError& error) {
    std::cerr << "capability error: " << error.what() << "\n";
    return kExitClient;
  } catch (const BatchError& error) {
    std::cerr << "client error: " << error.what() << "\n";
    return kExitClient;
  } catch (const TransientError& error) {
    std::cerr << "client error: " << error.what() << "\n";
    return kExitClient;
  } catch (const NumericError& error) {
    std::cerr << "numeric error: " << error.what() << "\n";
    return kExitNumeric;
  } catch (const Error& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace palign
