#include "palign/analytics.hpp"

#include "palign/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace palign {

using nlohmann::json;

std::string to_string(GapSource source) {
  return source == GapSource::OriginalSFT ? "original_sft" : "rewritten";
}

std::string to_string(Aggregation aggregation) {
  return aggregation == Aggregation::PerSequenceSum ? "seq" : "token";
}

Aggregation aggregation_from_string(const std::string& name) {
  if (name == "seq") return Aggregation::PerSequenceSum;
  if (name == "token") return Aggregation::PerToken;
  throw ConfigError("unknown aggregation: " + name + " (expected seq|token)");
}

ReportFormat report_format_from_string(const std::string& name) {
  if (name == "table-text") return ReportFormat::TableText;
  if (name == "line-records") return ReportFormat::LineRecords;
  if (name == "plot-series") return ReportFormat::PlotSeries;
  throw ConfigError("unknown report format: " + name);
}

namespace {

struct CellAccumulator {
  double sum = 0.0;
  std::size_t scored = 0;
  std::size_t failed = 0;

  void add(PolicyClient& client, const std::string& prompt, const std::string& completion,
           Aggregation aggregation) {
    try {
      const auto logprobs = client.score_logprobs(prompt, completion);
      double value = std::accumulate(logprobs.begin(), logprobs.end(), 0.0);
      if (aggregation == Aggregation::PerToken && !logprobs.empty()) {
        value /= static_cast<double>(logprobs.size());
      }
      sum += value;
      ++scored;
    } catch (const CapabilityError&) {
      throw;  // a non-scoring endpoint is a config problem, not a row-level failure
    } catch (const Error&) {
      ++failed;
    }
  }
};

}  // namespace

std::vector<PolicyGapReport> gap_report(const MixtureDataset& dataset,
                                        const std::vector<Problem>& original,
                                        PolicyClient& client, Aggregation aggregation) {
  std::unordered_map<std::string, const Problem*> problems_by_id;
  for (const auto& problem : original) problems_by_id[problem.id] = &problem;

  // (subset, source) -> accumulator; expert has no rewritten cell.
  CellAccumulator cells[3][2];
  auto subset_index = [](Provenance provenance) {
    switch (provenance) {
      case Provenance::SelfAlign: return 0;
      case Provenance::Retell: return 1;
      case Provenance::Expert: return 2;
    }
    return 2;
  };

  for (const auto& example : dataset.examples) {
    auto it = problems_by_id.find(example.problem_id);
    if (it == problems_by_id.end()) {
      throw ConfigError("dataset example " + example.problem_id + " is not in the corpus");
    }
    const Problem& problem = *it->second;
    const int s = subset_index(example.provenance);
    cells[s][0].add(client, example.prompt, problem.expert_solution, aggregation);
    if (example.provenance != Provenance::Expert) {
      cells[s][1].add(client, example.prompt, example.response, aggregation);
    }
  }

  std::vector<PolicyGapReport> rows;
  const Provenance subsets[3] = {Provenance::SelfAlign, Provenance::Retell, Provenance::Expert};
  for (int s = 0; s < 3; ++s) {
    for (int src = 0; src < 2; ++src) {
      if (subsets[s] == Provenance::Expert && src == 1) continue;
      const CellAccumulator& cell = cells[s][src];
      if (cell.scored == 0 && cell.failed == 0) continue;  // empty subset: no row
      PolicyGapReport row;
      row.subset = subsets[s];
      row.source = src == 0 ? GapSource::OriginalSFT : GapSource::Rewritten;
      row.num_examples = cell.scored;
      row.num_failed = cell.failed;
      row.avg_logprob = cell.scored > 0 ? cell.sum / static_cast<double>(cell.scored) : 0.0;
      row.aggregation = aggregation;
      rows.push_back(row);
    }
  }
  return rows;
}

StageStats stats_table(const MixtureDataset& dataset) { return recount(dataset.examples); }

std::string render_stats_table(const StageStats& stats) {
  std::ostringstream out;
  out << "stage        count\n";
  out << "self_align   " << stats.self_align << "\n";
  out << "retell       " << stats.retell << "\n";
  out << "expert       " << stats.expert << "\n";
  out << "total        " << stats.total() << "\n";
  return out.str();
}

namespace {

const PolicyGapReport* find_row(const std::vector<PolicyGapReport>& rows, Provenance subset,
                                GapSource source) {
  for (const auto& row : rows) {
    if (row.subset == subset && row.source == source && row.num_examples > 0) return &row;
  }
  return nullptr;
}

}  // namespace

GapFlags analyze_gap(const std::vector<PolicyGapReport>& rows) {
  GapFlags flags;
  if (const auto* sft = find_row(rows, Provenance::SelfAlign, GapSource::OriginalSFT)) {
    if (const auto* rewritten = find_row(rows, Provenance::SelfAlign, GapSource::Rewritten)) {
      flags.gap_closed_self_align = rewritten->avg_logprob > sft->avg_logprob;
    }
  }
  if (const auto* sft = find_row(rows, Provenance::Retell, GapSource::OriginalSFT)) {
    if (const auto* rewritten = find_row(rows, Provenance::Retell, GapSource::Rewritten)) {
      flags.gap_closed_retell = rewritten->avg_logprob > sft->avg_logprob;
    }
  }
  const auto* self_sft = find_row(rows, Provenance::SelfAlign, GapSource::OriginalSFT);
  const auto* retell_sft = find_row(rows, Provenance::Retell, GapSource::OriginalSFT);
  const auto* expert_sft = find_row(rows, Provenance::Expert, GapSource::OriginalSFT);
  if (self_sft && retell_sft && expert_sft) {
    flags.difficulty_ordering = self_sft->avg_logprob > retell_sft->avg_logprob &&
                                retell_sft->avg_logprob > expert_sft->avg_logprob;
  }
  return flags;
}

namespace {

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string flag_text(const std::optional<bool>& flag) {
  if (!flag.has_value()) return "n/a";
  return *flag ? "yes" : "no";
}

}  // namespace

void emit_report(const std::vector<PolicyGapReport>& rows, ReportFormat format,
                 const std::string& path, const FileHeader& header) {
  if (rows.empty()) throw ConfigError("emit_report requires at least one row");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);

  switch (format) {
    case ReportFormat::TableText: {
      const GapFlags flags = analyze_gap(rows);
      out << "# config_digest=" << header.config_digest << " created_at=" << header.created_at
          << "\n";
      out << "subset      source        n       failed  avg_logprob\n";
      for (const auto& row : rows) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-11s %-13s %-7zu %-7zu %s\n",
                      to_string(row.subset).c_str(), to_string(row.source).c_str(),
                      row.num_examples, row.num_failed, format_double(row.avg_logprob).c_str());
        out << line;
      }
      out << "gap_closed(self_align)=" << flag_text(flags.gap_closed_self_align)
          << " gap_closed(retell)=" << flag_text(flags.gap_closed_retell)
          << " difficulty_ordering=" << flag_text(flags.difficulty_ordering) << "\n";
      break;
    }
    case ReportFormat::LineRecords: {
      out << dump_record(header_to_json(header)) << '\n';
      for (const auto& row : rows) {
        json record{{"subset", to_string(row.subset)},
                    {"source", to_string(row.source)},
                    {"avg_logprob", row.avg_logprob},
                    {"num_examples", row.num_examples},
                    {"num_failed", row.num_failed},
                    {"aggregation", to_string(row.aggregation)}};
        out << dump_record(record) << '\n';
      }
      break;
    }
    case ReportFormat::PlotSeries: {
      out << dump_record(header_to_json(header)) << '\n';
      for (const auto& row : rows) {
        json record{{"x", to_string(row.subset)},
                    {"y", row.avg_logprob},
                    {"group", to_string(row.source)}};
        out << dump_record(record) << '\n';
      }
      break;
    }
  }
  if (!out) throw IoError("write failure: " + path);
}

}  // namespace palign
