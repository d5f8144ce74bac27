#pragma once

#include <optional>
#include <string>
#include <vector>

#include "palign/corpus.hpp"
#include "palign/policy_client.hpp"
#include "palign/records.hpp"

namespace palign {

enum class GapSource { OriginalSFT, Rewritten };
std::string to_string(GapSource source);

enum class Aggregation { PerSequenceSum, PerToken };
std::string to_string(Aggregation aggregation);
Aggregation aggregation_from_string(const std::string& name);

/// One cell of the policy-gap table: average log-probability of either the
/// original demonstrations or the rewritten responses within a stage subset.
struct PolicyGapReport {
  Provenance subset = Provenance::Expert;
  GapSource source = GapSource::OriginalSFT;
  double avg_logprob = 0.0;
  std::size_t num_examples = 0;  // successfully scored
  std::size_t num_failed = 0;    // scoring failures, never silently dropped
  Aggregation aggregation = Aggregation::PerSequenceSum;
};

/// Scores both the original demonstration and (for rewritten subsets) the
/// rewritten response under the target policy, conditioned on the stored
/// prompt. The expert subset has only its OriginalSFT cell: there the fallback
/// data coincides with the demonstrations.
std::vector<PolicyGapReport> gap_report(const MixtureDataset& dataset,
                                        const std::vector<Problem>& original,
                                        PolicyClient& client,
                                        Aggregation aggregation = Aggregation::PerSequenceSum);

StageStats stats_table(const MixtureDataset& dataset);
std::string render_stats_table(const StageStats& stats);

/// Empirical orderings, reported rather than asserted: live-model properties,
/// not artifact invariants.
struct GapFlags {
  std::optional<bool> gap_closed_self_align;  // Rewritten > OriginalSFT within the subset
  std::optional<bool> gap_closed_retell;
  std::optional<bool> difficulty_ordering;  // SFT: self_align > retell > expert
};

GapFlags analyze_gap(const std::vector<PolicyGapReport>& rows);

enum class ReportFormat { TableText, LineRecords, PlotSeries };
ReportFormat report_format_from_string(const std::string& name);

/// Deterministic serialization; plot-series emits (x=subset, y=avg_logprob,
/// group=source) triples for external plotting.
void emit_report(const std::vector<PolicyGapReport>& rows, ReportFormat format,
                 const std::string& path, const FileHeader& header);

}  // namespace palign
