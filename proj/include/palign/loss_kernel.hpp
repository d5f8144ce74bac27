#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "palign/corpus.hpp"
#include "palign/records.hpp"

namespace palign {

/// Per-token weight as consumed by trainers. The weight is a value only: the
/// stop-gradient marker records that gradients never flow through it.
struct TokenWeightRecord {
  std::size_t position = 0;
  double target_prob = 0.0;  // p_t, in (0, 1]
  double weight = 0.0;       // p_t / mix_t, or p_t under the mix~1 approximation
  bool gradient_blocked = true;
};

enum class Objective { CE, DFT, IS };
Objective objective_from_string(const std::string& name);
std::string to_string(Objective objective);

enum class Reduction { SumTokensMeanExamples, MeanTokensMeanExamples };

/// -sum_t ln p_t. Domain error unless every p in (0, 1].
double ce_loss(std::span<const double> token_probs);

struct WeightedLoss {
  double loss = 0.0;
  std::vector<TokenWeightRecord> weights;
};

/// -sum_t w_t ln p_t with w_t = p_t/mix_t, or w_t = p_t when mix_probs is
/// absent (the mix~1 approximation; identical to DFT weighting). Weights are
/// plain values; the caller's gradients must treat them as constants.
WeightedLoss is_weighted_loss(std::span<const double> token_probs,
                              std::optional<std::span<const double>> mix_probs = std::nullopt);

/// Context-conditioned categorical next-token model (bigram order): row r of
/// the logits table is the unnormalized distribution of the token following r.
class MicroModel {
 public:
  MicroModel(Eigen::MatrixXd logits, std::string description = "");
  static MicroModel random(std::size_t vocab_size, std::uint64_t seed, double scale = 1.0);

  std::size_t vocab_size() const { return static_cast<std::size_t>(logits_.rows()); }
  const Eigen::MatrixXd& logits() const { return logits_; }
  Eigen::MatrixXd& logits() { return logits_; }

  Eigen::VectorXd conditional(Eigen::Index context) const;  // softmax of a row
  /// P(tokens[t] | tokens[t-1]) for t = 1..len-1.
  std::vector<double> sequence_probs(const std::vector<int>& tokens) const;
  double max_normalization_error() const;

  std::string description;

 private:
  Eigen::MatrixXd logits_;
};

using TokenSeq = std::vector<int>;

std::vector<TokenSeq> random_batch(std::size_t vocab_size, std::size_t num_sequences,
                                   std::size_t length, std::uint64_t seed);

struct LossReport {
  std::vector<double> per_example_loss;
  double mean_loss = 0.0;
  Reduction reduction = Reduction::SumTokensMeanExamples;
};

/// IS requires a mix model for the unapproximated denominator; DFT is the
/// mix~1 specialization and needs none.
LossReport batch_loss(const MicroModel& model, const std::vector<TokenSeq>& batch,
                      Objective objective, const MicroModel* mix = nullptr,
                      Reduction reduction = Reduction::SumTokensMeanExamples);

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// The oracle differences the stop-gradient objective: weights frozen at the
  /// evaluation point. Setting false re-derives weights at each perturbation
  /// (the negative control that shows sg(.) matters).
  bool freeze_weights_in_oracle = true;
};

/// Max relative error between the analytic gradient (weights as constants) and
/// central finite differences, over all logit parameters.
double grad_check(const MicroModel& model, const std::vector<TokenSeq>& batch,
                  Objective objective, const GradCheckOptions& options = {},
                  const MicroModel* mix = nullptr);

struct ExampleScores {
  std::string problem_id;
  std::vector<double> token_logprobs;
};

/// Line-delimited records {problem_id, provenance, token_index, logprob,
/// weight} with weight = exp(logprob). Every example needs a score entry.
void export_weights(const MixtureDataset& dataset, const std::vector<ExampleScores>& scores,
                    const std::string& path, const FileHeader& header);

}  // namespace palign
