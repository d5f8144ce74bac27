#include "palign/loss_kernel.hpp"

#include "palign/errors.hpp"
#include "palign/util.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace palign {

Objective objective_from_string(const std::string& name) {
  if (name == "ce") return Objective::CE;
  if (name == "dft") return Objective::DFT;
  if (name == "is") return Objective::IS;
  throw ConfigError("unknown objective: " + name + " (expected ce|dft|is)");
}

std::string to_string(Objective objective) {
  switch (objective) {
    case Objective::CE: return "ce";
    case Objective::DFT: return "dft";
    case Objective::IS: return "is";
  }
  return "ce";
}

namespace {

void check_prob(double p) {
  if (!(p > 0.0) || p > 1.0) {
    throw NumericError("token probability out of (0, 1]: " + std::to_string(p));
  }
}

}  // namespace

double ce_loss(std::span<const double> token_probs) {
  double loss = 0.0;
  for (double p : token_probs) {
    check_prob(p);
    loss -= std::log(p);
  }
  return loss;
}

WeightedLoss is_weighted_loss(std::span<const double> token_probs,
                              std::optional<std::span<const double>> mix_probs) {
  if (mix_probs && mix_probs->size() != token_probs.size()) {
    throw NumericError("mix_probs length " + std::to_string(mix_probs->size()) +
                       " does not match token_probs length " + std::to_string(token_probs.size()));
  }
  WeightedLoss out;
  out.weights.reserve(token_probs.size());
  double loss = 0.0;
  for (std::size_t t = 0; t < token_probs.size(); ++t) {
    const double p = token_probs[t];
    check_prob(p);
    double weight = p;
    if (mix_probs) {
      const double mix = (*mix_probs)[t];
      check_prob(mix);
      weight = p / mix;
    }
    loss -= weight * std::log(p);
    out.weights.push_back(TokenWeightRecord{t, p, weight, true});
  }
  out.loss = loss;
  return out;
}

MicroModel::MicroModel(Eigen::MatrixXd logits, std::string description)
    : description(std::move(description)), logits_(std::move(logits)) {
  if (logits_.rows() != logits_.cols() || logits_.rows() < 2) {
    throw ConfigError("micro model logits must be a square table with vocab_size >= 2");
  }
}

MicroModel MicroModel::random(std::size_t vocab_size, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd logits(vocab_size, vocab_size);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      logits(r, c) = normal(rng);
    }
  }
  return MicroModel(std::move(logits), "random(seed=" + std::to_string(seed) + ")");
}

Eigen::VectorXd MicroModel::conditional(Eigen::Index context) const {
  if (context < 0 || context >= logits_.rows()) {
    throw NumericError("context token out of vocabulary range");
  }
  Eigen::VectorXd row = logits_.row(context);
  const double max_logit = row.maxCoeff();
  Eigen::VectorXd exps = (row.array() - max_logit).exp();
  return exps / exps.sum();
}

std::vector<double> MicroModel::sequence_probs(const std::vector<int>& tokens) const {
  std::vector<double> probs;
  if (tokens.size() < 2) return probs;
  probs.reserve(tokens.size() - 1);
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    const int prev = tokens[t - 1];
    const int next = tokens[t];
    if (next < 0 || static_cast<std::size_t>(next) >= vocab_size()) {
      throw NumericError("token out of vocabulary range");
    }
    probs.push_back(conditional(prev)(next));
  }
  return probs;
}

double MicroModel::max_normalization_error() const {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < logits_.rows(); ++r) {
    worst = std::max(worst, std::abs(conditional(r).sum() - 1.0));
  }
  return worst;
}

std::vector<TokenSeq> random_batch(std::size_t vocab_size, std::size_t num_sequences,
                                   std::size_t length, std::uint64_t seed) {
  if (length < 2) throw ConfigError("sequences need at least two tokens");
  std::mt19937_64 rng(seed);
  std::vector<TokenSeq> batch(num_sequences);
  for (auto& seq : batch) {
    seq.resize(length);
    for (auto& token : seq) {
      token = static_cast<int>(uniform_index(rng, vocab_size).index);
    }
  }
  return batch;
}

namespace {

// Per-example weights for the chosen objective, evaluated on `model`.
std::vector<std::vector<double>> objective_weights(const MicroModel& model,
                                                   const std::vector<TokenSeq>& batch,
                                                   Objective objective, const MicroModel* mix) {
  if (objective == Objective::IS && !mix) {
    throw NumericError("the unapproximated IS objective needs a mix model");
  }
  std::vector<std::vector<double>> weights(batch.size());
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const auto probs = model.sequence_probs(batch[e]);
    auto& w = weights[e];
    w.assign(probs.size(), 1.0);
    if (objective == Objective::CE) continue;
    if (objective == Objective::DFT) {
      w = probs;
      continue;
    }
    const auto mix_probs = mix->sequence_probs(batch[e]);
    for (std::size_t t = 0; t < probs.size(); ++t) {
      if (!(mix_probs[t] > 0.0)) throw NumericError("mix probability must be positive");
      w[t] = probs[t] / mix_probs[t];
    }
  }
  return weights;
}

// Mean over examples of the token-summed weighted loss, with weights supplied
// externally (frozen) rather than recomputed from the model.
double frozen_weight_loss(const MicroModel& model, const std::vector<TokenSeq>& batch,
                          const std::vector<std::vector<double>>& weights) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const auto probs = model.sequence_probs(batch[e]);
    double loss = 0.0;
    for (std::size_t t = 0; t < probs.size(); ++t) {
      check_prob(probs[t]);
      loss -= weights[e][t] * std::log(probs[t]);
    }
    total += loss;
  }
  const double mean = total / static_cast<double>(batch.size());
  if (!std::isfinite(mean)) throw NumericError("non-finite loss");
  return mean;
}

}  // namespace

LossReport batch_loss(const MicroModel& model, const std::vector<TokenSeq>& batch,
                      Objective objective, const MicroModel* mix, Reduction reduction) {
  LossReport report;
  report.reduction = reduction;
  report.per_example_loss.reserve(batch.size());
  const auto weights = objective_weights(model, batch, objective, mix);
  double total = 0.0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const auto probs = model.sequence_probs(batch[e]);
    double loss = 0.0;
    for (std::size_t t = 0; t < probs.size(); ++t) {
      check_prob(probs[t]);
      loss -= weights[e][t] * std::log(probs[t]);
    }
    if (reduction == Reduction::MeanTokensMeanExamples && !probs.empty()) {
      loss /= static_cast<double>(probs.size());
    }
    if (!std::isfinite(loss)) throw NumericError("non-finite loss");
    report.per_example_loss.push_back(loss);
    total += loss;
  }
  report.mean_loss = batch.empty() ? 0.0 : total / static_cast<double>(batch.size());
  return report;
}

double grad_check(const MicroModel& model, const std::vector<TokenSeq>& batch,
                  Objective objective, const GradCheckOptions& options, const MicroModel* mix) {
  if (!(options.epsilon > 0.0) || options.epsilon > 1e-2) {
    throw NumericError("epsilon must lie in (0, 1e-2]");
  }
  if (batch.empty()) throw NumericError("grad_check needs a nonempty batch");

  const std::size_t vocab = model.vocab_size();
  const auto frozen = objective_weights(model, batch, objective, mix);
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  // Analytic gradient, weights treated as constants:
  // d/d logits(r, m) of -w ln p(y | r) = w * (p(m | r) - [m == y]).
  Eigen::MatrixXd analytic = Eigen::MatrixXd::Zero(vocab, vocab);
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const TokenSeq& seq = batch[e];
    for (std::size_t t = 1; t < seq.size(); ++t) {
      const int prev = seq[t - 1];
      const int next = seq[t];
      const double w = frozen[e][t - 1] * inv_n;
      analytic.row(prev) += w * model.conditional(prev).transpose();
      analytic(prev, next) -= w;
    }
  }

  MicroModel probe(model.logits(), model.description);
  double max_rel_err = 0.0;
  for (std::size_t r = 0; r < vocab; ++r) {
    for (std::size_t m = 0; m < vocab; ++m) {
      const double saved = probe.logits()(r, m);

      auto objective_at = [&](double value) {
        probe.logits()(r, m) = value;
        if (options.freeze_weights_in_oracle) {
          return frozen_weight_loss(probe, batch, frozen);
        }
        const auto live = objective_weights(probe, batch, objective, mix);
        return frozen_weight_loss(probe, batch, live);
      };

      const double plus = objective_at(saved + options.epsilon);
      const double minus = objective_at(saved - options.epsilon);
      probe.logits()(r, m) = saved;

      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      const double a = analytic(r, m);
      // Scale guard: exactly-zero gradients (unused context rows) must compare
      // cleanly against finite-difference noise.
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-3});
      max_rel_err = std::max(max_rel_err, std::abs(a - numeric) / denom);
    }
  }
  return max_rel_err;
}

void export_weights(const MixtureDataset& dataset, const std::vector<ExampleScores>& scores,
                    const std::string& path, const FileHeader& header) {
  std::unordered_map<std::string, const ExampleScores*> by_id;
  for (const auto& entry : scores) {
    if (!by_id.emplace(entry.problem_id, &entry).second) {
      throw ConfigError("duplicate score entry for example " + entry.problem_id);
    }
  }
  std::unordered_set<std::string> dataset_ids;
  for (const auto& example : dataset.examples) dataset_ids.insert(example.problem_id);
  for (const auto& entry : scores) {
    if (!dataset_ids.count(entry.problem_id)) {
      throw ConfigError("score entry for unknown example " + entry.problem_id);
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << dump_record(header_to_json(header)) << '\n';
  for (const auto& example : dataset.examples) {
    auto it = by_id.find(example.problem_id);
    if (it == by_id.end()) {
      throw ConfigError("no score vector for example " + example.problem_id);
    }
    const auto& logprobs = it->second->token_logprobs;
    if (logprobs.empty() && !example.response.empty()) {
      throw ConfigError("empty score vector for example " + example.problem_id);
    }
    for (std::size_t t = 0; t < logprobs.size(); ++t) {
      const double lp = logprobs[t];
      if (lp > 0.0) {
        throw ConfigError("positive logprob in score vector of example " + example.problem_id);
      }
      nlohmann::json record{{"problem_id", example.problem_id},
                            {"provenance", to_string(example.provenance)},
                            {"token_index", t},
                            {"logprob", lp},
                            {"weight", std::exp(lp)}};
      out << dump_record(record) << '\n';
    }
  }
  if (!out) throw IoError("write failure: " + path);
}

}  // namespace palign
