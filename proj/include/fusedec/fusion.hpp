#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusedec/scorer.hpp"
#include "fusedec/vocab.hpp"

namespace fusedec {

enum class TerminatedBy { eos, max_len };
std::string_view to_string(TerminatedBy t);

struct DecodeConfig {
  /// One weight per scorer, on the probability simplex. For the usual
  /// MT+LLM pair this is {lambda, 1 - lambda}.
  std::vector<double> lambdas{0.5, 0.5};
  /// Token cap; 0 selects max(256, 2 * source tokens + 10).
  std::size_t max_len = 0;
  /// Zero-weight scorers get no session at all. Disable to query every
  /// scorer (strict mode).
  bool skip_zero_weight = true;

  /// Throws Error{InvalidArgument} unless weights are >= 0 and sum to 1
  /// within 1e-9.
  void validate() const;
  std::size_t effective_max_len(std::size_t source_tokens) const;

  static DecodeConfig pair(double lambda);
};

struct StepRecord {
  TokenId token = 0;
  /// Fused log-probability of the chosen token; nullopt for a forced eos.
  std::optional<double> fused_logprob;
  /// Per scorer, the log-probability it gave the chosen token; nullopt for
  /// unqueried (zero-weight) scorers and for a forced eos.
  std::vector<std::optional<double>> scorer_logprobs;
  bool forced = false;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct DecodeResult {
  std::vector<TokenId> token_ids;  // excludes eos
  std::string text;
  std::vector<StepRecord> steps;   // one per emitted token plus the terminal step
  TerminatedBy terminated_by = TerminatedBy::eos;

  friend bool operator==(const DecodeResult&, const DecodeResult&) = default;
};

nlohmann::ordered_json to_json(const StepRecord& step);
nlohmann::ordered_json to_json(const DecodeResult& result);

/// Convex mixture of K distributions in probability space:
///   out[v] = log(sum_k w_k * exp(d_k[v]))
/// evaluated by log-sum-exp. Zero-weight inputs are ignored entirely, so a
/// one-hot weight vector returns that input unchanged.
/// Throws Error{ShapeError} on length mismatch, Error{InvalidArgument} on
/// an invalid weight vector.
TokenDistribution fuse(std::span<const TokenDistribution> dists, std::span<const double> weights);

/// Greedy pick: the maximal entry, ties to the lowest id.
TokenId argmax_lowest_id(const TokenDistribution& d);

/// One scorer taking part in a fused decode.
struct ScorerBinding {
  std::shared_ptr<Scorer> scorer;
  ConditioningSpec conditioning;
};

/// Greedy decoding under the weighted fusion of the bound scorers. Every
/// queried session is advanced with the ensemble's choice, never its own
/// argmax. Scorer failures raise DecodeError carrying the step index.
DecodeResult greedy_decode(std::span<const ScorerBinding> scorers, const DecodeConfig& cfg,
                           const Vocabulary& vocab);

/// Observer hook for tests and analysis: invoked after every emitted token
/// with the open sessions (nullptr for skipped scorers).
using StepObserver = std::function<void(std::size_t step, std::span<ScorerSession* const>)>;
DecodeResult greedy_decode(std::span<const ScorerBinding> scorers, const DecodeConfig& cfg,
                           const Vocabulary& vocab, const StepObserver& observer);

}  // namespace fusedec
