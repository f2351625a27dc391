#include "fusedec/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "fusedec/error.hpp"
#include "fusedec/logmath.hpp"

namespace fusedec {

namespace {

constexpr double kWeightSumTolerance = 1e-9;
constexpr double kJsonNegInf = -1e30;

void validate_weights(std::span<const double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::InvalidArgument, "weights must be finite and non-negative");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTolerance) {
    throw Error(ErrorCode::InvalidArgument, "weights sum to " + std::to_string(sum) + ", not 1");
  }
}

nlohmann::ordered_json encode_logprob(std::optional<double> lp) {
  if (!lp) return nullptr;
  return *lp == kNegInf ? kJsonNegInf : *lp;
}

}  // namespace

std::string_view to_string(TerminatedBy t) { return t == TerminatedBy::eos ? "eos" : "max_len"; }

void DecodeConfig::validate() const {
  if (lambdas.empty()) throw Error(ErrorCode::InvalidArgument, "at least one scorer weight is required");
  validate_weights(lambdas);
}

std::size_t DecodeConfig::effective_max_len(std::size_t source_tokens) const {
  if (max_len > 0) return max_len;
  return std::max<std::size_t>(256, 2 * source_tokens + 10);
}

DecodeConfig DecodeConfig::pair(double lambda) {
  DecodeConfig cfg;
  cfg.lambdas = {lambda, 1.0 - lambda};
  return cfg;
}

TokenDistribution fuse(std::span<const TokenDistribution> dists, std::span<const double> weights) {
  if (dists.size() != weights.size() || dists.empty()) {
    throw Error(ErrorCode::ShapeError, "need one weight per distribution");
  }
  validate_weights(weights);
  const std::size_t n = dists.front().size();
  for (const auto& d : dists) {
    if (d.size() != n) throw Error(ErrorCode::ShapeError, "distribution lengths differ");
  }

  std::vector<std::size_t> active;
  std::vector<double> log_weights;
  for (std::size_t k = 0; k < dists.size(); ++k) {
    if (weights[k] > 0.0) {
      active.push_back(k);
      log_weights.push_back(std::log(weights[k]));
    }
  }

  TokenDistribution out;
  out.logprobs.resize(n);
  std::vector<double> terms(active.size());
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t j = 0; j < active.size(); ++j) {
      terms[j] = log_weights[j] + dists[active[j]].logprobs[v];
    }
    out.logprobs[v] = log_sum_exp(terms);
  }
  return out;
}

TokenId argmax_lowest_id(const TokenDistribution& d) {
  if (d.logprobs.empty()) throw Error(ErrorCode::ShapeError, "empty distribution");
  std::size_t best = 0;
  for (std::size_t v = 1; v < d.size(); ++v) {
    if (d.logprobs[v] > d.logprobs[best]) best = v;
  }
  return static_cast<TokenId>(best);
}

nlohmann::ordered_json to_json(const StepRecord& step) {
  nlohmann::ordered_json j;
  j["token"] = step.token;
  j["fused_logprob"] = encode_logprob(step.fused_logprob);
  auto per = nlohmann::ordered_json::array();
  for (const auto& lp : step.scorer_logprobs) per.push_back(encode_logprob(lp));
  j["scorer_logprobs"] = std::move(per);
  j["forced"] = step.forced;
  return j;
}

nlohmann::ordered_json to_json(const DecodeResult& result) {
  nlohmann::ordered_json j;
  j["token_ids"] = result.token_ids;
  j["text"] = result.text;
  j["terminated_by"] = std::string(to_string(result.terminated_by));
  auto steps = nlohmann::ordered_json::array();
  for (const auto& s : result.steps) steps.push_back(to_json(s));
  j["steps"] = std::move(steps);
  return j;
}

DecodeResult greedy_decode(std::span<const ScorerBinding> scorers, const DecodeConfig& cfg,
                           const Vocabulary& vocab) {
  return greedy_decode(scorers, cfg, vocab, StepObserver{});
}

DecodeResult greedy_decode(std::span<const ScorerBinding> scorers, const DecodeConfig& cfg,
                           const Vocabulary& vocab, const StepObserver& observer) {
  cfg.validate();
  if (scorers.size() != cfg.lambdas.size()) {
    throw Error(ErrorCode::InvalidArgument, std::to_string(scorers.size()) + " scorers but " +
                                                std::to_string(cfg.lambdas.size()) + " weights");
  }

  std::size_t source_tokens = 0;
  for (const auto& b : scorers) source_tokens = std::max(source_tokens, b.conditioning.source_tokens.size());
  const std::size_t max_len = cfg.effective_max_len(source_tokens);

  std::size_t step = 0;
  auto wrap = [&step](const Error& e) -> DecodeError {
    return DecodeError(step, e.code(), e.what());
  };

  // Sessions are opened in scorer order; skipped scorers stay empty.
  std::vector<std::optional<ScorerSession>> sessions(scorers.size());
  std::vector<std::size_t> active;
  std::vector<double> active_weights;
  try {
    for (std::size_t k = 0; k < scorers.size(); ++k) {
      if (cfg.skip_zero_weight && cfg.lambdas[k] == 0.0) continue;
      sessions[k].emplace(scorers[k].scorer, scorers[k].conditioning, vocab);
      active.push_back(k);
      active_weights.push_back(cfg.lambdas[k]);
    }
  } catch (const VocabMismatchError&) {
    throw;
  } catch (const Error& e) {
    throw wrap(e);
  }

  std::vector<ScorerSession*> observed(scorers.size(), nullptr);
  for (std::size_t k : active) observed[k] = &*sessions[k];

  DecodeResult result;
  std::vector<TokenDistribution> dists(active.size());
  for (;; ++step) {
    if (result.token_ids.size() >= max_len) {
      StepRecord forced;
      forced.token = vocab.eos_id();
      forced.scorer_logprobs.assign(scorers.size(), std::nullopt);
      forced.forced = true;
      result.steps.push_back(std::move(forced));
      result.terminated_by = TerminatedBy::max_len;
      break;
    }

    try {
      for (std::size_t j = 0; j < active.size(); ++j) {
        dists[j] = sessions[active[j]]->next_distribution();
      }
    } catch (const Error& e) {
      throw wrap(e);
    }
    const TokenDistribution fused = fuse(dists, active_weights);
    const TokenId choice = argmax_lowest_id(fused);

    StepRecord rec;
    rec.token = choice;
    rec.fused_logprob = fused.logprobs[static_cast<std::size_t>(choice)];
    rec.scorer_logprobs.assign(scorers.size(), std::nullopt);
    for (std::size_t j = 0; j < active.size(); ++j) {
      rec.scorer_logprobs[active[j]] = dists[j].logprobs[static_cast<std::size_t>(choice)];
    }
    result.steps.push_back(std::move(rec));

    if (choice == vocab.eos_id()) {
      result.terminated_by = TerminatedBy::eos;
      break;
    }
    try {
      for (std::size_t k : active) sessions[k]->append(choice);
    } catch (const Error& e) {
      throw wrap(e);
    }
    result.token_ids.push_back(choice);
    if (observer) observer(step, observed);
  }

  result.text = vocab.detokenize(result.token_ids);
  return result;
}

}  // namespace fusedec
