#include "fusedec/toy/oracle.hpp"

#include "fusedec/error.hpp"

namespace fusedec::toy {

std::vector<TokenId> oracle_greedy(std::span<const OracleScorer> scorers, std::span<const double> weights,
                                   const Vocabulary& vocab, std::size_t max_len) {
  if (vocab.size() > 16 || max_len > 8) {
    throw Error(ErrorCode::InvalidArgument, "oracle is limited to |V| <= 16 and max_len <= 8");
  }
  if (scorers.size() != weights.size()) {
    throw Error(ErrorCode::InvalidArgument, "one weight per scorer");
  }
  std::vector<TokenId> prefix;
  while (prefix.size() < max_len) {
    std::vector<double> mixed(vocab.size(), 0.0);
    for (std::size_t k = 0; k < scorers.size(); ++k) {
      const ExactDistribution d = scorers[k].model->distribution(scorers[k].conditioning, prefix);
      for (std::size_t v = 0; v < vocab.size(); ++v) {
        mixed[v] += weights[k] * d.prob(static_cast<TokenId>(v));
      }
    }
    TokenId best = 0;
    for (std::size_t v = 1; v < mixed.size(); ++v) {
      if (mixed[v] > mixed[static_cast<std::size_t>(best)]) best = static_cast<TokenId>(v);
    }
    if (best == vocab.eos_id()) break;
    prefix.push_back(best);
  }
  return prefix;
}

}  // namespace fusedec::toy
