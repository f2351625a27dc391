#pragma once

#include <span>
#include <vector>

#include "fusedec/scorer.hpp"
#include "fusedec/toy/models.hpp"

namespace fusedec::toy {

struct OracleScorer {
  const ToyModel* model = nullptr;
  ConditioningSpec conditioning;
};

/// Reference greedy decode for small problems (|V| <= 16, max_len <= 8).
/// Each step recomputes every model's conditional from scratch for the
/// current prefix, mixes the probabilities linearly and takes the argmax
/// with ties to the lowest id. Shares no code with the engine's session or
/// fusion path. Returns emitted ids without eos.
std::vector<TokenId> oracle_greedy(std::span<const OracleScorer> scorers, std::span<const double> weights,
                                   const Vocabulary& vocab, std::size_t max_len);

}  // namespace fusedec::toy
