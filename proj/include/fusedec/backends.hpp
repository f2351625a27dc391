#pragma once

#include <chrono>
#include <memory>
#include <string_view>

#include "fusedec/scorer.hpp"

namespace fusedec {

/// Resolves a scorer address:
///   toy:<lexicon|ngram>:<config.json>   in-process toy model
///   tcp://host:port, host:port          wire protocol over TCP
///   stdio:<command line>, <command line> spawned child speaking the protocol
std::shared_ptr<Scorer> connect_scorer(std::string_view address,
                                       std::chrono::milliseconds timeout = default_scorer_timeout());

}  // namespace fusedec
