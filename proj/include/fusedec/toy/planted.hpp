#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fusedec/corpus.hpp"
#include "fusedec/toy/models.hpp"
#include "fusedec/vocab.hpp"

namespace fusedec::toy {

struct PlantedTaskOptions {
  /// Without pronoun clauses the MT scorer is error-free and no interior
  /// weight can beat it.
  bool pronouns = true;
  std::size_t segments_per_document = 10;
  std::size_t lm_training_sentences = 2000;
  std::size_t max_clauses = 3;
};

/// Synthetic translation task with complementary scorer errors.
///
/// Vocabulary (12 ids): <s> </s> <unk>, nouns N0..N2, verbs V0 V1, the
/// ambiguous source pronoun "it", and target pronouns P0..P2 where Pi
/// agrees with Ni. A sentence is 1..max_clauses clauses; the source clause
/// "Ni it Vj" translates to "Ni Pi Vj" (or "Ni Vj" without pronouns).
///
/// The lexicon MT scorer translates nouns and verbs faithfully but commits
/// to a seeded pseudo-random pronoun for "it". The bigram LM, trained on
/// target-side text, predicts the agreeing pronoun after a noun almost
/// surely but is near-uniform on nouns and verbs. Mixing the two beats
/// either alone.
struct PlantedTask {
  std::uint64_t seed = 0;
  std::shared_ptr<const Vocabulary> vocab;
  Corpus corpus;
  LexiconConfig mt;
  NGramConfig lm;
  std::vector<std::string> lm_training;

  std::shared_ptr<LexiconModel> make_mt() const;
  std::shared_ptr<NGramModel> make_lm() const;
};

/// Deterministic in (seed, size, options). Requires size >= 1.
PlantedTask build_planted_task(std::uint64_t seed, std::size_t size, const PlantedTaskOptions& options = {});

/// Writes vocab.txt, corpus.jsonl, lm_train.txt and the serve-toy configs
/// mt.json (lexicon) and lm.json (ngram) into `dir`.
void write_planted_task(const PlantedTask& task, const std::filesystem::path& dir);

}  // namespace fusedec::toy
