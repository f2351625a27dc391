#include "fusedec/toy/planted.hpp"

#include <cstdio>
#include <random>

#include <json.hpp>

#include "fusedec/error.hpp"

namespace fusedec::toy {

namespace {

constexpr int kNouns = 3;
constexpr int kVerbs = 2;

struct SentencePair {
  std::string src;
  std::string tgt;
};

SentencePair sample_sentence(std::mt19937_64& rng, const PlantedTaskOptions& options) {
  std::uniform_int_distribution<std::size_t> clauses(1, options.max_clauses);
  std::uniform_int_distribution<int> noun(0, kNouns - 1);
  std::uniform_int_distribution<int> verb(0, kVerbs - 1);
  SentencePair out;
  const std::size_t n = clauses(rng);
  for (std::size_t c = 0; c < n; ++c) {
    const int ni = noun(rng);
    const int vi = verb(rng);
    const std::string sep = c == 0 ? "" : " ";
    const std::string n_tok = "N" + std::to_string(ni);
    const std::string v_tok = "V" + std::to_string(vi);
    if (options.pronouns) {
      out.src += sep + n_tok + " it " + v_tok;
      out.tgt += sep + n_tok + " P" + std::to_string(ni) + " " + v_tok;
    } else {
      out.src += sep + n_tok + " " + v_tok;
      out.tgt += sep + n_tok + " " + v_tok;
    }
  }
  return out;
}

}  // namespace

std::shared_ptr<LexiconModel> PlantedTask::make_mt() const {
  return std::make_shared<LexiconModel>(vocab, mt);
}

std::shared_ptr<NGramModel> PlantedTask::make_lm() const {
  return std::make_shared<NGramModel>(vocab, lm, lm_training);
}

PlantedTask build_planted_task(std::uint64_t seed, std::size_t size, const PlantedTaskOptions& options) {
  if (size == 0 || options.max_clauses == 0 || options.segments_per_document == 0) {
    throw Error(ErrorCode::InvalidArgument, "planted task needs at least one segment and clause");
  }
  PlantedTask task;
  task.seed = seed;
  std::vector<std::string> tokens = {"<s>", "</s>", "<unk>", "N0", "N1", "N2", "V0", "V1", "it", "P0", "P1", "P2"};
  SpecialTokens specials;
  specials.bos = "<s>";
  specials.eos = "</s>";
  specials.unk = "<unk>";
  task.vocab = std::make_shared<const Vocabulary>(std::move(tokens), specials);
  const Vocabulary& v = *task.vocab;

  task.mt.seed = seed;
  task.mt.fidelity = {4, 5};
  task.mt.eos_noise = {1, 10};
  task.mt.lexicon[*v.find("it")] = {*v.find("P0"), *v.find("P1"), *v.find("P2")};
  task.lm.order = 2;
  task.lm.add_k = {1, 10};

  std::mt19937_64 rng(seed);
  std::vector<Segment> segments;
  segments.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    auto pair = sample_sentence(rng, options);
    Segment s;
    char id[32];
    std::snprintf(id, sizeof id, "seg-%04zu", i);
    s.id = id;
    std::snprintf(id, sizeof id, "doc-%03zu", i / options.segments_per_document);
    s.doc_id = id;
    s.src = std::move(pair.src);
    s.ref = std::move(pair.tgt);
    segments.push_back(std::move(s));
  }
  task.corpus = Corpus(std::move(segments));

  // Independent target-side text for the LM.
  std::mt19937_64 lm_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  task.lm_training.reserve(options.lm_training_sentences);
  for (std::size_t i = 0; i < options.lm_training_sentences; ++i) {
    task.lm_training.push_back(sample_sentence(lm_rng, options).tgt);
  }
  return task;
}

void write_planted_task(const PlantedTask& task, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Vocabulary& v = *task.vocab;
  write_file_atomic(dir / "vocab.txt", v.to_file_format());
  write_jsonl(task.corpus, dir / "corpus.jsonl");
  write_lines(task.lm_training, dir / "lm_train.txt");

  nlohmann::ordered_json mt;
  mt["vocab"] = "vocab.txt";
  mt["fidelity"] = task.mt.fidelity.str();
  mt["eos_noise"] = task.mt.eos_noise.str();
  mt["seed"] = task.mt.seed;
  nlohmann::ordered_json lex = nlohmann::ordered_json::object();
  for (const auto& [src, targets] : task.mt.lexicon) {
    auto& arr = lex[v.token(src)] = nlohmann::ordered_json::array();
    for (TokenId t : targets) arr.push_back(v.token(t));
  }
  mt["lexicon"] = std::move(lex);
  write_file_atomic(dir / "mt.json", mt.dump(2) + "\n");

  nlohmann::ordered_json lm;
  lm["vocab"] = "vocab.txt";
  lm["order"] = task.lm.order;
  lm["add_k"] = task.lm.add_k.str();
  lm["train"] = "lm_train.txt";
  write_file_atomic(dir / "lm.json", lm.dump(2) + "\n");
}

}  // namespace fusedec::toy
