#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fusedec/scorer.hpp"
#include "fusedec/vocab.hpp"

namespace fusedec::toy {

/// Non-negative fraction num/den. Parses "4/5", "0.8" or "1".
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational parse(std::string_view text);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
};

/// A distribution held as integer weights over a common denominator, so
/// normalization is an exact integer identity.
struct ExactDistribution {
  std::vector<std::int64_t> weights;
  std::int64_t denominator = 1;

  bool normalized() const;
  double prob(TokenId id) const;
  TokenDistribution to_log() const;
};

/// Incremental per-session state of a toy model.
class ToyState {
 public:
  virtual ~ToyState() = default;
  virtual ExactDistribution next() const = 0;
  virtual void push(TokenId id) = 0;
};

class ToyModel {
 public:
  virtual ~ToyModel() = default;
  virtual std::string name() const = 0;
  virtual const Vocabulary& vocab() const = 0;
  virtual ConditioningKind kind() const = 0;

  virtual std::unique_ptr<ToyState> start(const ConditioningSpec& conditioning) const = 0;
  /// Recomputes the conditional for `prefix` from scratch.
  virtual ExactDistribution distribution(const ConditioningSpec& conditioning,
                                         std::span<const TokenId> prefix) const = 0;
};

struct LexiconConfig {
  /// Source id -> candidate target ids. Unlisted ids translate to themselves.
  /// With several candidates the scorer commits to one per (source, position)
  /// via a seeded hash, which is how ambiguous words get randomized.
  std::map<TokenId, std::vector<TokenId>> lexicon;
  Rational fidelity{4, 5};     // mass on the lexicon translation
  Rational eos_noise{1, 10};   // mass not on eos once the source is exhausted
  std::uint64_t seed = 0;
};

/// Position-aligned lexical translator standing in for an MT model. At
/// target position i < |source| it puts `fidelity` on the translation of
/// source token i and spreads the rest uniformly over the vocabulary; past
/// the source it puts 1 - eos_noise on eos.
class LexiconModel final : public ToyModel {
 public:
  LexiconModel(std::shared_ptr<const Vocabulary> vocab, LexiconConfig config);

  std::string name() const override { return "lexicon"; }
  const Vocabulary& vocab() const override { return *vocab_; }
  ConditioningKind kind() const override { return ConditioningKind::source_conditioned; }
  std::unique_ptr<ToyState> start(const ConditioningSpec& conditioning) const override;
  ExactDistribution distribution(const ConditioningSpec& conditioning,
                                 std::span<const TokenId> prefix) const override;

  /// The target token the model commits to at `position`.
  TokenId translation_at(std::span<const TokenId> source, std::size_t position) const;
  ExactDistribution at_position(std::span<const TokenId> source, std::size_t position) const;
  const LexiconConfig& config() const noexcept { return config_; }

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  LexiconConfig config_;
};

struct NGramConfig {
  int order = 2;
  Rational add_k{1, 10};
};

/// Add-k smoothed n-gram LM standing in for a prompted LLM. The scored
/// stream is (order-1) boundary pads, then the tokenized prompt, then the
/// target prefix; only the last order-1 ids condition the next token.
/// Boundary pad is bos when declared, otherwise eos. Prompt pieces outside
/// the vocabulary become unk, or are dropped when no unk is declared.
class NGramModel final : public ToyModel {
 public:
  NGramModel(std::shared_ptr<const Vocabulary> vocab, NGramConfig config,
             const std::vector<std::string>& training_lines);

  std::string name() const override { return "ngram"; }
  const Vocabulary& vocab() const override { return *vocab_; }
  ConditioningKind kind() const override { return ConditioningKind::prompt_conditioned; }
  std::unique_ptr<ToyState> start(const ConditioningSpec& conditioning) const override;
  ExactDistribution distribution(const ConditioningSpec& conditioning,
                                 std::span<const TokenId> prefix) const override;

  ExactDistribution for_context(std::span<const TokenId> context) const;
  std::vector<TokenId> stream_prefix(const ConditioningSpec& conditioning) const;
  int order() const noexcept { return config_.order; }

 private:
  std::vector<TokenId> lenient_tokenize(std::string_view text) const;

  std::shared_ptr<const Vocabulary> vocab_;
  NGramConfig config_;
  TokenId pad_ = 0;
  std::map<std::vector<TokenId>, std::vector<std::int64_t>> counts_;
};

/// Serves any ToyModel through the Scorer contract. Keeps a log of every
/// opened conditioning and exposes each live session's prefix.
class LocalScorer final : public Scorer {
 public:
  explicit LocalScorer(std::shared_ptr<const ToyModel> model, std::string name = {});

  std::string name() const override { return name_; }
  std::uint64_t vocab_hash() const override { return model_->vocab().hash(); }

  void open(std::string_view session, const ConditioningSpec& conditioning) override;
  TokenDistribution score(std::string_view session) override;
  void append(std::string_view session, TokenId id) override;
  void close(std::string_view session) override;

  const ToyModel& model() const noexcept { return *model_; }
  std::vector<TokenId> prefix_of(std::string_view session) const;
  std::vector<ConditioningSpec> opened() const;
  std::size_t open_sessions() const;
  std::size_t score_calls() const;

 private:
  struct Entry {
    std::unique_ptr<ToyState> state;
    std::vector<TokenId> prefix;
    bool finished = false;
  };
  Entry& entry(std::string_view session);

  std::shared_ptr<const ToyModel> model_;
  std::string name_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::unique_ptr<Entry>> sessions_;
  std::vector<ConditioningSpec> opened_;
  std::size_t score_calls_ = 0;
};

/// Loads a serve-toy model config. Relative paths resolve against the
/// config file's directory.
///   lexicon: {"vocab", "fidelity", "eos_noise", "seed", "lexicon": {src: [tgt...]}}
///   ngram:   {"vocab", "order", "add_k", "train"}
std::shared_ptr<const ToyModel> load_toy_model(std::string_view kind,
                                               const std::filesystem::path& config);

}  // namespace fusedec::toy
