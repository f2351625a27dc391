#include "fusedec/toy/models.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

#include "fusedec/corpus.hpp"
#include "fusedec/error.hpp"
#include "fusedec/logmath.hpp"

namespace fusedec::toy {

Rational Rational::parse(std::string_view text) {
  auto bad = [&] {
    return Error(ErrorCode::InvalidArgument, "not a rational: '" + std::string(text) + "'");
  };
  auto parse_int = [&](std::string_view s) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || v < 0) throw bad();
    return v;
  };
  Rational r;
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    r.num = parse_int(text.substr(0, slash));
    r.den = parse_int(text.substr(slash + 1));
  } else if (auto dot = text.find('.'); dot != std::string_view::npos) {
    std::string_view frac = text.substr(dot + 1);
    if (frac.size() > 12) throw bad();
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    std::int64_t whole = dot == 0 ? 0 : parse_int(text.substr(0, dot));
    r.num = whole * scale + (frac.empty() ? 0 : parse_int(frac));
    r.den = scale;
  } else {
    r.num = parse_int(text);
  }
  if (r.den <= 0) throw bad();
  return r;
}

bool ExactDistribution::normalized() const {
  std::int64_t sum = 0;
  for (auto w : weights) {
    if (w < 0) return false;
    sum += w;
  }
  return sum == denominator;
}

double ExactDistribution::prob(TokenId id) const {
  return static_cast<double>(weights[static_cast<std::size_t>(id)]) /
         static_cast<double>(denominator);
}

TokenDistribution ExactDistribution::to_log() const {
  TokenDistribution d;
  d.logprobs.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    d.logprobs.push_back(weights[i] == 0 ? kNegInf
                                         : std::log(prob(static_cast<TokenId>(i))));
  }
  return d;
}

// ---------------------------------------------------------------------------
// LexiconModel

namespace {

class LexiconState final : public ToyState {
 public:
  LexiconState(const LexiconModel& model, std::vector<TokenId> source)
      : model_(model), source_(std::move(source)) {}

  ExactDistribution next() const override { return model_.at_position(source_, position_); }
  void push(TokenId) override { ++position_; }

 private:
  const LexiconModel& model_;
  std::vector<TokenId> source_;
  std::size_t position_ = 0;
};

}  // namespace

LexiconModel::LexiconModel(std::shared_ptr<const Vocabulary> vocab, LexiconConfig config)
    : vocab_(std::move(vocab)), config_(std::move(config)) {
  if (config_.fidelity.num > config_.fidelity.den || config_.eos_noise.num > config_.eos_noise.den) {
    throw Error(ErrorCode::InvalidArgument, "lexicon probabilities must lie in [0,1]");
  }
  for (const auto& [src, targets] : config_.lexicon) {
    if (!vocab_->contains(src) || targets.empty()) {
      throw Error(ErrorCode::InvalidArgument, "bad lexicon entry for id " + std::to_string(src));
    }
    for (TokenId t : targets) {
      if (!vocab_->contains(t)) {
        throw Error(ErrorCode::InvalidArgument, "lexicon target id " + std::to_string(t) + " out of range");
      }
    }
  }
}

TokenId LexiconModel::translation_at(std::span<const TokenId> source, std::size_t position) const {
  const TokenId src = source[position];
  auto it = config_.lexicon.find(src);
  if (it == config_.lexicon.end()) return src;
  const auto& candidates = it->second;
  if (candidates.size() == 1) return candidates.front();

  std::string key = std::to_string(config_.seed) + ":" + std::to_string(position) + ":";
  for (TokenId id : source) key += std::to_string(id) + ",";
  return candidates[fnv1a64(key) % candidates.size()];
}

ExactDistribution LexiconModel::at_position(std::span<const TokenId> source,
                                            std::size_t position) const {
  const auto n = static_cast<std::int64_t>(vocab_->size());
  ExactDistribution d;
  if (position < source.size()) {
    const auto& [a, b] = config_.fidelity;
    d.denominator = b * n;
    d.weights.assign(vocab_->size(), b - a);
    d.weights[static_cast<std::size_t>(translation_at(source, position))] += a * n;
  } else {
    const auto& [e, b] = config_.eos_noise;
    d.denominator = b * n;
    d.weights.assign(vocab_->size(), e);
    d.weights[static_cast<std::size_t>(vocab_->eos_id())] += (b - e) * n;
  }
  return d;
}

std::unique_ptr<ToyState> LexiconModel::start(const ConditioningSpec& conditioning) const {
  if (conditioning.kind != ConditioningKind::source_conditioned) {
    throw Error(ErrorCode::InvalidArgument, "lexicon scorer needs source_conditioned sessions");
  }
  return std::make_unique<LexiconState>(*this, conditioning.source_tokens);
}

ExactDistribution LexiconModel::distribution(const ConditioningSpec& conditioning,
                                             std::span<const TokenId> prefix) const {
  return at_position(conditioning.source_tokens, prefix.size());
}

// ---------------------------------------------------------------------------
// NGramModel

namespace {

class NGramState final : public ToyState {
 public:
  NGramState(const NGramModel& model, std::vector<TokenId> stream)
      : model_(model), window_(std::move(stream)) {
    trim();
  }

  ExactDistribution next() const override { return model_.for_context(window_); }
  void push(TokenId id) override {
    window_.push_back(id);
    trim();
  }

 private:
  void trim() {
    const auto keep = static_cast<std::size_t>(model_.order() - 1);
    if (window_.size() > keep) window_.erase(window_.begin(), window_.end() - static_cast<std::ptrdiff_t>(keep));
  }

  const NGramModel& model_;
  std::vector<TokenId> window_;
};

}  // namespace

NGramModel::NGramModel(std::shared_ptr<const Vocabulary> vocab, NGramConfig config,
                       const std::vector<std::string>& training_lines)
    : vocab_(std::move(vocab)), config_(config) {
  if (config_.order < 1) throw Error(ErrorCode::InvalidArgument, "n-gram order must be >= 1");
  if (config_.add_k.num <= 0) throw Error(ErrorCode::InvalidArgument, "add-k must be positive");
  pad_ = vocab_->bos_id().value_or(vocab_->eos_id());

  const auto ctx_len = static_cast<std::size_t>(config_.order - 1);
  for (const auto& line : training_lines) {
    std::vector<TokenId> stream(ctx_len, pad_);
    auto ids = lenient_tokenize(line);
    stream.insert(stream.end(), ids.begin(), ids.end());
    stream.push_back(vocab_->eos_id());
    for (std::size_t i = ctx_len; i < stream.size(); ++i) {
      std::vector<TokenId> ctx(stream.begin() + static_cast<std::ptrdiff_t>(i - ctx_len),
                               stream.begin() + static_cast<std::ptrdiff_t>(i));
      auto& row = counts_[ctx];
      if (row.empty()) row.assign(vocab_->size(), 0);
      ++row[static_cast<std::size_t>(stream[i])];
    }
  }
}

std::vector<TokenId> NGramModel::lenient_tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (i < text.size()) {
    while (i < text.size() && space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !space(text[i])) ++i;
    if (start == i) break;
    if (auto id = vocab_->find(text.substr(start, i - start))) {
      ids.push_back(*id);
    } else if (auto unk = vocab_->unk_id()) {
      ids.push_back(*unk);
    }
  }
  return ids;
}

std::vector<TokenId> NGramModel::stream_prefix(const ConditioningSpec& conditioning) const {
  std::vector<TokenId> stream(static_cast<std::size_t>(config_.order - 1), pad_);
  auto ids = lenient_tokenize(conditioning.prompt_text);
  stream.insert(stream.end(), ids.begin(), ids.end());
  return stream;
}

ExactDistribution NGramModel::for_context(std::span<const TokenId> context) const {
  const auto ctx_len = static_cast<std::size_t>(config_.order - 1);
  std::vector<TokenId> key(context.end() - static_cast<std::ptrdiff_t>(ctx_len), context.end());
  const auto& [kn, kd] = config_.add_k;
  const auto n = static_cast<std::int64_t>(vocab_->size());

  ExactDistribution d;
  d.weights.assign(vocab_->size(), kn);
  std::int64_t total = 0;
  if (auto it = counts_.find(key); it != counts_.end()) {
    for (std::size_t v = 0; v < it->second.size(); ++v) {
      d.weights[v] += kd * it->second[v];
      total += it->second[v];
    }
  }
  d.denominator = kd * total + kn * n;
  return d;
}

std::unique_ptr<ToyState> NGramModel::start(const ConditioningSpec& conditioning) const {
  if (conditioning.kind != ConditioningKind::prompt_conditioned) {
    throw Error(ErrorCode::InvalidArgument, "n-gram scorer needs prompt_conditioned sessions");
  }
  return std::make_unique<NGramState>(*this, stream_prefix(conditioning));
}

ExactDistribution NGramModel::distribution(const ConditioningSpec& conditioning,
                                           std::span<const TokenId> prefix) const {
  auto stream = stream_prefix(conditioning);
  stream.insert(stream.end(), prefix.begin(), prefix.end());
  return for_context(stream);
}

// ---------------------------------------------------------------------------
// LocalScorer

LocalScorer::LocalScorer(std::shared_ptr<const ToyModel> model, std::string name)
    : model_(std::move(model)), name_(name.empty() ? model_->name() : std::move(name)) {}

LocalScorer::Entry& LocalScorer::entry(std::string_view session) {
  auto it = sessions_.find(std::string(session));
  if (it == sessions_.end()) {
    throw Error(ErrorCode::SessionClosed, "unknown session '" + std::string(session) + "'");
  }
  return *it->second;
}

void LocalScorer::open(std::string_view session, const ConditioningSpec& conditioning) {
  auto e = std::make_unique<Entry>();
  e->state = model_->start(conditioning);
  std::lock_guard lock(mu_);
  auto [it, inserted] = sessions_.emplace(std::string(session), std::move(e));
  if (!inserted) {
    throw Error(ErrorCode::ProtocolError, "session '" + std::string(session) + "' already open");
  }
  opened_.push_back(conditioning);
}

TokenDistribution LocalScorer::score(std::string_view session) {
  Entry* e = nullptr;
  {
    std::lock_guard lock(mu_);
    e = &entry(session);
    ++score_calls_;
  }
  return e->state->next().to_log();
}

void LocalScorer::append(std::string_view session, TokenId id) {
  Entry* e = nullptr;
  {
    std::lock_guard lock(mu_);
    e = &entry(session);
  }
  if (!model_->vocab().contains(id)) {
    throw Error(ErrorCode::InvalidArgument, "token id " + std::to_string(id) + " out of range");
  }
  if (e->finished) throw Error(ErrorCode::SessionClosed, "append after eos");
  e->state->push(id);
  e->prefix.push_back(id);
  if (id == model_->vocab().eos_id()) e->finished = true;
}

void LocalScorer::close(std::string_view session) {
  std::lock_guard lock(mu_);
  sessions_.erase(std::string(session));
}

std::vector<TokenId> LocalScorer::prefix_of(std::string_view session) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(std::string(session));
  if (it == sessions_.end()) {
    throw Error(ErrorCode::SessionClosed, "unknown session '" + std::string(session) + "'");
  }
  return it->second->prefix;
}

std::vector<ConditioningSpec> LocalScorer::opened() const {
  std::lock_guard lock(mu_);
  return opened_;
}

std::size_t LocalScorer::open_sessions() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::size_t LocalScorer::score_calls() const {
  std::lock_guard lock(mu_);
  return score_calls_;
}

// ---------------------------------------------------------------------------

namespace {

Rational rational_field(const nlohmann::json& cfg, const char* key, Rational fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  if (it->is_string()) return Rational::parse(it->get<std::string>());
  if (it->is_number_integer()) return Rational{it->get<std::int64_t>(), 1};
  throw Error(ErrorCode::InvalidArgument, std::string("'") + key + "' must be a \"num/den\" string");
}

TokenId lookup(const Vocabulary& v, const std::string& tok) {
  auto id = v.find(tok);
  if (!id) throw Error(ErrorCode::UnknownToken, "lexicon token '" + tok + "' not in vocabulary");
  return *id;
}

}  // namespace

std::shared_ptr<const ToyModel> load_toy_model(std::string_view kind,
                                               const std::filesystem::path& config) {
  auto cfg = nlohmann::json::parse(read_file(config));
  auto base = config.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  auto vocab = std::make_shared<const Vocabulary>(load_vocab(resolve(cfg.at("vocab").get<std::string>())));

  if (kind == "lexicon") {
    LexiconConfig lc;
    lc.fidelity = rational_field(cfg, "fidelity", lc.fidelity);
    lc.eos_noise = rational_field(cfg, "eos_noise", lc.eos_noise);
    lc.seed = cfg.value("seed", std::uint64_t{0});
    if (auto it = cfg.find("lexicon"); it != cfg.end()) {
      for (const auto& [src, targets] : it->items()) {
        auto& out = lc.lexicon[lookup(*vocab, src)];
        for (const auto& t : targets) out.push_back(lookup(*vocab, t.get<std::string>()));
      }
    }
    return std::make_shared<LexiconModel>(vocab, std::move(lc));
  }
  if (kind == "ngram") {
    NGramConfig nc;
    nc.order = cfg.value("order", nc.order);
    nc.add_k = rational_field(cfg, "add_k", nc.add_k);
    std::vector<std::string> lines;
    if (auto it = cfg.find("train"); it != cfg.end()) lines = read_lines(resolve(it->get<std::string>()));
    return std::make_shared<NGramModel>(vocab, nc, lines);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown toy model kind '" + std::string(kind) + "'");
}

}  // namespace fusedec::toy
