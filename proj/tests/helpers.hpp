#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>

#include "fusedec/error.hpp"
#include "fusedec/scorer.hpp"
#include "fusedec/vocab.hpp"

namespace fusedec::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("fusedec-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// <s> </s> a b
inline std::shared_ptr<const Vocabulary> abVocab() {
  SpecialTokens sp;
  sp.bos = "<s>";
  sp.eos = "</s>";
  return std::make_shared<const Vocabulary>(std::vector<std::string>{"<s>", "</s>", "a", "b"}, sp);
}

// <s> </s> <unk> a b c
inline std::shared_ptr<const Vocabulary> abcVocab() {
  SpecialTokens sp;
  sp.bos = "<s>";
  sp.eos = "</s>";
  sp.unk = "<unk>";
  return std::make_shared<const Vocabulary>(std::vector<std::string>{"<s>", "</s>", "<unk>", "a", "b", "c"}, sp);
}

/// Scripted scorer for engine tests. The distribution is a function of the
/// session's conditioning and prefix; `fail_when` can inject errors.
class FakeScorer final : public Scorer {
 public:
  using DistFn = std::function<std::vector<double>(const ConditioningSpec&, const std::vector<TokenId>&)>;
  using FailFn = std::function<void(const ConditioningSpec&, const std::vector<TokenId>&)>;

  FakeScorer(std::uint64_t hash, DistFn fn, std::string name = "fake")
      : hash_(hash), fn_(std::move(fn)), name_(std::move(name)) {}

  FailFn fail_when;

  std::string name() const override { return name_; }
  std::uint64_t vocab_hash() const override { return hash_; }
  void open(std::string_view s, const ConditioningSpec& c) override {
    std::lock_guard lock(mu_);
    if (sessions_.count(std::string(s))) throw Error(ErrorCode::ProtocolError, "duplicate session");
    sessions_[std::string(s)] = {c, {}};
    ++opens_;
  }
  TokenDistribution score(std::string_view s) override {
    std::pair<ConditioningSpec, std::vector<TokenId>> st;
    {
      std::lock_guard lock(mu_);
      auto it = sessions_.find(std::string(s));
      if (it == sessions_.end()) throw Error(ErrorCode::SessionClosed, "unknown session");
      st = it->second;
      ++scores_;
    }
    if (fail_when) fail_when(st.first, st.second);
    return TokenDistribution{fn_(st.first, st.second)};
  }
  void append(std::string_view s, TokenId id) override {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(std::string(s));
    if (it == sessions_.end()) throw Error(ErrorCode::SessionClosed, "unknown session");
    it->second.second.push_back(id);
  }
  void close(std::string_view s) override {
    std::lock_guard lock(mu_);
    sessions_.erase(std::string(s));
    ++closes_;
  }

  std::size_t opens() const { std::lock_guard lock(mu_); return opens_; }
  std::size_t closes() const { std::lock_guard lock(mu_); return closes_; }
  std::size_t scores() const { std::lock_guard lock(mu_); return scores_; }
  std::size_t live() const { std::lock_guard lock(mu_); return sessions_.size(); }

 private:
  std::uint64_t hash_;
  DistFn fn_;
  std::string name_;
  mutable std::mutex mu_;
  std::map<std::string, std::pair<ConditioningSpec, std::vector<TokenId>>> sessions_;
  std::size_t opens_ = 0;
  std::size_t closes_ = 0;
  std::size_t scores_ = 0;
};

inline std::vector<double> log_of(const std::vector<double>& probs) {
  std::vector<double> out;
  for (double p : probs) out.push_back(std::log(p));
  return out;
}

}  // namespace fusedec::testing
