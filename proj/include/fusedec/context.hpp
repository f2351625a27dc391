#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include "fusedec/prompting.hpp"

namespace fusedec {

inline constexpr std::size_t kDefaultContextWindow = 10;

/// Rolling (source, model translation) history of one document. Holds the
/// engine's own outputs only; confined to the document's decode stream.
class DocumentHistory {
 public:
  explicit DocumentHistory(std::string doc_id, std::size_t capacity = kDefaultContextWindow)
      : doc_id_(std::move(doc_id)), capacity_(capacity) {}

  const std::string& doc_id() const noexcept { return doc_id_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return pairs_.size(); }

  /// Appends, evicting the oldest pair once over capacity.
  void record(std::string src, std::string translation);
  /// Last min(n, size()) pairs, oldest first.
  std::vector<TranslationPair> window(std::size_t n) const;

 private:
  std::string doc_id_;
  std::size_t capacity_;
  std::deque<TranslationPair> pairs_;
};

}  // namespace fusedec
