#include "fusedec/context.hpp"

#include <algorithm>

namespace fusedec {

void DocumentHistory::record(std::string src, std::string translation) {
  if (capacity_ == 0) return;
  pairs_.push_back({std::move(src), std::move(translation)});
  while (pairs_.size() > capacity_) pairs_.pop_front();
}

std::vector<TranslationPair> DocumentHistory::window(std::size_t n) const {
  const std::size_t take = std::min(n, pairs_.size());
  return {pairs_.end() - static_cast<std::ptrdiff_t>(take), pairs_.end()};
}

}  // namespace fusedec
