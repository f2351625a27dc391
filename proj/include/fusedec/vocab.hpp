#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fusedec {

using TokenId = std::int32_t;

/// Special-token assignment, by token string. eos is mandatory.
struct SpecialTokens {
  std::optional<std::string> bos;
  std::string eos;
  std::optional<std::string> unk;
  std::optional<std::string> pad;
};

/// Shared target-side token inventory. Immutable after construction, so a
/// single instance can back any number of concurrent decodes.
///
/// The content hash is FNV-1a-64 over the UTF-8 bytes of "<index>\t<token>\n"
/// for every entry in id order, followed by one "#special:<name>=<index>\n"
/// line per declared special in the order bos, eos, unk, pad.
class Vocabulary {
 public:
  /// Throws Error{DuplicateToken} or Error{MissingSpecial}.
  Vocabulary(std::vector<std::string> tokens, const SpecialTokens& specials);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  bool contains(TokenId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }

  TokenId eos_id() const noexcept { return eos_id_; }
  std::optional<TokenId> bos_id() const noexcept { return bos_id_; }
  std::optional<TokenId> unk_id() const noexcept { return unk_id_; }
  std::optional<TokenId> pad_id() const noexcept { return pad_id_; }
  bool is_special(TokenId id) const noexcept;

  std::uint64_t hash() const noexcept { return hash_; }

  /// Whitespace tokenizer. Unknown pieces map to unk_id; without an unk
  /// declaration they raise Error{UnknownToken}.
  std::vector<TokenId> tokenize(std::string_view text) const;
  /// Joins non-special tokens with single spaces.
  std::string detokenize(std::span<const TokenId> ids) const;

  /// Serializes back into the line-per-token file format.
  std::string to_file_format() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> id_of_;
  TokenId eos_id_ = 0;
  std::optional<TokenId> bos_id_;
  std::optional<TokenId> unk_id_;
  std::optional<TokenId> pad_id_;
  std::uint64_t hash_ = 0;
};

/// Parses the vocab file format: one token per line, with optional
/// "#special: name=token" header lines. Blank lines are ignored.
Vocabulary parse_vocab(std::string_view content);
Vocabulary load_vocab(const std::filesystem::path& path);

/// Throws VocabMismatchError unless both hashes agree.
void check_compatible(const Vocabulary& a, const Vocabulary& b);
void check_compatible(std::uint64_t expected, std::uint64_t actual);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
/// 16 lowercase hex digits.
std::string format_hash(std::uint64_t h);
std::optional<std::uint64_t> parse_hash(std::string_view hex);

}  // namespace fusedec
