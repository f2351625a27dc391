#include "fusedec/vocab.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fusedec/error.hpp"

namespace fusedec {

namespace {

constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string format_hash(std::uint64_t h) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::optional<std::uint64_t> parse_hash(std::string_view hex) {
  if (hex.size() != 16) return std::nullopt;
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), value, 16);
  if (ec != std::errc() || ptr != hex.data() + hex.size()) return std::nullopt;
  return value;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, const SpecialTokens& specials)
    : tokens_(std::move(tokens)) {
  id_of_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = id_of_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw Error(ErrorCode::DuplicateToken,
                  "token '" + tokens_[i] + "' appears at ids " +
                      std::to_string(it->second) + " and " + std::to_string(i));
    }
  }

  auto resolve = [&](std::string_view name, const std::string& tok) -> TokenId {
    auto id = find(tok);
    if (!id) {
      throw Error(ErrorCode::MissingSpecial, "special " + std::string(name) + "='" +
                                                 tok + "' is not in the token list");
    }
    return *id;
  };
  if (specials.eos.empty()) {
    throw Error(ErrorCode::MissingSpecial, "no eos token declared");
  }
  eos_id_ = resolve("eos", specials.eos);
  if (specials.bos) bos_id_ = resolve("bos", *specials.bos);
  if (specials.unk) unk_id_ = resolve("unk", *specials.unk);
  if (specials.pad) pad_id_ = resolve("pad", *specials.pad);

  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    h = fnv1a64(std::to_string(i) + "\t" + tokens_[i] + "\n", h);
  }
  auto mix_special = [&](std::string_view name, std::optional<TokenId> id) {
    if (id) h = fnv1a64("#special:" + std::string(name) + "=" + std::to_string(*id) + "\n", h);
  };
  mix_special("bos", bos_id_);
  mix_special("eos", eos_id_);
  mix_special("unk", unk_id_);
  mix_special("pad", pad_id_);
  hash_ = h;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (!contains(id)) {
    throw Error(ErrorCode::InvalidArgument, "token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = id_of_.find(std::string(token));
  if (it == id_of_.end()) return std::nullopt;
  return it->second;
}

bool Vocabulary::is_special(TokenId id) const noexcept {
  return id == eos_id_ || id == bos_id_ || id == unk_id_ || id == pad_id_;
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (start == i) break;
    std::string_view piece = text.substr(start, i - start);
    if (auto id = find(piece)) {
      ids.push_back(*id);
    } else if (unk_id_) {
      ids.push_back(*unk_id_);
    } else {
      throw Error(ErrorCode::UnknownToken,
                  "piece '" + std::string(piece) + "' not in vocabulary and no unk declared");
    }
  }
  return ids;
}

std::string Vocabulary::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == eos_id_ || id == bos_id_ || id == pad_id_) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

std::string Vocabulary::to_file_format() const {
  std::string out;
  if (bos_id_) out += "#special: bos=" + token(*bos_id_) + "\n";
  out += "#special: eos=" + token(eos_id_) + "\n";
  if (unk_id_) out += "#special: unk=" + token(*unk_id_) + "\n";
  if (pad_id_) out += "#special: pad=" + token(*pad_id_) + "\n";
  for (const auto& t : tokens_) out += t + "\n";
  return out;
}

Vocabulary parse_vocab(std::string_view content) {
  std::vector<std::string> tokens;
  SpecialTokens specials;
  static constexpr std::string_view kHeader = "#special:";

  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.substr(0, kHeader.size()) == kHeader) {
      std::string_view decl = trim(line.substr(kHeader.size()));
      auto eq = decl.find('=');
      if (eq == std::string_view::npos) {
        throw Error(ErrorCode::MissingSpecial, "malformed header '" + std::string(line) + "'");
      }
      std::string name(trim(decl.substr(0, eq)));
      std::string tok(trim(decl.substr(eq + 1)));
      if (name == "eos") specials.eos = tok;
      else if (name == "bos") specials.bos = tok;
      else if (name == "unk") specials.unk = tok;
      else if (name == "pad") specials.pad = tok;
      else throw Error(ErrorCode::MissingSpecial, "unknown special '" + name + "'");
      continue;
    }
    std::string_view tok = trim(line);
    if (tok.empty()) continue;
    tokens.emplace_back(tok);
  }
  return Vocabulary(std::move(tokens), specials);
}

Vocabulary load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open vocab file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_vocab(buf.str());
}

void check_compatible(std::uint64_t expected, std::uint64_t actual) {
  if (expected != actual) throw VocabMismatchError(expected, actual);
}

void check_compatible(const Vocabulary& a, const Vocabulary& b) {
  check_compatible(a.hash(), b.hash());
}

}  // namespace fusedec
