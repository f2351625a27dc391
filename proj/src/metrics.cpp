#include "fusedec/metrics.hpp"

#include <stdlib.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <unordered_map>

#include "fusedec/error.hpp"
#include "fusedec/subprocess.hpp"

namespace fusedec {

std::string MetricHandle::name() const {
  switch (kind) {
    case MetricKind::chrf: return "chrf";
    case MetricKind::exact_match: return "exact_match";
    case MetricKind::token_accuracy: return "token_accuracy";
    case MetricKind::external_command: return argv.empty() ? "external" : "external:" + argv.front();
  }
  return "chrf";
}

MetricHandle MetricHandle::builtin(std::string_view name) {
  if (name == "chrf") return {MetricKind::chrf, {}};
  if (name == "exact_match") return {MetricKind::exact_match, {}};
  if (name == "token_accuracy") return {MetricKind::token_accuracy, {}};
  throw Error(ErrorCode::MetricError, "unknown metric '" + std::string(name) + "'");
}

MetricHandle MetricHandle::external(std::vector<std::string> argv) {
  if (argv.empty()) throw Error(ErrorCode::MetricError, "empty external metric command");
  return {MetricKind::external_command, std::move(argv)};
}

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 0;
    if (len == 0 || i + static_cast<std::size_t>(len) > text.size()) {
      out.push_back(0xfffd);
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1f) : len == 3 ? (c & 0x0f) : (c & 0x07);
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + static_cast<std::size_t>(k)]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3f);
    }
    if (!ok) {
      out.push_back(0xfffd);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

namespace {

// Same set as Python's str.split() with no argument.
bool is_unicode_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0d) || (c >= 0x1c && c <= 0x20) || c == 0x85 || c == 0xa0 ||
         c == 0x1680 || (c >= 0x2000 && c <= 0x200a) || c == 0x2028 || c == 0x2029 ||
         c == 0x202f || c == 0x205f || c == 0x3000;
}

void require_aligned(std::span<const std::string> hyps, std::span<const std::string> refs) {
  if (hyps.size() != refs.size()) {
    throw Error(ErrorCode::MetricError, std::to_string(hyps.size()) + " hypotheses but " +
                                            std::to_string(refs.size()) + " references");
  }
}

struct NgramStats {
  std::int64_t hyp = 0;
  std::int64_t ref = 0;
  std::int64_t match = 0;
};

std::unordered_map<std::u32string, std::int64_t> char_ngrams(const std::u32string& s, std::size_t n) {
  std::unordered_map<std::u32string, std::int64_t> counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[s.substr(i, n)];
  return counts;
}

std::u32string strip_whitespace(std::string_view text) {
  std::u32string out;
  for (char32_t c : decode_utf8(text)) {
    if (!is_unicode_space(c)) out.push_back(c);
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (i < s.size()) {
    while (i < s.size() && space(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && !space(s[i])) ++i;
    if (start < i) parts.push_back(s.substr(start, i - start));
  }
  return parts;
}

}  // namespace

double chrf(std::span<const std::string> hyps, std::span<const std::string> refs, int char_order,
            double beta) {
  require_aligned(hyps, refs);
  std::vector<NgramStats> stats(static_cast<std::size_t>(char_order));
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto h = strip_whitespace(hyps[i]);
    const auto r = strip_whitespace(refs[i]);
    for (int n = 1; n <= char_order; ++n) {
      auto hc = char_ngrams(h, static_cast<std::size_t>(n));
      auto rc = char_ngrams(r, static_cast<std::size_t>(n));
      NgramStats& st = stats[static_cast<std::size_t>(n - 1)];
      for (const auto& [g, c] : hc) {
        st.hyp += c;
        if (auto it = rc.find(g); it != rc.end()) st.match += std::min(c, it->second);
      }
      for (const auto& [g, c] : rc) st.ref += c;
    }
  }

  double avg_prec = 0.0;
  double avg_rec = 0.0;
  int effective_order = 0;
  for (const auto& st : stats) {
    if (st.hyp > 0 && st.ref > 0) {
      avg_prec += static_cast<double>(st.match) / static_cast<double>(st.hyp);
      avg_rec += static_cast<double>(st.match) / static_cast<double>(st.ref);
      ++effective_order;
    }
  }
  if (effective_order == 0) return 0.0;
  avg_prec /= effective_order;
  avg_rec /= effective_order;
  if (avg_prec + avg_rec == 0.0) return 0.0;
  const double b2 = beta * beta;
  return 100.0 * (1 + b2) * avg_prec * avg_rec / (b2 * avg_prec + avg_rec);
}

double exact_match(std::span<const std::string> hyps, std::span<const std::string> refs) {
  require_aligned(hyps, refs);
  if (hyps.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) hits += hyps[i] == refs[i] ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(hyps.size());
}

double token_accuracy(std::span<const std::string> hyps, std::span<const std::string> refs) {
  require_aligned(hyps, refs);
  std::size_t matches = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    auto h = split_ws(hyps[i]);
    auto r = split_ws(refs[i]);
    const std::size_t common = std::min(h.size(), r.size());
    for (std::size_t j = 0; j < common; ++j) matches += h[j] == r[j] ? 1 : 0;
    total += std::max(h.size(), r.size());
  }
  if (total == 0) return hyps.empty() ? 0.0 : 100.0;
  return 100.0 * static_cast<double>(matches) / static_cast<double>(total);
}

double run_external_metric(const std::vector<std::string>& argv, std::span<const std::string> hyps,
                           std::span<const std::string> refs) {
  if (argv.empty()) throw Error(ErrorCode::MetricError, "empty external metric command");
  std::string tmpl = (std::filesystem::temp_directory_path() / "fusedec-metric-XXXXXX").string();
  if (::mkdtemp(tmpl.data()) == nullptr) throw Error(ErrorCode::MetricError, "cannot create temp dir");
  const std::filesystem::path dir(tmpl);
  const auto hyp_path = dir / "hyp.txt";
  const auto ref_path = dir / "ref.txt";

  struct Cleanup {
    std::filesystem::path dir;
    ~Cleanup() {
      std::error_code ec;
      std::filesystem::remove_all(dir, ec);
    }
  } cleanup{dir};

  write_lines({hyps.begin(), hyps.end()}, hyp_path);
  write_lines({refs.begin(), refs.end()}, ref_path);

  std::vector<std::string> args;
  bool substituted = false;
  for (const auto& a : argv) {
    if (a == "{hyp}") {
      args.push_back(hyp_path.string());
      substituted = true;
    } else if (a == "{ref}") {
      args.push_back(ref_path.string());
      substituted = true;
    } else {
      args.push_back(a);
    }
  }
  if (!substituted) {
    args.push_back(hyp_path.string());
    args.push_back(ref_path.string());
  }

  ProcessOutput out;
  try {
    out = run_process(args);
  } catch (const Error& e) {
    throw Error(ErrorCode::MetricError, e.what());
  }
  if (out.exit_code != 0) {
    throw Error(ErrorCode::MetricError, "metric command exited with " + std::to_string(out.exit_code) +
                                            ": " + out.err);
  }
  const char* begin = out.out.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  std::string_view rest(end);
  if (end == begin || rest.find_first_not_of(" \t\r\n") != std::string_view::npos) {
    throw Error(ErrorCode::MetricError, "metric command printed '" + out.out + "', expected one float");
  }
  return value;
}

double score(const MetricHandle& metric, std::span<const std::string> hyps,
             std::span<const std::string> refs) {
  switch (metric.kind) {
    case MetricKind::chrf: return chrf(hyps, refs);
    case MetricKind::exact_match: return exact_match(hyps, refs);
    case MetricKind::token_accuracy: return token_accuracy(hyps, refs);
    case MetricKind::external_command: return run_external_metric(metric.argv, hyps, refs);
  }
  throw Error(ErrorCode::MetricError, "unsupported metric");
}

// ---------------------------------------------------------------------------
// Targeted-word accuracy

namespace {

bool is_word_char(char32_t c) {
  if (c < 0x80) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }
  if (is_unicode_space(c)) return false;
  // Latin-1 punctuation and symbols, multiplication and division signs.
  if ((c >= 0xa1 && c <= 0xbf && c != 0xaa && c != 0xb5 && c != 0xba) || c == 0xd7 || c == 0xf7) {
    return false;
  }
  // General punctuation, currency symbols, CJK punctuation, fullwidth ASCII punctuation.
  if ((c >= 0x2000 && c <= 0x206f) || (c >= 0x20a0 && c <= 0x20cf) || (c >= 0x3000 && c <= 0x303f)) {
    return false;
  }
  if ((c >= 0xff01 && c <= 0xff0f) || (c >= 0xff1a && c <= 0xff20) || (c >= 0xff3b && c <= 0xff40) ||
      (c >= 0xff5b && c <= 0xff65)) {
    return false;
  }
  return c != 0xfffd;
}

char32_t fold_case(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 0x20;
  if (c >= 0xc0 && c <= 0xde && c != 0xd7) return c + 0x20;
  if (c >= 0x100 && c <= 0x17f && c != 0x130 && c != 0x131 && c != 0x138 && c != 0x149 && c != 0x17f) {
    // Latin Extended-A pairs: upper even below U+0138, upper odd above.
    if (c < 0x138) return (c % 2 == 0) ? c + 1 : c;
    return (c % 2 == 1) ? c + 1 : c;
  }
  if (c >= 0x391 && c <= 0x3a9 && c != 0x3a2) return c + 0x20;
  if (c >= 0x410 && c <= 0x42f) return c + 0x20;
  if (c >= 0x400 && c <= 0x40f) return c + 0x50;
  return c;
}

std::u32string prepare(std::string_view s, bool case_fold) {
  auto cps = decode_utf8(s);
  if (case_fold) {
    for (auto& c : cps) c = fold_case(c);
  }
  return cps;
}

}  // namespace

bool contains_full_token(std::string_view text, std::string_view form, bool case_fold) {
  const auto hay = prepare(text, case_fold);
  const auto needle = prepare(form, case_fold);
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (std::size_t pos = hay.find(needle); pos != std::u32string::npos; pos = hay.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]);
    const std::size_t after = pos + needle.size();
    const bool right_ok = after == hay.size() || !is_word_char(hay[after]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

std::vector<PhenomenonAccuracy> targeted_accuracy(const Corpus& corpus, std::span<const std::string> hyps,
                                                  bool case_fold) {
  if (hyps.size() != corpus.size()) {
    throw Error(ErrorCode::MetricError, std::to_string(hyps.size()) + " hypotheses for " +
                                            std::to_string(corpus.size()) + " segments");
  }
  std::map<std::string, PhenomenonAccuracy> table;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Segment& seg = corpus[i];
    if (seg.target_words.empty()) continue;
    const std::string key = seg.phenomenon.value_or("unspecified");
    auto& row = table[key];
    row.phenomenon = key;
    ++row.total;
    const bool hit = std::any_of(seg.target_words.begin(), seg.target_words.end(),
                                 [&](const std::string& w) { return contains_full_token(hyps[i], w, case_fold); });
    if (hit) ++row.correct;
  }
  std::vector<PhenomenonAccuracy> out;
  for (auto& [_, row] : table) {
    row.accuracy = 100.0 * static_cast<double>(row.correct) / static_cast<double>(row.total);
    out.push_back(row);
  }
  return out;
}

}  // namespace fusedec
