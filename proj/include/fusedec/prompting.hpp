#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fusedec {

enum class PromptTemplate { baseline, domain, few_shot, context, none };

std::string_view to_string(PromptTemplate t);
/// Throws Error{InvalidPromptSpec} for unknown names.
PromptTemplate prompt_template_from_string(std::string_view name);

struct TranslationPair {
  std::string src;
  std::string tgt;

  friend bool operator==(const TranslationPair&, const TranslationPair&) = default;
};

/// Declarative description of the LLM conditioning text.
struct PromptSpec {
  PromptTemplate tmpl = PromptTemplate::baseline;
  std::string src_language;  // display names, e.g. "German"
  std::string tgt_language;
  std::string style;                     // domain only
  std::vector<TranslationPair> shots;    // few_shot only
  std::vector<TranslationPair> context;  // context only; oldest first
  std::string src;

  friend bool operator==(const PromptSpec&, const PromptSpec&) = default;
};

/// Renders the conditioning text. Lines are joined by a single '\n' and the
/// result ends with "<tgt-language>:" and no trailing whitespace, e.g.
///
///   Translate the following sentence from German to English:
///   German: Hallo.
///   English:
///
/// Example pairs (few_shot) or prior document pairs (context) sit between
/// the instruction and the final source line, one "src\ntgt" block each.
/// The none template renders the empty string.
/// Throws Error{InvalidPromptSpec} on a domain spec without style or a
/// few_shot spec without shots.
std::string render(const PromptSpec& spec);

/// Copy of `base` switched to the context template, carrying the last
/// min(n, history.size()) pairs of `history` in document order.
PromptSpec build_context_spec(PromptSpec base, std::span<const TranslationPair> history,
                              std::size_t n);

/// First n entries of a JSONL shots file of {"src": ..., "tgt": ...}.
std::vector<TranslationPair> load_shots(const std::filesystem::path& path, std::size_t n);

/// ISO code -> English display name. Starts from a built-in table; entries
/// from a JSON object override or extend it.
class LanguageNames {
 public:
  LanguageNames();
  void merge_json(const std::string& json_object);
  /// Unknown codes are returned unchanged, so display names pass through.
  std::string name(std::string_view code) const;

 private:
  std::map<std::string, std::string, std::less<>> names_;
};

}  // namespace fusedec
