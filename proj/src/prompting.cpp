#include "fusedec/prompting.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "fusedec/corpus.hpp"
#include "fusedec/error.hpp"

namespace fusedec {

std::string_view to_string(PromptTemplate t) {
  switch (t) {
    case PromptTemplate::baseline: return "baseline";
    case PromptTemplate::domain: return "domain";
    case PromptTemplate::few_shot: return "few_shot";
    case PromptTemplate::context: return "context";
    case PromptTemplate::none: return "none";
  }
  return "baseline";
}

PromptTemplate prompt_template_from_string(std::string_view name) {
  for (auto t : {PromptTemplate::baseline, PromptTemplate::domain, PromptTemplate::few_shot,
                 PromptTemplate::context, PromptTemplate::none}) {
    if (to_string(t) == name) return t;
  }
  throw Error(ErrorCode::InvalidPromptSpec, "unknown prompt template '" + std::string(name) + "'");
}

std::string render(const PromptSpec& spec) {
  if (spec.tmpl == PromptTemplate::none) return {};
  if (spec.tmpl == PromptTemplate::domain && spec.style.empty()) {
    throw Error(ErrorCode::InvalidPromptSpec, "domain template requires a style");
  }
  if (spec.tmpl == PromptTemplate::few_shot && spec.shots.empty()) {
    throw Error(ErrorCode::InvalidPromptSpec, "few_shot template requires at least one shot");
  }
  if (spec.src_language.empty() || spec.tgt_language.empty()) {
    throw Error(ErrorCode::InvalidPromptSpec, "source and target language names are required");
  }

  const std::string& s = spec.src_language;
  const std::string& t = spec.tgt_language;
  std::string out = "Translate the following sentence from " + s + " to " + t;
  if (spec.tmpl == PromptTemplate::domain) out += " in a " + spec.style + " style";
  out += ":\n";

  const std::vector<TranslationPair>* examples = nullptr;
  if (spec.tmpl == PromptTemplate::few_shot) examples = &spec.shots;
  if (spec.tmpl == PromptTemplate::context) examples = &spec.context;
  if (examples) {
    for (const auto& ex : *examples) {
      out += s + ": " + ex.src + "\n" + t + ": " + ex.tgt + "\n";
    }
  }
  out += s + ": " + spec.src + "\n" + t + ":";
  return out;
}

PromptSpec build_context_spec(PromptSpec base, std::span<const TranslationPair> history,
                              std::size_t n) {
  const std::size_t take = std::min(n, history.size());
  base.tmpl = PromptTemplate::context;
  base.context.assign(history.end() - static_cast<std::ptrdiff_t>(take), history.end());
  return base;
}

std::vector<TranslationPair> load_shots(const std::filesystem::path& path, std::size_t n) {
  std::vector<TranslationPair> shots;
  std::istringstream in(read_file(path));
  std::string line;
  while (shots.size() < n && std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object() || !obj.contains("src") || !obj.contains("tgt")) {
      throw Error(ErrorCode::InvalidPromptSpec, "malformed shots line in " + path.string());
    }
    shots.push_back({obj["src"].get<std::string>(), obj["tgt"].get<std::string>()});
  }
  return shots;
}

LanguageNames::LanguageNames()
    : names_{{"ar", "Arabic"},  {"cs", "Czech"},   {"de", "German"},   {"en", "English"},
             {"es", "Spanish"}, {"fr", "French"},  {"ha", "Hausa"},    {"it", "Italian"},
             {"ja", "Japanese"}, {"ko", "Korean"}, {"nl", "Dutch"},    {"pl", "Polish"},
             {"pt", "Portuguese"}, {"ru", "Russian"}, {"tr", "Turkish"}, {"uk", "Ukrainian"},
             {"zh", "Chinese"}} {}

void LanguageNames::merge_json(const std::string& json_object) {
  auto obj = nlohmann::json::parse(json_object);
  if (!obj.is_object()) throw Error(ErrorCode::InvalidArgument, "language table must be a JSON object");
  for (const auto& [code, name] : obj.items()) names_[code] = name.get<std::string>();
}

std::string LanguageNames::name(std::string_view code) const {
  auto it = names_.find(code);
  return it == names_.end() ? std::string(code) : it->second;
}

}  // namespace fusedec
