#include "fusedec/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "fusedec/error.hpp"

namespace fusedec {

using nlohmann::json;

Corpus::Corpus(std::vector<Segment> segments) : segments_(std::move(segments)) {
  std::unordered_set<std::string> ids;
  std::unordered_map<std::string, std::size_t> doc_index;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& s = segments_[i];
    if (!ids.insert(s.id).second) {
      throw Error(ErrorCode::IngestError, "duplicate segment id '" + s.id + "'");
    }
    if (s.phenomenon && s.target_words.empty()) {
      throw Error(ErrorCode::IngestError,
                  "segment '" + s.id + "' has a phenomenon but no target_words");
    }
    if (!s.doc_id) {
      documents_.push_back({"", {i}});
      continue;
    }
    auto [it, inserted] = doc_index.emplace(*s.doc_id, documents_.size());
    if (inserted) documents_.push_back({*s.doc_id, {}});
    documents_[it->second].segments.push_back(i);
  }
}

std::vector<std::string> Corpus::references() const {
  std::vector<std::string> refs;
  refs.reserve(segments_.size());
  for (const auto& s : segments_) {
    if (!s.ref) throw Error(ErrorCode::MetricError, "segment '" + s.id + "' has no reference");
    refs.push_back(*s.ref);
  }
  return refs;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename into " + path.string() + ": " + ec.message());
}

void write_lines(const std::vector<std::string>& lines, const std::filesystem::path& path) {
  std::string content;
  for (const auto& l : lines) {
    content += l;
    content += '\n';
  }
  write_file_atomic(path, content);
}

namespace {

std::optional<std::string> opt_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(ErrorCode::IngestError, std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

Corpus parse_jsonl(const std::string& content) {
  std::istringstream in(content);
  std::vector<Segment> segments;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::IngestError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error(ErrorCode::IngestError, "line " + std::to_string(line_no) + " is not an object");
    }
    Segment s;
    auto src = opt_string(obj, "src");
    if (!src) throw Error(ErrorCode::IngestError, "line " + std::to_string(line_no) + ": missing src");
    s.src = *src;
    s.id = opt_string(obj, "id").value_or(std::to_string(line_no));
    s.doc_id = opt_string(obj, "doc_id");
    s.ref = opt_string(obj, "ref");
    s.domain = opt_string(obj, "domain");
    s.phenomenon = opt_string(obj, "phenomenon");
    if (auto it = obj.find("target_words"); it != obj.end() && !it->is_null()) {
      if (!it->is_array()) throw Error(ErrorCode::IngestError, "target_words must be an array");
      for (const auto& w : *it) {
        if (!w.is_string()) throw Error(ErrorCode::IngestError, "target_words entries must be strings");
        s.target_words.push_back(w.get<std::string>());
      }
    }
    segments.push_back(std::move(s));
  }
  return Corpus(std::move(segments));
}

Corpus ingest_jsonl(const std::filesystem::path& path) { return parse_jsonl(read_file(path)); }

Corpus ingest_parallel(const std::filesystem::path& src,
                       const std::optional<std::filesystem::path>& ref) {
  auto src_lines = read_lines(src);
  std::vector<std::string> ref_lines;
  if (ref) {
    ref_lines = read_lines(*ref);
    if (ref_lines.size() != src_lines.size()) {
      throw Error(ErrorCode::IngestError, "source has " + std::to_string(src_lines.size()) +
                                              " lines but reference has " +
                                              std::to_string(ref_lines.size()));
    }
  }
  std::vector<Segment> segments;
  segments.reserve(src_lines.size());
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    Segment s;
    s.id = std::to_string(i + 1);
    s.src = src_lines[i];
    if (ref) s.ref = ref_lines[i];
    segments.push_back(std::move(s));
  }
  return Corpus(std::move(segments));
}

std::string to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus.segments()) {
    nlohmann::ordered_json obj;
    obj["id"] = s.id;
    if (s.doc_id) obj["doc_id"] = *s.doc_id;
    obj["src"] = s.src;
    if (s.ref) obj["ref"] = *s.ref;
    if (s.domain) obj["domain"] = *s.domain;
    if (!s.target_words.empty()) obj["target_words"] = s.target_words;
    if (s.phenomenon) obj["phenomenon"] = *s.phenomenon;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, to_jsonl(corpus));
}

}  // namespace fusedec
