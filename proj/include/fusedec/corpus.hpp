#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fusedec {

/// One source segment plus optional reference and targeted-word annotations.
struct Segment {
  std::string id;
  std::optional<std::string> doc_id;
  std::string src;
  std::optional<std::string> ref;
  std::optional<std::string> domain;
  std::vector<std::string> target_words;
  std::optional<std::string> phenomenon;
};

struct Document {
  std::string doc_id;                  // empty for segments without a doc_id
  std::vector<std::size_t> segments;   // indices into Corpus::segments, document order
};

class Corpus {
 public:
  Corpus() = default;
  /// Validates id uniqueness and annotation invariants; throws Error{IngestError}.
  explicit Corpus(std::vector<Segment> segments);

  const std::vector<Segment>& segments() const noexcept { return segments_; }
  std::size_t size() const noexcept { return segments_.size(); }
  bool empty() const noexcept { return segments_.empty(); }
  const Segment& operator[](std::size_t i) const { return segments_[i]; }

  /// Grouping by doc_id in order of first appearance. Segments without a
  /// doc_id each form their own single-segment document.
  const std::vector<Document>& documents() const noexcept { return documents_; }

  /// References in corpus order; throws Error{MetricError} if any is missing.
  std::vector<std::string> references() const;

 private:
  std::vector<Segment> segments_;
  std::vector<Document> documents_;
};

/// JSONL with fields id, doc_id, src, ref, domain, target_words, phenomenon.
/// Only src is required; a missing id defaults to the 1-based line number.
Corpus ingest_jsonl(const std::filesystem::path& path);
Corpus parse_jsonl(const std::string& content);
/// Aligned plain-text files, one segment per line.
Corpus ingest_parallel(const std::filesystem::path& src,
                       const std::optional<std::filesystem::path>& ref = std::nullopt);

std::string to_jsonl(const Corpus& corpus);
void write_jsonl(const Corpus& corpus, const std::filesystem::path& path);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::vector<std::string>& lines, const std::filesystem::path& path);
/// Writes to a sibling temp file and renames into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace fusedec
