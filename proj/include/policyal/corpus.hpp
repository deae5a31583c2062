#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace policyal::corpus {

struct SourceMeta {
  std::string app_category;
  std::uint64_t downloads = 0;
  std::optional<double> rating;  // 1-5, absent when the store reports none
  std::uint64_t review_count = 0;
};

struct RawDocument {
  std::string doc_id;
  std::string text;
  std::optional<SourceMeta> source_meta;
};

struct Sentence {
  std::size_t index = 0;
  std::string text;
  std::size_t start = 0;  // char span into the document text, [start, end)
  std::size_t end = 0;
  bool from_bullet = false;
};

struct Policy {
  std::string doc_id;
  std::vector<Sentence> sentences;
  std::vector<std::string> filter_trace;
};

struct FilterConfig {
  std::vector<std::string> legal_keywords = {"privacy", "personal information", "collect",
                                             "third party", "data"};
  std::size_t min_keyword_hits = 2;
  std::size_t min_chars = 500;
  double min_stopword_ratio = 0.15;
};

enum class RejectReason { kNone, kNonLegal, kNonEnglish, kTooShort, kDuplicate };

std::string_view to_string(RejectReason r);

struct FilterDecision {
  bool keep = false;
  RejectReason reason = RejectReason::kNone;
  std::vector<std::string> passed;  // gate names in evaluation order
};

std::uint64_t content_hash(std::string_view text);

// Pure: does not insert into seen_hashes.
FilterDecision filter_document(const RawDocument& doc,
                               const std::unordered_set<std::uint64_t>& seen_hashes,
                               const FilterConfig& config);

// Owns the duplicate-hash set; admit() is safe to call from several threads.
class CorpusFilter {
 public:
  explicit CorpusFilter(FilterConfig config = {}) : config_(std::move(config)) {}

  FilterDecision admit(const RawDocument& doc);
  const FilterConfig& config() const { return config_; }

 private:
  FilterConfig config_;
  std::mutex mu_;
  std::unordered_set<std::uint64_t> seen_;
};

// Throws DegenerateDocument when no sentence survives.
Policy split_sentences(const RawDocument& doc);

// One .txt per policy (stem = doc_id), sorted by doc_id. The optional
// metadata file is JSON Lines {doc_id, app_category, downloads, rating,
// review_count}.
std::vector<RawDocument> load_corpus_dir(const std::filesystem::path& dir,
                                         const std::optional<std::filesystem::path>& metadata = {});

std::vector<std::pair<std::string, SourceMeta>> load_metadata(const std::filesystem::path& path);

struct IngestResult {
  std::vector<Policy> policies;
  std::vector<std::pair<std::string, RejectReason>> rejected;
};

IngestResult ingest(const std::vector<RawDocument>& docs, const FilterConfig& config);

}  // namespace policyal::corpus
