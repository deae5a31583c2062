#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "policyal/corpus.hpp"
#include "policyal/embedding.hpp"
#include "policyal/textmodel.hpp"
#include "policyal/types.hpp"

namespace policyal::segmenter {

struct Segment {
  std::string doc_id;
  std::size_t first_index = 0;  // inclusive sentence range
  std::size_t last_index = 0;
  std::size_t seed_index = 0;
  DataCategory category = DataCategory::kContact;
  std::string text;

  std::size_t length() const { return last_index - first_index + 1; }
  bool contains(std::size_t sentence) const {
    return sentence >= first_index && sentence <= last_index;
  }
  // "doc:category:first-last"
  std::string key() const;
  friend bool operator==(const Segment&, const Segment&) = default;
};

// Joined member-sentence texts of policy[first..last].
std::string join_sentences(const corpus::Policy& policy, std::size_t first, std::size_t last);
Segment make_segment(const corpus::Policy& policy, DataCategory category, std::size_t first,
                     std::size_t last, std::size_t seed);

struct RelevantSentence {
  std::size_t index = 0;
  double probability = 0.0;
};

// Sentences with P(relevant) >= tau_rel, in document order. The model must be
// binary (class 1 = relevant).
std::vector<RelevantSentence> relevant_sentences(const corpus::Policy& policy,
                                                 const textmodel::TextClassifier& model,
                                                 double tau_rel);

struct SegmenterConfig {
  double alpha = 0.5;
  double tau_rel = 0.5;
  std::size_t max_span = 8;
  embedding::PairMode pairs = embedding::PairMode::kAdjacent;
};

// Per-policy sentence bags, computed once and shared by every contextualize
// call on the same policy.
class PolicyBags {
 public:
  PolicyBags(const corpus::Policy& policy, const embedding::WordVectorTable& table);

  const embedding::Bag& operator[](std::size_t i) const { return bags_[i]; }
  std::span<const embedding::Bag> all() const { return bags_; }
  std::size_t size() const { return bags_.size(); }

 private:
  std::vector<embedding::Bag> bags_;
};

// Grows a segment around `seed`: alternately tests the previous then the next
// neighbour against the pooled bag of the current segment; a neighbour joins
// iff WMD <= stats.threshold. A rejected side stays closed. Stops when both
// sides are closed, at document bounds, or at max_span sentences. An
// out-of-vocabulary seed yields the seed alone.
Segment contextualize(std::size_t seed, const corpus::Policy& policy, const PolicyBags& bags,
                      const embedding::WmdStats& stats, const embedding::WordVectorTable& table,
                      DataCategory category, std::size_t max_span = 8);

// Sorted by first_index; overlapping ranges merged into their union (the
// earliest seed is kept).
std::vector<Segment> merge_overlapping(std::vector<Segment> segments, const corpus::Policy& policy);

std::vector<Segment> segment_policy(const corpus::Policy& policy, DataCategory category,
                                    const textmodel::TextClassifier& category_model,
                                    const embedding::WordVectorTable& table,
                                    const SegmenterConfig& config = {});

// segment_policy over a corpus, in policy order. Policies too degenerate for
// WMD statistics are skipped with a warning.
std::vector<Segment> segment_corpus(std::span<const corpus::Policy> policies, DataCategory category,
                                    const textmodel::TextClassifier& category_model,
                                    const embedding::WordVectorTable& table,
                                    const SegmenterConfig& config = {});

// JSON Lines {doc_id, category, first_index, last_index, seed_index, text}.
void save_segments(std::span<const Segment> segments, const std::filesystem::path& path);
std::vector<Segment> load_segments(const std::filesystem::path& path);

}  // namespace policyal::segmenter
