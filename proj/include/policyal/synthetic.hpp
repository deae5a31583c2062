#pragma once

// Template-based privacy-policy generator with sentence-level ground truth,
// plus a clustered word-vector table over its vocabulary. Used by the demo
// CLI and the end-to-end tests.

#include <cstdint>
#include <string>
#include <vector>

#include "policyal/corpus.hpp"
#include "policyal/crowd.hpp"
#include "policyal/embedding.hpp"

namespace policyal::synthetic {

struct CorpusConfig {
  std::size_t policies = 20;
  std::size_t filler_min = 12;  // filler sentences per policy
  std::size_t filler_max = 24;
  double mention_rate = 0.6;   // chance a policy discusses a given category
  double bullet_rate = 0.25;   // chance a policy also has an introduced bullet list
  double follow_up_rate = 0.7; // chance a statement block has a second sentence
  // Relative weights of denial, assert, choice, ambiguous for mentioned actions.
  std::vector<double> mode_weights = {0.25, 0.4, 0.25, 0.1};
  std::vector<DataCategory> categories = {kAllCategories.begin(), kAllCategories.end()};
  std::uint64_t seed = 5;
};

struct GeneratedCorpus {
  std::vector<corpus::RawDocument> documents;
  // One label per statement block (provenance replay); sentence indices refer
  // to corpus::split_sentences of the matching document.
  std::vector<crowd::SegmentLabel> truth;
};

GeneratedCorpus generate_corpus(const CorpusConfig& config);

// Data-item phrases for a category, e.g. "email address" for contact.
const std::vector<std::string>& lexicon(DataCategory category);

// Vectors for every token of the given documents: lexicon words sit near
// their category centroid, mode cue words near their mode centroid, the rest
// are spread at random.
embedding::WordVectorTable build_vectors(const std::vector<corpus::RawDocument>& documents,
                                         std::size_t dim = 24, std::uint64_t seed = 3);

}  // namespace policyal::synthetic
