#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "policyal/corpus.hpp"

namespace policyal::embedding {

class WordVectorTable {
 public:
  WordVectorTable() = default;
  explicit WordVectorTable(std::size_t dimension) : dim_(dimension) {}

  // Throws InvalidArgument on dimension mismatch.
  void add(std::string token, std::vector<double> vec);

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return index_.size(); }
  bool empty() const { return index_.empty(); }

  // Row id or -1 when the token is out of vocabulary.
  std::ptrdiff_t find(std::string_view token) const;
  std::span<const double> row(std::size_t id) const {
    return {data_.data() + id * dim_, dim_};
  }
  const std::string& token(std::size_t id) const { return tokens_[id]; }

  WordVectorTable scaled(double factor) const;

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::size_t dim_ = 0;
  std::vector<double> data_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
};

// GloVe-style text layout: token followed by d reals per line.
WordVectorTable load_vectors(const std::filesystem::path& path);
void save_vectors(const WordVectorTable& table, const std::filesystem::path& path);

// Normalized bag of in-vocabulary content words. Counts stay integral so the
// transport problem can be solved exactly.
struct Bag {
  std::vector<std::size_t> rows;      // table row ids, unique, ascending
  std::vector<std::int64_t> counts;   // occurrences per row
  std::int64_t total = 0;

  bool empty() const { return total == 0; }
};

// Lowercase, strip punctuation, drop stop words and OOV tokens.
Bag make_bag(std::string_view text, const WordVectorTable& table);
Bag merge(const Bag& a, const Bag& b);

// Word Mover's Distance between two bags: exact earth mover distance with
// Euclidean ground cost. Throws OutOfVocabulary if either bag is empty.
double wmd(const Bag& a, const Bag& b, const WordVectorTable& table);
double wmd(std::string_view a, std::string_view b, const WordVectorTable& table);

enum class PairMode { kAdjacent, kAllPairs };

struct WmdStats {
  double mean = 0.0;
  double std = 0.0;
  double threshold = 0.0;
  std::size_t pairs = 0;
};

WmdStats stats_from_distances(std::span<const double> distances, double alpha);

// Mean/std over WMD of adjacent (default) or all pairs of usable sentences;
// threshold = max(0, mean - alpha * std). Throws DegenerateDocument when
// fewer than two sentences have in-vocabulary content.
WmdStats document_wmd_stats(const corpus::Policy& policy, const WordVectorTable& table,
                            double alpha, PairMode mode = PairMode::kAdjacent);

// Same, from precomputed per-sentence bags (empty bags are skipped).
WmdStats document_wmd_stats(std::span<const Bag> bags, const WordVectorTable& table,
                            double alpha, PairMode mode = PairMode::kAdjacent);

}  // namespace policyal::embedding
