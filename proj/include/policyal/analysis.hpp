#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "policyal/corpus.hpp"
#include "policyal/crowd.hpp"
#include "policyal/textmodel.hpp"

namespace policyal::analysis {

// {assert, denial} and {choice, denial} conflict; nothing else does.
bool conflicting_pair(ActionMode a, ActionMode b);

struct Conflict {
  std::string doc_id;
  DataCategory category = DataCategory::kContact;
  DataAction action = DataAction::kCollectUse;
  std::set<ActionMode> modes;
  std::vector<std::string> segment_keys;  // relevant segments with a definite mode
  std::string note;                       // "legal-exception" when the text cites legal duties
};

// Labels of one document (InvalidArgument otherwise). Only relevant labels
// take part. Output is ordered by (category, action).
std::vector<Conflict> detect_conflicts(std::span<const crowd::SegmentLabel> labels);

struct DocumentMode {
  bool conflicting = false;
  ActionMode mode = ActionMode::kNotMentioned;  // unused when conflicting

  std::string name() const;
  friend bool operator==(const DocumentMode&, const DocumentMode&) = default;
};

using CellKey = std::pair<DataCategory, DataAction>;

// Every (category, action) cell of the document: not_mentioned without a
// relevant mention; "conflicting" when detect_conflicts flags the cell;
// otherwise ambiguous yields to any definite mode and choice beats assert.
std::map<CellKey, DocumentMode> document_rollup(std::span<const crowd::SegmentLabel> labels);

// Labels grouped by doc_id (stable order of first appearance).
std::vector<std::pair<std::string, std::vector<crowd::SegmentLabel>>> group_by_document(
    std::span<const crowd::SegmentLabel> labels);

// Minority duplication until both classes have equal counts. Returns indices
// into `labels` (originals first, then duplicates). Binary labels only;
// InvalidArgument when either class is empty.
std::vector<std::size_t> duplication_indices(std::span<const std::size_t> labels, std::uint64_t seed);
std::vector<textmodel::LabeledText> duplication_baseline(std::span<const textmodel::LabeledText> data,
                                                         std::uint64_t seed);

struct SavingsReport {
  std::string name;
  double n_nonal = 0.0;  // mean labels to reach the target, random arm
  double n_al = 0.0;     // mean labels, active arm
  double al_save = 0.0;  // (n_nonal - n_al) / n_nonal
  double m_start = 0.0;  // minority fraction of the bootstrap set
  double m_end = 0.0;    // minority fraction at the end of the active arm
  std::size_t seeds = 0;
  std::size_t exhausted_random = 0;
  std::size_t exhausted_al = 0;
  std::size_t al_wins = 0;  // seeds where the active arm saved >= the reported margin
};

double al_save(double n_nonal, double n_al);

// ---------------------------------------------------------------------------
// Corpus statistics

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

std::string to_csv(const Table& table);
nlohmann::json to_json(const Table& table);

struct CategoryDenials {
  DataCategory category = DataCategory::kContact;
  std::size_t labels = 0;   // relevant labels
  std::size_t denials = 0;  // relevant labels with a denial on any action
  std::optional<double> denial_pct() const;
};

struct CorpusReport {
  std::vector<CategoryDenials> denials;        // one per category
  Table by_category;                           // category | count | denial%
  std::optional<Table> by_downloads;           // downloads bin | policies | avg denials per policy
  std::optional<Table> by_rating;              // rating bin | policies | avg denials per policy
  Table modes_per_policy;                      // action x {assert, denial, choice}, avg per policy
  std::optional<Table> by_app_category;        // category x app category, avg per policy
};

std::string downloads_bin(std::uint64_t downloads);
std::string rating_bin(const std::optional<double>& rating);

// Popularity tables need metadata; without it they are omitted with a warning.
CorpusReport corpus_stats(std::span<const crowd::SegmentLabel> labels,
                          const std::map<std::string, corpus::SourceMeta>& metadata = {});

void write_report(const CorpusReport& report, const std::filesystem::path& dir);

}  // namespace policyal::analysis
