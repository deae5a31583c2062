#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "policyal/corpus.hpp"
#include "policyal/crowd.hpp"
#include "policyal/embedding.hpp"
#include "policyal/query.hpp"
#include "policyal/segmenter.hpp"
#include "policyal/sources.hpp"
#include "policyal/textmodel.hpp"

namespace policyal::al {

struct PruneConfig {
  double tau = 0.1;        // uncertainty units
  std::size_t window = 3;  // consecutive rounds below tau
};

struct PoolEntry {
  std::size_t item = 0;
  std::deque<double> history;  // least-confidence uncertainty, newest last, size <= window
  bool pruned = false;
  bool consumed = false;  // already selected for labeling
};

std::vector<PoolEntry> make_pool(std::size_t n);
std::size_t active_count(std::span<const PoolEntry> pool);

// Scores every active entry with the model, records uncertainty history,
// prunes persistently certain entries and returns up to k items by
// descending score (stable in pool order). Selected entries are consumed.
// Throws PoolExhausted when no active entry remains, InvalidArgument if k == 0.
std::vector<std::size_t> select_batch(std::vector<PoolEntry>& pool,
                                      const textmodel::LinearModel& model,
                                      std::span<const textmodel::FeatureVector> features,
                                      Strategy strategy, std::size_t k, const PruneConfig& prune);

// Same, for precomputed per-entry scores (pool order). Used when several
// models vote on one pool.
std::vector<std::size_t> select_scored(std::vector<PoolEntry>& pool, std::span<const double> score,
                                       std::span<const double> uncertainty, std::size_t k,
                                       const PruneConfig& prune);

// Accepted bootstrap labels for one category: documents are screened by the
// source in random order, then random sentences of screened-positive
// documents are labeled until `size` are accepted.
std::vector<crowd::SegmentLabel> bootstrap_category(std::span<const corpus::Policy> policies,
                                                    DataCategory category,
                                                    crowd::LabelingSession& session,
                                                    std::size_t size, std::mt19937_64& rng);

struct ActionBootstrap {
  std::vector<crowd::SegmentLabel> labels;
  std::array<std::array<std::size_t, kNumModes>, kNumActions> cells{};
  bool complete = false;
  std::size_t consumed = 0;  // segments taken from the stream
};

// Labels segments in stream order until every (action, mode) cell holds
// min_per_mode trainable labels or max_consumed segments were taken. A short
// stream yields a partial set and a warning.
ActionBootstrap bootstrap_action(std::span<const segmenter::Segment> stream,
                                 crowd::LabelingSession& session, std::size_t min_per_mode,
                                 std::size_t max_consumed = SIZE_MAX);

struct TraceRow {
  std::size_t iter = 0;
  DataCategory category = DataCategory::kContact;
  std::string model;  // "category" or "action": whose scores chose the batch
  double f1_val = 0.0;         // Category Model, balanced F1 on the validation split
  double f1_action = 0.0;      // mean over actions; 0 without an action validation split
  double minority_frac = 0.0;  // of the Category Model training labels
  std::size_t requested = 0;
  std::size_t accepted = 0;  // cumulative ledger totals
  std::size_t wasted = 0;
  double spend = 0.0;
  bool full_retrain = false;
  std::size_t pool_active = 0;
};

struct LoopConfig {
  Strategy strategy = Strategy::kUncertainty;
  std::size_t batch_accept_target = 30;
  double acceptance_rate_estimate = 0.73;
  crowd::CrowdConfig crowd;
  double f1_switch = 0.85;
  std::size_t full_retrain_every = 10;
  PruneConfig prune;
  std::size_t bootstrap_category_size = 200;
  std::size_t bootstrap_min_per_mode = 20;
  double bootstrap_action_share = 0.5;  // cap on the segment stream used by the action bootstrap
  std::size_t max_iterations = 30;
  std::size_t label_budget = 0;  // accepted labels; 0 = unlimited
  double validation_fraction = 0.2;
  std::size_t incremental_epochs = 4;
  textmodel::TrainConfig train;
  segmenter::SegmenterConfig segmenter;
  unsigned hash_bits = 16;
  std::uint64_t seed = 1;
  std::function<void(const TraceRow&)> on_trace;  // called after every iteration
};

void validate(const LoopConfig& config);

struct CategoryResult {
  DataCategory category = DataCategory::kContact;
  std::shared_ptr<textmodel::LogisticClassifier> category_model;
  std::array<std::shared_ptr<textmodel::LogisticClassifier>, kNumActions> action_models;
  std::vector<crowd::SegmentLabel> labels;  // trainable labels only
  std::size_t system_ambiguous = 0;
  std::vector<TraceRow> trace;
  std::string stop_reason;
};

// Inputs the caller has already produced (or loaded).
struct Bootstrap {
  std::vector<crowd::SegmentLabel> category;  // sentence labels
  std::vector<crowd::SegmentLabel> action;    // segment labels
};

// Bootstraps both models for a category through the session.
Bootstrap run_bootstraps(std::span<const corpus::Policy> policies, DataCategory category,
                         std::shared_ptr<const embedding::WordVectorTable> table,
                         crowd::LabelingSession& session, const LoopConfig& config);

// The active-learning loop for one category.
CategoryResult run_loop(std::span<const corpus::Policy> policies, DataCategory category,
                        std::shared_ptr<const embedding::WordVectorTable> table,
                        crowd::LabelingSession& session, const Bootstrap& bootstrap,
                        const LoopConfig& config);

void write_trace(std::span<const TraceRow> trace, const std::filesystem::path& path);
std::string trace_line(const TraceRow& row);

// Stratified split: about `fraction` of every class goes to the second set.
std::pair<std::vector<textmodel::LabeledText>, std::vector<textmodel::LabeledText>>
stratified_split(std::span<const textmodel::LabeledText> data, double fraction, std::mt19937_64& rng);

}  // namespace policyal::al
