#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "policyal/alengine.hpp"
#include "policyal/analysis.hpp"
#include "policyal/ledger.hpp"
#include "policyal/sources.hpp"
#include "policyal/textmodel.hpp"

namespace policyal::experiments {

// Linearly separable binary pool: each item holds `tokens_per_item` distinct
// tokens out of `vocab`; the label is 1 iff the sum of hidden token weights
// exceeds the (1 - minority) quantile. Items within `gap` standard deviations
// of the boundary are redrawn. The validation set is class-balanced.
struct FixtureConfig {
  std::size_t items = 5000;
  double minority = 0.05;
  std::size_t vocab = 128;
  std::size_t tokens_per_item = 8;
  std::size_t validation_per_class = 200;
  double gap = 0.5;
  std::uint64_t seed = 1;
};

struct Fixture {
  std::vector<textmodel::FeatureVector> x;
  std::vector<std::size_t> y;
  std::vector<textmodel::LabeledFeatures> validation;
  unsigned hash_bits = 7;  // 2^hash_bits >= vocab

  std::size_t size() const { return x.size(); }
  std::size_t minority_count() const;
};

Fixture make_fixture(const FixtureConfig& config);

// Random bootstrap of n items containing at least `min_minority` class-1 items.
std::vector<std::size_t> draw_bootstrap(const Fixture& fixture, std::size_t n,
                                        std::size_t min_minority, std::uint64_t seed);

// Pool restricted to `keep` (bootstrap first) plus random others up to `size`.
Fixture restrict_pool(const Fixture& fixture, std::span<const std::size_t> keep, std::size_t size,
                      std::uint64_t seed, std::vector<std::size_t>* bootstrap_out);

struct ArmConfig {
  bool active = true;
  al::Strategy strategy = al::Strategy::kUncertainty;
  std::size_t step = 10;
  std::optional<double> target_f1 = 0.85;  // stop when reached
  std::size_t label_budget = 0;            // 0 = whole pool
  al::PruneConfig prune{.tau = 0.1, .window = 0};  // pruning off by default here
  textmodel::TrainConfig train;
};

struct ArmResult {
  std::size_t labels = 0;
  bool reached = false;
  bool exhausted = false;
  std::vector<std::size_t> label_curve;
  std::vector<double> f1_curve;
  std::vector<double> minority_curve;
  double m_start = 0.0;
  double m_end = 0.0;
};

// Oracle-labeled arm: retrain from scratch after every step of `step` labels.
ArmResult run_arm(const Fixture& fixture, std::span<const std::size_t> bootstrap,
                  const ArmConfig& config, std::uint64_t seed);

struct SavingsConfig {
  FixtureConfig fixture;
  std::size_t bootstrap = 40;
  ArmConfig arm;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  double win_margin = 0.15;  // per-seed saving counted as a win
};

struct SavingsSeed {
  std::uint64_t seed = 0;
  ArmResult random;
  ArmResult active;
  double save = 0.0;
};

struct SavingsResult {
  analysis::SavingsReport report;
  std::vector<SavingsSeed> per_seed;
};

SavingsResult al_savings_experiment(const SavingsConfig& config);

struct PoolSizeResult {
  ArmResult large;
  ArmResult small;
  std::size_t large_size = 0;
  std::size_t small_size = 0;
};

// Same seed and bootstrap, active arm with a label budget, two pool sizes.
PoolSizeResult pool_size_experiment(const FixtureConfig& fixture, std::size_t small_size,
                                    std::size_t bootstrap, std::size_t label_budget,
                                    std::uint64_t seed, ArmConfig arm = {});

struct SweepPoint {
  double threshold = 0.0;
  std::size_t votes_sample = 0;     // surveys in the shared vote sample
  std::size_t accepted_sample = 0;  // accepted on the shared votes
  double acceptance_rate = 0.0;
  std::size_t surveys = 0;   // surveys issued by the downstream arm
  std::size_t accepted = 0;  // labels accepted by the downstream arm
  std::size_t wrong = 0;     // accepted labels that disagree with the oracle
  double f1 = 0.0;           // downstream validation F1
};

struct SweepConfig {
  FixtureConfig fixture{.items = 2000};
  std::vector<double> thresholds = {0.6, 0.8, 1.0};
  double accuracy = 0.8;
  std::size_t vote_sample = 400;
  std::size_t bootstrap = 40;
  std::size_t survey_budget = 300;
  std::size_t step = 10;
  std::uint64_t seed = 1;
};

// Acceptance counts on one shared set of votes (so they nest), then one
// crowd-labeled active arm per threshold under the same survey budget.
std::vector<SweepPoint> at_sweep(const SweepConfig& config);

struct RsrResult {
  std::size_t surveys = 0;
  std::size_t rejected_first = 0;  // failed at the first (4/5) evaluation
  std::size_t recovered = 0;       // accepted at 8/10 or 12/15
  std::optional<double> rsr() const;
};

// Incremental relabeling over the segments; counts recoveries.
RsrResult rsr_experiment(crowd::AnnotatorSource& source,
                         std::span<const segmenter::Segment> segments,
                         double acceptance_threshold = 0.8, std::uint64_t seed = 1);

// Annotators who agree unanimously on a survey with probability `rate`
// (drawn once per survey) and split 3/2 otherwise.
class CalibratedSource final : public crowd::AnnotatorSource {
 public:
  CalibratedSource(double rate, std::uint64_t seed, std::size_t pool_size = 200);
  std::vector<crowd::Annotation> collect(const crowd::Survey& survey, std::size_t n) override;
  bool screen(const corpus::Policy&, DataCategory) override { return true; }

 private:
  double rate_;
  crowd::AnnotatorPool pool_;
  std::mt19937_64 rng_;
  std::map<std::string, bool> agrees_;
};

struct CostPoint {
  double rate = 0.0;
  double unit_cost_min = 0.0;
  double unit_cost_max = 0.0;
  crowd::LedgerSnapshot ledger;
  double cost_per_accepted = 0.0;
};

// Runs `iterations` rounds of plan_requests(target, rate) label-and-discard
// surveys against a CalibratedSource and reports the ledger.
CostPoint cost_point(double rate, double unit_cost_min, double unit_cost_max,
                     std::size_t iterations = 20, std::size_t target = 30, std::uint64_t seed = 1);

// Synthetic single-sentence segments "doc:i" used by the crowd-only experiments.
std::vector<segmenter::Segment> dummy_segments(std::size_t n, const std::string& doc_id = "sim");

}  // namespace policyal::experiments
