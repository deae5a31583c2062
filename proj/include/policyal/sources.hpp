#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "policyal/corpus.hpp"
#include "policyal/crowd.hpp"
#include "policyal/ledger.hpp"

namespace policyal::crowd {

// Qualified annotator ids plus the no-repeat rule: an annotator answers a
// given survey id at most once, across all attempts.
class AnnotatorPool {
 public:
  explicit AnnotatorPool(std::size_t size);
  explicit AnnotatorPool(std::vector<std::string> ids);

  // n distinct annotators who have not seen survey_id, marked as seen.
  // Throws PoolExhausted when fewer than n remain.
  std::vector<std::size_t> draw(const std::string& survey_id, std::size_t n, std::mt19937_64& rng);

  bool qualified(const std::string& annotator_id) const;
  bool has_seen(const std::string& annotator_id, const std::string& survey_id) const;
  void mark_seen(const std::string& annotator_id, const std::string& survey_id);

  const std::string& id(std::size_t i) const { return ids_.at(i); }
  std::size_t size() const { return ids_.size(); }

 private:
  std::vector<std::string> ids_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::set<std::size_t>> seen_;
  mutable std::mutex mu_;
};

// Reference labels used by simulated and replay annotators.
class GroundTruth {
 public:
  GroundTruth() = default;
  explicit GroundTruth(std::span<const SegmentLabel> labels);
  static GroundTruth load(const std::filesystem::path& path);

  void add(const SegmentLabel& label);

  // Correct answers for a segment: the relevant label containing the seed
  // sentence, else the earliest overlapping relevant label, else irrelevant.
  Answers truth(const segmenter::Segment& segment, DataCategory category) const;
  // Whether the policy mentions the category anywhere (document pre-screen).
  bool mentions(const std::string& doc_id, DataCategory category) const;
  std::size_t size() const { return count_; }

 private:
  std::map<std::pair<std::string, DataCategory>, std::vector<SegmentLabel>> by_doc_;
  std::size_t count_ = 0;
};

class AnnotatorSource {
 public:
  virtual ~AnnotatorSource() = default;
  // n annotations from distinct annotators who have not seen the survey.
  virtual std::vector<Annotation> collect(const Survey& survey, std::size_t n) = 0;
  // Document-level screen: does the policy mention the category?
  virtual bool screen(const corpus::Policy& policy, DataCategory category) = 0;
};

// Answers question q correctly with probability p, otherwise uniformly among
// the wrong options.
std::size_t noisy_answer(std::size_t correct, std::size_t options, double p, std::mt19937_64& rng);
Answers noisy_answers(const Answers& truth, double p, std::mt19937_64& rng);

struct SimulatedConfig {
  std::size_t pool_size = 200;
  // Per-annotator accuracy ~ Beta(alpha, beta) unless fixed_accuracy is set.
  double accuracy_alpha = 8.0;
  double accuracy_beta = 2.0;
  std::optional<double> fixed_accuracy;
  double dishonest_rate = 0.0;
  std::uint64_t seed = 11;
};

class SimulatedSource final : public AnnotatorSource {
 public:
  SimulatedSource(std::shared_ptr<const GroundTruth> truth, SimulatedConfig config = {});

  std::vector<Annotation> collect(const Survey& survey, std::size_t n) override;
  bool screen(const corpus::Policy& policy, DataCategory category) override;

  double accuracy(std::size_t annotator) const { return accuracy_.at(annotator); }
  AnnotatorPool& pool() { return pool_; }

 private:
  std::shared_ptr<const GroundTruth> truth_;
  SimulatedConfig config_;
  AnnotatorPool pool_;
  std::vector<double> accuracy_;
  std::mt19937_64 rng_;
};

// Answers from the ground-truth store; each question is flipped to a random
// wrong option with probability `noise`.
class ReplaySource final : public AnnotatorSource {
 public:
  ReplaySource(std::shared_ptr<const GroundTruth> truth, double noise = 0.0,
               std::size_t pool_size = 200, std::uint64_t seed = 13);

  std::vector<Annotation> collect(const Survey& survey, std::size_t n) override;
  bool screen(const corpus::Policy& policy, DataCategory category) override;

 private:
  std::shared_ptr<const GroundTruth> truth_;
  double noise_;
  AnnotatorPool pool_;
  std::mt19937_64 rng_;
};

// Genuinely ambiguous segments: every question has a near-uniform answer
// distribution fixed per segment; annotators sample from it independently.
class AmbiguitySource final : public AnnotatorSource {
 public:
  explicit AmbiguitySource(std::shared_ptr<const GroundTruth> truth, double spread = 0.3,
                           std::size_t pool_size = 200, std::uint64_t seed = 17);

  std::vector<Annotation> collect(const Survey& survey, std::size_t n) override;
  bool screen(const corpus::Policy& policy, DataCategory category) override;

 private:
  const std::vector<std::vector<double>>& distribution(const Survey& survey);

  std::shared_ptr<const GroundTruth> truth_;
  double spread_;
  AnnotatorPool pool_;
  std::mt19937_64 rng_;
  std::map<std::string, std::vector<std::vector<double>>> dists_;
};

// Deterministic 3/2 disagreement: within each request batch the first three
// annotators give the true answers and the other two a fixed wrong mode on
// every action question. Pooled agreement stays at 0.6 forever.
class DeterministicSplitSource final : public AnnotatorSource {
 public:
  explicit DeterministicSplitSource(std::shared_ptr<const GroundTruth> truth,
                                    std::size_t pool_size = 200);

  std::vector<Annotation> collect(const Survey& survey, std::size_t n) override;
  bool screen(const corpus::Policy& policy, DataCategory category) override;

 private:
  std::shared_ptr<const GroundTruth> truth_;
  AnnotatorPool pool_;
  std::mt19937_64 rng_{0};
};

struct CrowdConfig {
  double acceptance_threshold = 0.8;
  RelabelPolicy policy = RelabelPolicy::kIncremental;
  double unit_cost_min = 0.16;
  double unit_cost_max = 0.25;
  std::uint64_t seed = 7;
};

void validate(const CrowdConfig& config);

struct Resolution {
  Survey survey;
  DirectiveKind final = DirectiveKind::kAccept;
  std::optional<SegmentLabel> label;  // accepted or system_ambiguous
  AggregationOutcome last;
  std::size_t attempts = 0;
  std::size_t annotations = 0;  // paid annotations, voided batches included
  std::size_t republished = 0;

  bool accepted() const { return final == DirectiveKind::kAccept; }
};

// Runs surveys through collection, aggregation and the relabel policy, and
// books every step in the ledger.
class LabelingSession {
 public:
  LabelingSession(AnnotatorSource& source, CostLedger& ledger, CrowdConfig config = {});

  Survey issue(const segmenter::Segment& segment);
  Resolution resolve(Survey survey, Provenance on_accept = Provenance::kAnnotated);
  Resolution label(const segmenter::Segment& segment, Provenance on_accept = Provenance::kAnnotated);

  AnnotatorSource& source() { return source_; }
  CostLedger& ledger() { return ledger_; }
  const CrowdConfig& config() const { return config_; }

 private:
  AnnotatorSource& source_;
  CostLedger& ledger_;
  CrowdConfig config_;
  std::mt19937_64 rng_;
  std::size_t next_id_ = 1;
};

}  // namespace policyal::crowd
