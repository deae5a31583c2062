#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "policyal/segmenter.hpp"
#include "policyal/types.hpp"

namespace policyal::crowd {

inline constexpr std::size_t kAnnotationsPerRequest = 5;
inline constexpr std::size_t kMaxAttempts = 3;
// Voided batches are republished at most this many times per attempt.
inline constexpr std::size_t kMaxRepublish = 3;

// Content questions: relevance, then one mode question per data action. The
// honesty question is not aggregated; a "no" voids the batch.
inline constexpr std::size_t kNumQuestions = 1 + kNumActions;

struct Survey {
  std::string survey_id;
  segmenter::Segment segment;
  DataCategory category = DataCategory::kContact;
  std::size_t attempt = 1;  // 1..kMaxAttempts
  double unit_cost = 0.0;   // USD per answered survey
};

struct Answers {
  bool relevant = false;
  ModeTriple modes = kAllNotMentioned;
  bool honest = true;

  friend bool operator==(const Answers&, const Answers&) = default;
};

// Option index of question q (0 = relevance, 1.. = actions) and its option count.
std::size_t option_of(const Answers& a, std::size_t q);
std::size_t option_count(std::size_t q);
void set_option(Answers& a, std::size_t q, std::size_t option);

struct Annotation {
  std::string survey_id;
  std::string annotator_id;
  Answers answers;
};

struct Tally {
  std::size_t modal = 0;        // smallest option among those with the top count
  std::size_t modal_count = 0;
  std::size_t total = 0;
  double agreement() const {
    return total == 0 ? 0.0 : static_cast<double>(modal_count) / static_cast<double>(total);
  }
};

Tally tally(std::span<const std::size_t> votes, std::size_t options);

// Agreement comparison tolerant to 0.8 * 5 style rounding.
bool meets_threshold(double agreement, double threshold);

struct AggregationOutcome {
  std::string survey_id;
  bool voided = false;
  std::array<Tally, kNumQuestions> questions{};
  Answers consensus;  // modal answers; meaningful when accepted
  bool accepted = false;
  std::size_t pooled_count = 0;
  double min_agreement = 0.0;
  double avg_agreement = 0.0;
};

// Throws InvalidArgument on an empty batch or mixed survey ids.
AggregationOutcome aggregate(std::span<const Annotation> annotations, double acceptance_threshold);

enum class RelabelPolicy { kLabelAndDiscard, kIncremental };
std::string_view to_string(RelabelPolicy p);
RelabelPolicy relabel_policy_from(std::string_view s);

enum class DirectiveKind { kAccept, kDiscardWasted, kRerequest, kMarkAmbiguous, kRepublish };
std::string_view to_string(DirectiveKind d);

struct Directive {
  DirectiveKind kind = DirectiveKind::kAccept;
  std::size_t count = 0;  // annotations to request for kRerequest / kRepublish
};

// `attempt` is the attempt that produced the outcome (1-based).
Directive apply_relabel_policy(const AggregationOutcome& outcome, RelabelPolicy policy,
                               std::size_t attempt);

// ceil(target / rate); throws InvalidArgument unless 0 < rate <= 1.
std::size_t plan_requests(std::size_t target_accepted, double estimated_acceptance_rate);

enum class Provenance { kAnnotated, kSystemAmbiguous, kBootstrap, kReplay };
std::string_view to_string(Provenance p);
Provenance provenance_from(std::string_view s);

struct SegmentLabel {
  segmenter::Segment segment;
  DataCategory category = DataCategory::kContact;
  bool relevant = false;
  ModeTriple modes = kAllNotMentioned;
  Provenance provenance = Provenance::kAnnotated;

  bool trainable() const { return provenance != Provenance::kSystemAmbiguous; }
  bool any_mode(ActionMode m) const;
  friend bool operator==(const SegmentLabel&, const SegmentLabel&) = default;
};

// Builds a label and enforces "irrelevant => all not_mentioned".
SegmentLabel make_label(const segmenter::Segment& segment, DataCategory category, bool relevant,
                        const ModeTriple& modes, Provenance provenance);

std::vector<SegmentLabel> trainable_only(std::span<const SegmentLabel> labels);

// JSON Lines, one SegmentLabel per line.
void save_labels(std::span<const SegmentLabel> labels, const std::filesystem::path& path);
std::vector<SegmentLabel> load_labels(const std::filesystem::path& path);

}  // namespace policyal::crowd
