#include <deque>
#include <filesystem>
#include <memory>
#include <random>
#include <set>

#include "doctest.h"
#include "policyal/error.hpp"
#include "policyal/experiments.hpp"
#include "policyal/ledger.hpp"
#include "policyal/sources.hpp"

using namespace policyal;
using namespace policyal::crowd;

namespace {

Answers relevant_with(ActionMode m) {
  Answers a;
  a.relevant = true;
  a.modes = {m, ActionMode::kNotMentioned, ActionMode::kNotMentioned};
  return a;
}

// Plays back one scripted batch per collect() call; the k-th annotation of
// a batch takes script[call][k] as its collect_use mode.
class ScriptedSource final : public AnnotatorSource {
 public:
  explicit ScriptedSource(std::deque<std::vector<ActionMode>> script) : script_(std::move(script)) {}

  std::vector<Annotation> collect(const Survey& survey, std::size_t n) override {
    REQUIRE(!script_.empty());
    auto modes = script_.front();
    script_.pop_front();
    REQUIRE(modes.size() == n);
    std::vector<Annotation> out;
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back({survey.survey_id, "a" + std::to_string(next_++), relevant_with(modes[i])});
    }
    sizes.push_back(n);
    return out;
  }
  bool screen(const corpus::Policy&, DataCategory) override { return true; }

  std::vector<std::size_t> sizes;
  std::size_t remaining() const { return script_.size(); }

 private:
  std::deque<std::vector<ActionMode>> script_;
  std::size_t next_ = 0;
};

constexpr auto A = ActionMode::kAssert;
constexpr auto D = ActionMode::kDenial;
constexpr auto C = ActionMode::kChoice;

segmenter::Segment seg(std::size_t i = 0) {
  return {"doc", i, i, i, DataCategory::kContact, "We collect your email address."};
}

std::shared_ptr<GroundTruth> truth_for(std::size_t n) {
  auto t = std::make_shared<GroundTruth>();
  for (std::size_t i = 0; i < n; ++i) {
    t->add(make_label(seg(i), DataCategory::kContact, true, {A, D, C}, Provenance::kReplay));
  }
  return t;
}

}  // namespace

TEST_SUITE("sources") {
  TEST_CASE("annotator pool never repeats an annotator on a survey") {
    AnnotatorPool pool(12);
    std::mt19937_64 rng(1);
    std::set<std::size_t> seen;
    for (int round = 0; round < 2; ++round) {
      for (auto i : pool.draw("s1", 5, rng)) CHECK(seen.insert(i).second);
    }
    CHECK_THROWS_AS(pool.draw("s1", 5, rng), PoolExhausted);
    CHECK(pool.draw("s2", 5, rng).size() == 5);
    CHECK(pool.qualified("w0003"));
    CHECK_FALSE(pool.qualified("x"));
  }

  TEST_CASE("first-attempt acceptance at 4/5") {
    ScriptedSource src({{A, A, A, A, D}});
    CostLedger ledger;
    LabelingSession s(src, ledger);
    auto r = s.label(seg());
    CHECK(r.accepted());
    CHECK(r.attempts == 1);
    CHECK(r.label->modes[0] == A);
    CHECK(r.label->provenance == Provenance::kAnnotated);
  }

  TEST_CASE("3/5 rejects, then 8/10 accepts on the pooled votes") {
    ScriptedSource src({{A, A, A, D, C}, {A, A, A, A, A}});
    CostLedger ledger;
    LabelingSession s(src, ledger);
    auto r = s.label(seg());
    CHECK(r.accepted());
    CHECK(r.attempts == 2);
    CHECK(r.last.pooled_count == 10);
    CHECK(r.last.questions[1].modal_count == 8);
    CHECK(src.sizes == std::vector<std::size_t>{5, 5});
  }

  TEST_CASE("7/10 rejects, 12/15 accepts") {
    ScriptedSource src({{A, A, A, D, C}, {A, A, A, A, D}, {A, A, A, A, A}});
    CostLedger ledger;
    LabelingSession s(src, ledger);
    auto r = s.label(seg());
    CHECK(r.accepted());
    CHECK(r.attempts == 3);
    CHECK(r.last.questions[1].modal_count == 12);
  }

  TEST_CASE("11/15 hits the cap and becomes system ambiguous") {
    ScriptedSource src({{A, A, A, D, C}, {A, A, A, A, D}, {A, A, A, A, D}});
    CostLedger ledger;
    LabelingSession s(src, ledger);
    auto r = s.label(seg());
    CHECK(r.final == DirectiveKind::kMarkAmbiguous);
    CHECK(r.attempts == 3);
    REQUIRE(r.label);
    CHECK(r.label->provenance == Provenance::kSystemAmbiguous);
    CHECK_FALSE(r.label->trainable());
    CHECK(src.remaining() == 0);
    CHECK(ledger.snapshot().ambiguous == 1);
    CHECK(ledger.snapshot().annotations == 15);
  }

  TEST_CASE("label-and-discard wastes the request") {
    ScriptedSource src({{A, A, A, D, C}});
    CostLedger ledger;
    CrowdConfig cc;
    cc.policy = RelabelPolicy::kLabelAndDiscard;
    LabelingSession s(src, ledger, cc);
    auto r = s.label(seg());
    CHECK(r.final == DirectiveKind::kDiscardWasted);
    CHECK_FALSE(r.label);
    CHECK(ledger.snapshot().wasted_requests == 1);
  }

  TEST_CASE("session charges the survey unit cost per annotation") {
    ScriptedSource src({{A, A, A, D, C}, {A, A, A, A, A}});
    CostLedger ledger;
    LabelingSession s(src, ledger);
    auto r = s.label(seg());
    CHECK(r.survey.unit_cost >= 0.16);
    CHECK(r.survey.unit_cost <= 0.25);
    CHECK(ledger.snapshot().total_spend == doctest::Approx(10 * r.survey.unit_cost));
  }

  TEST_CASE("deterministic disagreement never recovers") {
    auto truth = truth_for(40);
    DeterministicSplitSource src(truth);
    std::vector<segmenter::Segment> segs;
    for (std::size_t i = 0; i < 40; ++i) segs.push_back(seg(i));
    auto r = experiments::rsr_experiment(src, segs);
    CHECK(r.rejected_first == 40);
    REQUIRE(r.rsr());
    CHECK(*r.rsr() == 0.0);
  }

  TEST_CASE("perfect re-request always recovers") {
    std::deque<std::vector<ActionMode>> script;
    for (int i = 0; i < 20; ++i) {
      script.push_back({A, A, A, D, C});
      script.push_back({A, A, A, A, A});
    }
    ScriptedSource src(script);
    std::vector<segmenter::Segment> segs;
    for (std::size_t i = 0; i < 20; ++i) segs.push_back(seg(i));
    auto r = experiments::rsr_experiment(src, segs);
    CHECK(r.rejected_first == 20);
    CHECK(*r.rsr() == 1.0);
  }

  TEST_CASE("ambiguity-modeled annotators rarely recover") {
    auto truth = truth_for(300);
    AmbiguitySource src(truth);
    std::vector<segmenter::Segment> segs;
    for (std::size_t i = 0; i < 300; ++i) segs.push_back(seg(i));
    auto r = experiments::rsr_experiment(src, segs);
    REQUIRE(r.rsr());
    CHECK(r.rejected_first > 200);
    CHECK(*r.rsr() < 0.10);
  }

  TEST_CASE("no rejections means no RSR") {
    ScriptedSource src({{A, A, A, A, A}});
    std::vector<segmenter::Segment> segs{seg()};
    CHECK_FALSE(experiments::rsr_experiment(src, segs).rsr());
  }

  TEST_CASE("ground truth prefers the label holding the seed") {
    GroundTruth t;
    segmenter::Segment early{"d", 0, 2, 1, DataCategory::kContact, "x"};
    segmenter::Segment late{"d", 3, 5, 4, DataCategory::kContact, "y"};
    t.add(make_label(early, DataCategory::kContact, true, {D, D, D}, Provenance::kReplay));
    t.add(make_label(late, DataCategory::kContact, true, {C, C, C}, Provenance::kReplay));
    segmenter::Segment probe{"d", 2, 4, 4, DataCategory::kContact, "z"};
    CHECK(t.truth(probe, DataCategory::kContact).modes[0] == C);
    probe.seed_index = 2;
    CHECK(t.truth(probe, DataCategory::kContact).modes[0] == D);
    segmenter::Segment away{"d", 9, 9, 9, DataCategory::kContact, "w"};
    CHECK_FALSE(t.truth(away, DataCategory::kContact).relevant);
    CHECK(t.mentions("d", DataCategory::kContact));
    CHECK_FALSE(t.mentions("d", DataCategory::kHealth));
  }

  TEST_CASE("replay source without noise reproduces the truth") {
    auto truth = truth_for(5);
    ReplaySource src(truth, 0.0);
    CostLedger ledger;
    LabelingSession s(src, ledger);
    for (std::size_t i = 0; i < 5; ++i) {
      auto r = s.label(seg(i));
      REQUIRE(r.accepted());
      CHECK(r.label->modes == ModeTriple{A, D, C});
    }
  }

  TEST_CASE("dishonest annotators trigger republishing") {
    auto truth = truth_for(30);
    SimulatedConfig sc;
    sc.fixed_accuracy = 1.0;
    sc.dishonest_rate = 0.3;
    SimulatedSource src(truth, sc);
    CostLedger ledger;
    LabelingSession s(src, ledger);
    std::size_t republished = 0;
    for (std::size_t i = 0; i < 30; ++i) republished += s.label(seg(i)).republished;
    CHECK(republished > 0);
    CHECK(ledger.snapshot().voided == republished);
  }
}

TEST_SUITE("ledger") {
  TEST_CASE("42 requests of 5 at $0.22 with 30 accepted") {
    CostLedger l;
    for (int i = 0; i < 42; ++i) {
      const std::string id = "s" + std::to_string(i);
      l.issued(id, 1, 5);
      for (int k = 0; k < 5; ++k) l.annotated(id, "w" + std::to_string(k), 1, 0.22);
      l.aggregated(id, 1, 5);
      if (i < 30) {
        l.accepted(id, 1);
      } else {
        l.wasted(id, 1);
      }
    }
    auto s = l.snapshot();
    CHECK(s.total_spend == doctest::Approx(46.20));
    CHECK(s.accepted_labels == 30);
    CHECK(s.wasted_requests == 12);
    CHECK(s.annotations == 210);
    REQUIRE(s.cost_per_accepted());
    CHECK(*s.cost_per_accepted() == doctest::Approx(1.54));
  }

  TEST_CASE("empty ledger has no cost per label") {
    CostLedger l;
    CHECK_FALSE(l.snapshot().cost_per_accepted());
    CHECK(l.snapshot().total_spend == 0.0);
  }

  TEST_CASE("fold over events equals the live snapshot, JSONL round trip") {
    CostLedger l;
    l.issued("a", 1, 5);
    l.annotated("a", "w1", 1, 0.2);
    l.voided("a", 1);
    l.ambiguous("a", 3);
    auto ev = l.events();
    auto f = fold(ev);
    CHECK(f.total_spend == doctest::Approx(l.snapshot().total_spend));
    CHECK(f.voided == 1);
    CHECK(f.ambiguous == 1);
    const auto path = std::filesystem::temp_directory_path() / "policyal_ledger_rt.jsonl";
    l.save(path);
    auto back = CostLedger::load(path);
    CHECK(back.size() == l.size());
    CHECK(back.snapshot().total_spend == doctest::Approx(0.2));
    std::filesystem::remove(path);
  }
}
