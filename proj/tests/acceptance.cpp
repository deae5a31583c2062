// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "policyal/alengine.hpp"
#include "policyal/crowd.hpp"
#include "policyal/embedding.hpp"
#include "policyal/experiments.hpp"
#include "policyal/ledger.hpp"
#include "policyal/log.hpp"
#include "policyal/query.hpp"
#include "policyal/sources.hpp"
#include "policyal/textmodel.hpp"
#include "support.hpp"

using namespace policyal;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and thresholds.
constexpr double kAggregationSeconds = 5.0;
constexpr double kWmdTolerance = 1e-9;
constexpr double kAmbiguityRsrMax = 0.10;
constexpr std::size_t kSavingsWinsMin = 4;
constexpr double kSavingsMargin = 0.15;
constexpr double kMinorityEndMin = 0.40;
constexpr double kSavingsSeconds = 600.0;
constexpr double kPoolGapMin = 0.10;
constexpr double kCoverageMin = 0.95;
constexpr double kCostLow = 0.92;
constexpr double kCostHigh = 1.71;
constexpr double kGradientTolerance = 1e-4;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

crowd::Annotation vote(const std::string& survey, std::size_t i, std::size_t q, std::size_t option) {
  crowd::Answers a;
  a.relevant = true;
  a.modes = {ActionMode::kAssert, ActionMode::kAssert, ActionMode::kAssert};
  crowd::set_option(a, q, option);
  return {survey, "w" + std::to_string(i), a};
}

void criterion1(Outcome& o) {
  const auto t0 = Clock::now();
  std::size_t cases = 0, agree = 0;
  for (std::size_t q = 1; q < crowd::kNumQuestions; ++q) {
    for (std::size_t code = 0; code < 3125; ++code) {
      std::vector<std::size_t> votes(5);
      std::size_t c = code;
      for (auto& v : votes) {
        v = c % 5;
        c /= 5;
      }
      std::vector<crowd::Annotation> batch;
      for (std::size_t i = 0; i < 5; ++i) batch.push_back(vote("s", i, q, votes[i]));
      ++cases;
      agree += crowd::aggregate(batch, 0.8).accepted == oracle::brute_accept({votes}, 0.8);
    }
  }
  // pooled: every count split of the modal option at n = 10 and 15
  std::mt19937_64 rng(1);
  for (std::size_t n : {10u, 15u}) {
    for (std::size_t top = 1; top <= n; ++top) {
      for (int rep = 0; rep < 50; ++rep) {
        std::vector<std::size_t> votes(n);
        for (std::size_t i = 0; i < n; ++i) votes[i] = i < top ? 1 : 2 + rng() % 3;
        std::shuffle(votes.begin(), votes.end(), rng);
        std::vector<crowd::Annotation> batch;
        for (std::size_t i = 0; i < n; ++i) batch.push_back(vote("p", i, 1 + rep % 3, votes[i]));
        ++cases;
        agree += crowd::aggregate(batch, 0.8).accepted == oracle::brute_accept({votes}, 0.8);
      }
    }
  }
  const double secs = seconds_since(t0);
  o.detail << agree << "/" << cases << " agree, " << secs << " s";
  o.require(agree == cases, "100% agreement");
  o.require(secs < kAggregationSeconds, "runtime < 5 s");
}

void criterion2(Outcome& o) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::vector<std::string> words = {"email", "phone", "address", "location", "device", "health"};
  double worst = 0.0, worst_sym = 0.0, worst_scale = 0.0;
  std::size_t trials = 0;
  for (; trials < 100; ++trials) {
    // vocabulary of at most 4 words per trial
    const std::size_t vocab = 1 + rng() % 4;
    embedding::WordVectorTable table(3);
    std::vector<std::vector<double>> vecs;
    for (std::size_t w = 0; w < vocab; ++w) {
      vecs.push_back({g(rng), g(rng), g(rng)});
      table.add(words[w], vecs.back());
    }
    auto sentence = [&] {
      std::string s;
      const std::size_t len = 1 + rng() % 6;
      for (std::size_t i = 0; i < len; ++i) s += words[rng() % vocab] + " ";
      return s;
    };
    const auto a = sentence(), b = sentence();
    const auto ba = embedding::make_bag(a, table), bb = embedding::make_bag(b, table);
    std::vector<double> supply, demand, cost;
    for (auto c : ba.counts) supply.push_back(double(c) / double(ba.total));
    for (auto c : bb.counts) demand.push_back(double(c) / double(bb.total));
    for (auto i : ba.rows)
      for (auto j : bb.rows) cost.push_back(oracle::euclid(vecs[i], vecs[j]));
    const double want = oracle::brute_transport(supply, demand, cost);
    const double got = embedding::wmd(a, b, table);
    worst = std::max(worst, std::abs(got - want));
    worst_sym = std::max(worst_sym, std::abs(got - embedding::wmd(b, a, table)));
    const double k = 0.5 + 3.0 * double(rng() % 100) / 100.0;
    const auto scaled = table.scaled(k);
    worst_scale = std::max(worst_scale, std::abs(embedding::wmd(a, b, scaled) - k * got));
  }
  o.detail << trials << " pairs, max |wmd - oracle| " << worst << ", asymmetry " << worst_sym
           << ", scale error " << worst_scale;
  o.require(worst <= kWmdTolerance, "oracle within 1e-9");
  o.require(worst_sym <= kWmdTolerance, "symmetry");
  o.require(worst_scale <= kWmdTolerance, "scale covariance");
}

void criterion3(Outcome& o) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> d(1000);
  for (auto& x : d) {
    const double p = u(rng);
    x = {p, 1.0 - p};
  }
  auto order = [&](al::Strategy s) {
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return al::query_score(d[a], s) > al::query_score(d[b], s);
    });
    return idx;
  };
  const auto lc = order(al::Strategy::kUncertainty);
  const bool margin = lc == order(al::Strategy::kMargin);
  const bool entropy = lc == order(al::Strategy::kEntropy);
  o.detail << "1000 distributions, margin " << (margin ? "identical" : "differs") << ", entropy "
           << (entropy ? "identical" : "differs");
  o.require(margin && entropy, "identical permutations");
}

// Scripted collect_use votes, one batch per collect().
class Scripted final : public crowd::AnnotatorSource {
 public:
  explicit Scripted(std::deque<std::vector<ActionMode>> s) : script_(std::move(s)) {}
  std::vector<crowd::Annotation> collect(const crowd::Survey& survey, std::size_t n) override {
    auto modes = script_.front();
    script_.pop_front();
    std::vector<crowd::Annotation> out;
    for (std::size_t i = 0; i < n; ++i) {
      crowd::Answers a;
      a.relevant = true;
      a.modes = {modes[i], ActionMode::kNotMentioned, ActionMode::kNotMentioned};
      out.push_back({survey.survey_id, "a" + std::to_string(next_++), a});
    }
    return out;
  }
  bool screen(const corpus::Policy&, DataCategory) override { return true; }

 private:
  std::deque<std::vector<ActionMode>> script_;
  std::size_t next_ = 0;
};

void criterion4(Outcome& o) {
  constexpr auto A = ActionMode::kAssert, D = ActionMode::kDenial, C = ActionMode::kChoice;
  const segmenter::Segment seg{"doc", 0, 0, 0, DataCategory::kContact, "We collect your email address."};
  auto run = [&](std::deque<std::vector<ActionMode>> script) {
    Scripted src(std::move(script));
    crowd::CostLedger ledger;
    crowd::LabelingSession s(src, ledger);
    return s.label(seg);
  };
  const auto r45 = run({{A, A, A, A, D}});
  const auto r35 = run({{A, A, A, D, C}, {A, A, A, A, A}});          // 8/10
  const auto r710 = run({{A, A, A, D, C}, {A, A, A, A, D}, {A, A, A, A, A}});  // 7/10 then 12/15
  const auto r1115 = run({{A, A, A, D, C}, {A, A, A, A, D}, {A, A, A, A, D}});  // 11/15
  o.require(r45.accepted() && r45.attempts == 1, "4/5 accepts");
  o.require(r35.accepted() && r35.attempts == 2 && r35.last.questions[1].modal_count == 8, "8/10 accepts");
  o.require(r710.accepted() && r710.attempts == 3 && r710.last.questions[1].modal_count == 12,
            "7/10 rejects, 12/15 accepts");
  o.require(r1115.final == crowd::DirectiveKind::kMarkAmbiguous && r1115.attempts == crowd::kMaxAttempts &&
                r1115.annotations == 15 && r1115.label && !r1115.label->trainable(),
            "11/15 is system ambiguous after 3 attempts");

  // system_ambiguous labels never reach the training sets of a loop run
  synthetic::CorpusConfig cc;
  cc.policies = 60;
  cc.seed = 4;
  const auto gen = synthetic::generate_corpus(cc);
  std::vector<corpus::Policy> policies;
  for (const auto& d : gen.documents) policies.push_back(corpus::split_sentences(d));
  auto table = std::make_shared<const embedding::WordVectorTable>(synthetic::build_vectors(gen.documents));
  auto truth = std::make_shared<const crowd::GroundTruth>(gen.truth);
  crowd::SimulatedConfig simc;
  simc.fixed_accuracy = 0.85;
  crowd::SimulatedSource sim(truth, simc);
  crowd::CostLedger ledger;
  crowd::LabelingSession session(sim, ledger);
  al::LoopConfig lc;
  lc.batch_accept_target = 10;
  lc.bootstrap_category_size = 80;
  lc.bootstrap_min_per_mode = 2;
  lc.max_iterations = 4;
  lc.hash_bits = 12;
  lc.train.epochs = 20;
  const auto boot = al::run_bootstraps(policies, DataCategory::kContact, table, session, lc);
  const auto res = al::run_loop(policies, DataCategory::kContact, table, session, boot, lc);
  std::size_t leaked = 0;
  for (const auto& l : res.labels) leaked += !l.trainable();
  o.require(res.system_ambiguous > 0 && leaked == 0, "system_ambiguous excluded from training");

  // RSR
  auto seg_truth = std::make_shared<crowd::GroundTruth>();
  std::vector<segmenter::Segment> segs;
  for (std::size_t i = 0; i < 300; ++i) {
    segmenter::Segment s{"doc", i, i, i, DataCategory::kContact, "We collect your email address."};
    segs.push_back(s);
    seg_truth->add(crowd::make_label(s, DataCategory::kContact, true, {A, D, C}, crowd::Provenance::kReplay));
  }
  crowd::DeterministicSplitSource split(seg_truth);
  const auto det = experiments::rsr_experiment(split, segs);
  crowd::AmbiguitySource amb(seg_truth);
  const auto ambr = experiments::rsr_experiment(amb, segs);
  o.require(det.rsr() && *det.rsr() == 0.0, "deterministic RSR = 0");
  o.require(ambr.rsr() && *ambr.rsr() < kAmbiguityRsrMax, "ambiguity RSR < 10%");
  o.detail << "thresholds 4/5 8/10 12/15, cap " << crowd::kMaxAttempts << ", " << res.system_ambiguous
           << " system_ambiguous kept out of " << res.labels.size() << " training labels, RSR deterministic "
           << det.rsr().value_or(-1) << ", ambiguity " << ambr.rsr().value_or(-1) << " ("
           << ambr.recovered << "/" << ambr.rejected_first << ")";
}

void criterion5(Outcome& o) {
  const auto t0 = Clock::now();
  experiments::SavingsConfig sc;  // 5000 items, 5% minority, seeds 1..5, target F1 0.85
  sc.win_margin = kSavingsMargin;
  const auto r = experiments::al_savings_experiment(sc);
  const double secs = seconds_since(t0);
  std::size_t wins = 0;
  for (const auto& s : r.per_seed) wins += s.active.reached && s.save >= kSavingsMargin;
  o.detail << "wins " << wins << "/" << r.per_seed.size() << ", mean save " << r.report.al_save
           << ", n_nonal " << r.report.n_nonal << ", n_al " << r.report.n_al << ", m_start "
           << r.report.m_start << ", m_end " << r.report.m_end << ", " << secs << " s";
  o.require(sc.fixture.items == 5000 && sc.fixture.minority == 0.05, "fixture 5000 items, 5% minority");
  o.require(wins >= kSavingsWinsMin, ">= 15% savings in >= 4 of 5 seeds");
  o.require(r.report.m_end >= kMinorityEndMin, "m_end >= 0.40");
  o.require(secs < kSavingsSeconds, "runtime < 10 min");
}

void criterion6(Outcome& o) {
  experiments::FixtureConfig fc;
  fc.seed = 1;
  const auto r = experiments::pool_size_experiment(fc, 200, 40, 150, 1);
  const double gap = r.large.m_end - r.small.m_end;
  o.detail << "pool " << r.large_size << " m_end " << r.large.m_end << ", pool " << r.small_size << " m_end "
           << r.small.m_end << ", gap " << gap * 100 << " pp";
  o.require(r.large_size == 5000 && r.small_size == 200, "pool sizes 5000 and 200");
  o.require(gap >= kPoolGapMin, "gap >= 10 pp");
}

void criterion7(Outcome& o) {
  const auto f = support::load_coverage_fixture();
  const auto trained = support::train_on_synthetic(f.documents, DataCategory::kContact);
  const auto segs = segmenter::segment_corpus(f.policies, DataCategory::kContact, *trained.model, *trained.table);
  const auto c = support::coverage_of(f, segs);
  o.detail << f.policies.size() << " policies, " << c.covered << "/" << c.labeled << " labeled sentences covered ("
           << c.rate() * 100 << "%), " << c.segment_sentences << "/" << c.corpus_sentences
           << " sentences inside segments";
  o.require(f.policies.size() == 10 && f.unmatched == 0, "fixture intact");
  o.require(c.rate() >= kCoverageMin, "coverage >= 95%");
}

void criterion8(Outcome& o) {
  const auto n = crowd::plan_requests(30, 0.73);
  o.require(n == 42, "plan_requests(30, 0.73) = 42");
  double lo = 1e9, hi = 0.0;
  std::ostringstream pts;
  for (double rate : {0.70, 0.75, 0.80, 0.85}) {
    const auto p = experiments::cost_point(rate, 0.16, 0.25, 20, 30, 1);
    lo = std::min(lo, p.cost_per_accepted);
    hi = std::max(hi, p.cost_per_accepted);
    pts << " " << rate << ":$" << p.cost_per_accepted;
  }
  o.detail << "plan_requests(30,0.73)=" << n << ", cost per accepted label over the sweep" << pts.str()
           << ", range [$" << lo << ", $" << hi << "]";
  o.require(lo >= kCostLow && hi <= kCostHigh, "within $0.92-$1.71");
  // fixed-cost corners, for information only
  std::ostringstream corners;
  for (double c : {0.16, 0.25}) {
    for (double rate : {0.70, 0.85}) {
      corners << " (" << c << "," << rate << "):$" << experiments::cost_point(rate, c, c, 20, 30, 1).cost_per_accepted;
    }
  }
  o.detail << "; corners" << corners.str();
}

void criterion9(Outcome& o) {
  const auto f = support::planted_conflicts(25, 31);
  const auto s = support::score_conflicts(f);
  o.detail << f.planted.size() << " planted conflicts in 25 policies, precision " << s.precision() << ", recall "
           << s.recall() << ", rollup " << (s.rollup_cells - s.rollup_wrong) << "/" << s.rollup_cells
           << " cells exact";
  o.require(s.precision() == 1.0 && s.recall() == 1.0, "precision and recall 100%");
  o.require(s.rollup_wrong == 0, "rollup conflicting exactly on conflicted cells");
}

void criterion10(Outcome& o) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t classes = 2 + trial % 4, dim = 3 + trial % 6, n = 5 + trial % 8;
    std::vector<textmodel::LabeledFeatures> data(n);
    for (auto& d : data) {
      for (std::uint32_t i = 0; i < dim; ++i)
        if (rng() % 3) d.x.entries.emplace_back(i, g(rng));
      d.label = rng() % classes;
    }
    textmodel::LinearParams p(classes, dim);
    for (auto& w : p.weights) w = 0.5 * g(rng);
    for (auto& b : p.bias) b = 0.5 * g(rng);
    const double l2 = trial % 2 ? 1e-2 : 0.0;
    const auto [loss, grad] = textmodel::loss_and_gradient(p, data, l2);
    double diff2 = 0.0, num2 = 0.0, ana2 = 0.0;
    auto probe = [&](double& slot, double analytic) {
      const double keep = slot, h = 1e-5;
      slot = keep + h;
      const double up = textmodel::loss_and_gradient(p, data, l2).first;
      slot = keep - h;
      const double down = textmodel::loss_and_gradient(p, data, l2).first;
      slot = keep;
      const double numeric = (up - down) / (2 * h);
      diff2 += (numeric - analytic) * (numeric - analytic);
      num2 += numeric * numeric;
      ana2 += analytic * analytic;
    };
    for (std::size_t i = 0; i < p.weights.size(); ++i) probe(p.weights[i], grad.weights[i]);
    for (std::size_t k = 0; k < classes; ++k) probe(p.bias[k], grad.bias[k]);
    worst = std::max(worst, std::sqrt(diff2) / std::max({std::sqrt(num2), std::sqrt(ana2), 1e-12}));
  }
  o.detail << "50 instances, max relative error " << worst;
  o.require(worst < kGradientTolerance, "relative error < 1e-4");
}

}  // namespace

int main() {
  log::set_min_level(log::Level::kWarn);
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria = {
      {"aggregation matches the counting oracle", criterion1},
      {"WMD exact against transport enumeration", criterion2},
      {"binary query strategies induce one order", criterion3},
      {"relabeling thresholds, cap and RSR", criterion4},
      {"active learning savings shape", criterion5},
      {"pool-size sensitivity", criterion6},
      {"segment coverage on the labeled fixture", criterion7},
      {"request planning and cost per label", criterion8},
      {"planted conflict detection", criterion9},
      {"gradient check", criterion10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failed += !o.pass;
    std::cout << "criterion " << (i + 1) << ": " << (o.pass ? "PASS" : "FAIL") << " - " << criteria[i].first
              << ": " << o.detail.str() << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}
