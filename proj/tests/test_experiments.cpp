#include <set>

#include "doctest.h"
#include "policyal/error.hpp"
#include "policyal/experiments.hpp"

using namespace policyal;
using namespace policyal::experiments;

TEST_SUITE("experiments") {
  TEST_CASE("fixture shape") {
    FixtureConfig fc;
    fc.items = 1000;
    const auto f = make_fixture(fc);
    CHECK(f.size() == 1000);
    CHECK(f.minority_count() == 50);
    CHECK(f.validation.size() == 2 * fc.validation_per_class);
    for (const auto& x : f.x) {
      CHECK(x.entries.size() == fc.tokens_per_item);
      for (const auto& [i, v] : x.entries) CHECK(i < (1u << f.hash_bits));
    }
    const auto g = make_fixture(fc);
    CHECK(g.y == f.y);
  }

  TEST_CASE("bootstrap draws hold the minority floor") {
    FixtureConfig fc;
    fc.items = 1000;
    const auto f = make_fixture(fc);
    const auto b = draw_bootstrap(f, 40, 3, 2);
    CHECK(b.size() == 40);
    std::size_t pos = 0;
    for (auto i : b) pos += f.y[i];
    CHECK(pos >= 3);
    CHECK(std::set<std::size_t>(b.begin(), b.end()).size() == 40);

    std::vector<std::size_t> boot;
    const auto small = restrict_pool(f, b, 200, 4, &boot);
    CHECK(small.size() == 200);
    CHECK(boot.size() == 40);
    for (std::size_t i = 0; i < 40; ++i) CHECK(small.y[boot[i]] == f.y[b[i]]);
  }

  TEST_CASE("active arm beats random on a small pool") {
    SavingsConfig sc;
    sc.fixture.items = 1500;
    sc.seeds = {1, 2};
    const auto r = al_savings_experiment(sc);
    CHECK(r.per_seed.size() == 2);
    CHECK(r.report.al_save > 0.0);
    CHECK(r.report.m_end > r.report.m_start);
  }

  TEST_CASE("cost point bookkeeping") {
    const auto p = cost_point(0.73, 0.22, 0.22, 5, 30, 1);
    CHECK(p.ledger.surveys_issued == 5 * crowd::plan_requests(30, 0.73));
    CHECK(p.ledger.annotations == 5 * p.ledger.surveys_issued);
    CHECK(p.ledger.total_spend == doctest::Approx(0.22 * p.ledger.annotations));
    CHECK(p.cost_per_accepted == doctest::Approx(p.ledger.total_spend / p.ledger.accepted_labels));
    // unanimous crowd: every survey accepted
    const auto all = cost_point(1.0, 0.2, 0.2, 2, 10, 1);
    CHECK(all.ledger.accepted_labels == all.ledger.surveys_issued);
    CHECK(all.cost_per_accepted == doctest::Approx(1.0));
  }

  TEST_CASE("calibrated source splits 3/2 when it disagrees") {
    CalibratedSource never(0.0, 3);
    crowd::Survey s;
    s.survey_id = "a";
    s.segment = dummy_segments(1).front();
    const auto batch = never.collect(s, 5);
    REQUIRE(batch.size() == 5);
    const auto out = crowd::aggregate(batch, 0.8);
    CHECK_FALSE(out.accepted);
    CHECK(out.min_agreement == doctest::Approx(0.6));
  }

  TEST_CASE("relabel success rate on a split crowd") {
    CalibratedSource src(0.5, 9);
    const auto segs = dummy_segments(200);
    const auto r = rsr_experiment(src, segs);
    CHECK(r.surveys == 200);
    CHECK(r.rejected_first > 50);
    REQUIRE(r.rsr());
    CHECK(*r.rsr() >= 0.0);
    CHECK(*r.rsr() <= 1.0);
  }

  TEST_CASE("threshold sweep nests acceptance counts") {
    SweepConfig sc;
    sc.fixture.items = 800;
    sc.vote_sample = 200;
    sc.survey_budget = 60;
    const auto pts = at_sweep(sc);
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].accepted_sample >= pts[1].accepted_sample);
    CHECK(pts[1].accepted_sample >= pts[2].accepted_sample);
    for (const auto& p : pts) CHECK(p.surveys <= sc.survey_budget);
  }
}
