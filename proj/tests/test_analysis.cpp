#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "policyal/analysis.hpp"
#include "policyal/error.hpp"
#include "support.hpp"

using namespace policyal;

namespace {

crowd::SegmentLabel label(const std::string& doc, std::size_t sentence, DataCategory c, DataAction a,
                          ActionMode m, const std::string& text = "text") {
  ModeTriple modes = kAllNotMentioned;
  modes[index_of(a)] = m;
  segmenter::Segment s{doc, sentence, sentence, sentence, c, text};
  return crowd::make_label(s, c, true, modes, crowd::Provenance::kAnnotated);
}

std::string two(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("conflicting pairs") {
    using M = ActionMode;
    for (auto a : kAllModes) {
      for (auto b : kAllModes) {
        const bool want = (a == M::kDenial && (b == M::kAssert || b == M::kChoice)) ||
                          (b == M::kDenial && (a == M::kAssert || a == M::kChoice));
        CHECK(analysis::conflicting_pair(a, b) == want);
      }
    }
  }

  TEST_CASE("assert against denial is flagged with its segments and legal note") {
    const std::vector<crowd::SegmentLabel> labels = {
        label("d", 0, DataCategory::kContact, DataAction::kShare, ActionMode::kAssert),
        label("d", 3, DataCategory::kContact, DataAction::kShare, ActionMode::kDenial,
              "We will not share it unless required by law."),
        label("d", 5, DataCategory::kHealth, DataAction::kShare, ActionMode::kDenial)};
    const auto c = analysis::detect_conflicts(labels);
    REQUIRE(c.size() == 1);
    CHECK(c[0].category == DataCategory::kContact);
    CHECK(c[0].action == DataAction::kShare);
    CHECK(c[0].segment_keys == std::vector<std::string>{"d:contact:0-0", "d:contact:3-3"});
    CHECK(c[0].note == "legal-exception");
  }

  TEST_CASE("distractors do not conflict") {
    const std::vector<crowd::SegmentLabel> labels = {
        label("d", 0, DataCategory::kContact, DataAction::kShare, ActionMode::kAssert),
        label("d", 1, DataCategory::kContact, DataAction::kShare, ActionMode::kChoice),
        label("d", 2, DataCategory::kContact, DataAction::kStore, ActionMode::kAmbiguous),
        label("d", 3, DataCategory::kContact, DataAction::kStore, ActionMode::kDenial),
        label("d", 4, DataCategory::kContact, DataAction::kCollectUse, ActionMode::kDenial),
        label("d", 5, DataCategory::kLocation, DataAction::kCollectUse, ActionMode::kAssert)};
    CHECK(analysis::detect_conflicts(labels).empty());
    const auto r = analysis::document_rollup(labels);
    CHECK(r.at({DataCategory::kContact, DataAction::kShare}).mode == ActionMode::kChoice);
    CHECK(r.at({DataCategory::kContact, DataAction::kStore}).mode == ActionMode::kDenial);
    CHECK(r.at({DataCategory::kContact, DataAction::kCollectUse}).mode == ActionMode::kDenial);
    CHECK(r.at({DataCategory::kHealth, DataAction::kShare}).mode == ActionMode::kNotMentioned);
    CHECK(r.size() == kNumCategories * kNumActions);
  }

  TEST_CASE("irrelevant labels take no part") {
    ModeTriple modes = kAllNotMentioned;
    segmenter::Segment s{"d", 1, 1, 1, DataCategory::kContact, "x"};
    const std::vector<crowd::SegmentLabel> labels = {
        label("d", 0, DataCategory::kContact, DataAction::kShare, ActionMode::kAssert),
        crowd::make_label(s, DataCategory::kContact, false, modes, crowd::Provenance::kAnnotated)};
    CHECK(analysis::detect_conflicts(labels).empty());
    CHECK(analysis::document_rollup(labels).at({DataCategory::kContact, DataAction::kShare}).mode ==
          ActionMode::kAssert);
  }

  TEST_CASE("labels from two documents are rejected") {
    const std::vector<crowd::SegmentLabel> labels = {
        label("a", 0, DataCategory::kContact, DataAction::kShare, ActionMode::kAssert),
        label("b", 0, DataCategory::kContact, DataAction::kShare, ActionMode::kDenial)};
    CHECK_THROWS_AS(analysis::detect_conflicts(labels), InvalidArgument);
    CHECK_THROWS_AS(analysis::document_rollup(labels), InvalidArgument);
    CHECK(analysis::group_by_document(labels).size() == 2);
  }

  TEST_CASE("planted conflicts are found exactly") {
    for (std::uint64_t seed : {31u, 7u, 99u}) {
      const auto f = support::planted_conflicts(25, seed);
      REQUIRE(f.planted.size() >= 15);
      const auto s = support::score_conflicts(f);
      CHECK(s.false_pos == 0);
      CHECK(s.false_neg == 0);
      CHECK(s.rollup_wrong == 0);
    }
  }

  TEST_CASE("duplication balances 80/20 to 80/80") {
    std::vector<std::size_t> labels;
    for (int i = 0; i < 100; ++i) labels.push_back(i % 5 == 0 ? 1 : 0);
    const auto idx = analysis::duplication_indices(labels, 4);
    REQUIRE(idx.size() == 160);
    for (std::size_t i = 0; i < 100; ++i) CHECK(idx[i] == i);
    std::size_t ones = 0;
    for (auto i : idx) ones += labels[i];
    CHECK(ones == 80);
    CHECK(analysis::duplication_indices(labels, 4) == idx);
    const std::vector<std::size_t> single(10, 0);
    CHECK_THROWS_AS(analysis::duplication_indices(single, 1), InvalidArgument);
    const std::vector<std::size_t> three = {0, 1, 2};
    CHECK_THROWS_AS(analysis::duplication_indices(three, 1), InvalidArgument);
  }

  TEST_CASE("al_save") {
    CHECK(analysis::al_save(100, 20) == doctest::Approx(0.8));
    CHECK_THROWS_AS(analysis::al_save(0, 1), InvalidArgument);
  }

  TEST_CASE("bins") {
    CHECK(analysis::downloads_bin(50000) == "50K+");
    CHECK(analysis::downloads_bin(49999) == "10K-50K");
    CHECK(analysis::downloads_bin(1000) == "1K-10K");
    CHECK(analysis::downloads_bin(999) == "<1K");
    CHECK(analysis::rating_bin(std::nullopt) == "None");
    CHECK(analysis::rating_bin(4.6) == ">4.5");
    CHECK(analysis::rating_bin(4.5) == "4.0-4.5");
    CHECK(analysis::rating_bin(3.0) == "<=3.0");
  }

  TEST_CASE("corpus statistics match a direct recount") {
    const auto f = support::planted_conflicts(25, 5);
    std::map<std::string, corpus::SourceMeta> meta;
    const std::vector<std::uint64_t> downloads = {100, 5000, 20000, 90000};
    for (int d = 0; d < 25; ++d) {
      corpus::SourceMeta m;
      m.app_category = d % 2 ? "games" : "health";
      m.downloads = downloads[d % 4];
      if (d % 3) m.rating = 2.5 + 0.5 * (d % 5);
      meta["conf_" + std::to_string(d)] = m;
    }
    const auto rep = analysis::corpus_stats(f.labels, meta);

    for (auto c : kAllCategories) {
      std::size_t n = 0, den = 0;
      for (const auto& l : f.labels) {
        if (!l.relevant || l.category != c) continue;
        ++n;
        den += std::count(l.modes.begin(), l.modes.end(), ActionMode::kDenial) > 0;
      }
      const auto& row = rep.by_category.rows[index_of(c)];
      CHECK(row[0] == std::string(to_string(c)));
      CHECK(row[1] == std::to_string(n));
      CHECK(row[2] == (n ? two(100.0 * den / n) + "%" : "N/A"));
    }
    for (auto a : kAllActions) {
      std::array<std::size_t, 3> cnt{};
      for (const auto& l : f.labels) {
        if (!l.relevant) continue;
        const auto m = l.modes[index_of(a)];
        if (m == ActionMode::kAssert) ++cnt[0];
        if (m == ActionMode::kDenial) ++cnt[1];
        if (m == ActionMode::kChoice) ++cnt[2];
      }
      const auto& row = rep.modes_per_policy.rows[index_of(a)];
      CHECK(row[1] == two(cnt[0] / 25.0));
      CHECK(row[2] == two(cnt[1] / 25.0));
      CHECK(row[3] == two(cnt[2] / 25.0));
    }
    REQUIRE(rep.by_downloads);
    std::size_t policies = 0;
    for (const auto& row : rep.by_downloads->rows) policies += std::stoul(row[1]);
    CHECK(policies == 25);
    REQUIRE(rep.by_rating);
    CHECK(rep.by_rating->rows.size() == 5);
    REQUIRE(rep.by_app_category);
    CHECK(rep.by_app_category->columns == std::vector<std::string>{"category", "games", "health"});

    const auto dir = std::filesystem::temp_directory_path() / "policyal_report_test";
    std::filesystem::remove_all(dir);
    analysis::write_report(rep, dir);
    CHECK(std::filesystem::exists(dir / "denials_by_category.csv"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("popularity tables need metadata") {
    const auto f = support::planted_conflicts(5, 2);
    const auto rep = analysis::corpus_stats(f.labels);
    CHECK_FALSE(rep.by_downloads);
    CHECK_FALSE(rep.by_app_category);
    CHECK(rep.by_category.rows.size() == kNumCategories);
  }

  TEST_CASE("csv quoting") {
    analysis::Table t{"t", {"a", "b"}, {{"x,y", "say \"hi\""}}};
    CHECK(analysis::to_csv(t) == "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
  }
}
