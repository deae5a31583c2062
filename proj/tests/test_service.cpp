#include <atomic>
#include <random>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "policyal/error.hpp"
#include "policyal/ledger.hpp"
#include "policyal/service.hpp"

using namespace policyal;
using namespace policyal::service;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("w" + std::to_string(i));
  return out;
}

crowd::Survey survey(const std::string& id, std::size_t first = 0) {
  crowd::Survey s;
  s.survey_id = id;
  s.segment = {"doc", first, first + 1, first, DataCategory::kContact, "We share your email address."};
  s.category = DataCategory::kContact;
  s.unit_cost = 0.2;
  return s;
}

std::string body(const std::string& who, const crowd::Answers& a = {}) {
  return json{{"annotator_id", who}, {"answers", answers_json(a)}}.dump();
}

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("wire format round trip and strict parsing") {
    crowd::Answers a;
    a.relevant = true;
    a.modes = {ActionMode::kAssert, ActionMode::kDenial, ActionMode::kAmbiguous};
    a.honest = false;
    CHECK(parse_answers(answers_json(a)) == a);
    auto j = answers_json(a);
    j.erase("share");
    CHECK_THROWS_AS(parse_answers(j), ValidationError);
    j = answers_json(a);
    j["extra"] = "x";
    CHECK_THROWS_AS(parse_answers(j), ValidationError);
    j = answers_json(a);
    j["store"] = "maybe";
    CHECK_THROWS_AS(parse_answers(j), ValidationError);
    j = answers_json(a);
    j["relevance"] = 1;
    CHECK_THROWS_AS(parse_answers(j), ValidationError);

    const auto s = survey_json(survey("s1"));
    CHECK(s["survey_id"] == "s1");
    CHECK(s["segment"]["key"] == "doc:contact:0-1");
    REQUIRE(s["questions"].size() == 5);
    CHECK(s["questions"][0]["options"] == json({"relevant", "irrelevant"}));
    CHECK(s["questions"][1]["options"].size() == kNumModes);
    CHECK(s["questions"][4]["options"] == json({"yes", "no"}));
  }

  TEST_CASE("handler statuses") {
    AnnotationQueue q(ids(8));
    crowd::CostLedger ledger;
    Service svc(q, ledger);

    CHECK(svc.next_survey(std::nullopt).status == 400);
    CHECK(svc.next_survey("intruder").status == 403);
    auto empty = svc.next_survey("w0");
    CHECK(empty.status == 204);
    CHECK(empty.headers.at("Retry-After") == "5");

    q.publish(survey("s1"), 2);
    auto r = svc.next_survey("w0");
    REQUIRE(r.status == 200);
    CHECK(r.body["survey_id"] == "s1");
    // the same live assignment comes back
    CHECK(svc.next_survey("w0").body["survey_id"] == "s1");

    CHECK(svc.submit("s1", "{oops").status == 400);
    CHECK(svc.submit("s1", R"({"answers": {}})").status == 400);
    CHECK(svc.submit("s1", R"({"annotator_id": "w0", "answers": {"relevance": "relevant"}})").status == 400);
    CHECK(svc.submit("s1", body("intruder")).status == 403);
    CHECK(svc.submit("s1", body("w1")).status == 403);  // never assigned
    CHECK(svc.submit("nope", body("w0")).status == 404);

    auto ok = svc.submit("s1", body("w0"));
    CHECK(ok.status == 200);
    CHECK(ok.body["received"] == 1);
    CHECK(ok.body["needed"] == 2);
    CHECK(ok.body["completed"] == false);
    CHECK(svc.submit("s1", body("w0")).status == 409);
    // w0 has seen s1 and must not get it again
    CHECK(svc.next_survey("w0").status == 204);

    REQUIRE(svc.next_survey("w1").status == 200);
    auto done = svc.submit("s1", body("w1"));
    CHECK(done.body["completed"] == true);
    REQUIRE(svc.next_survey("w2").status == 204);
    CHECK(svc.submit("s1", body("w2")).status == 409);  // closed

    CHECK(svc.segment("doc:contact:0-1").status == 200);
    CHECK(svc.segment("doc:contact:9-9").status == 404);

    auto m = svc.metrics();
    CHECK(m.status == 200);
    CHECK(m.body["last"].is_null());
    CHECK(m.body["queue"]["completed"] == 1);
    CHECK(m.body["ledger"]["cost_per_accepted"].is_null());
    al::TraceRow row;
    row.iter = 3;
    row.model = "category";
    svc.push_trace(row);
    CHECK(svc.metrics().body["iterations"] == 1);
    CHECK(svc.metrics().body["last"]["iter"] == 3);

    auto batch = q.wait("s1", 0ms);
    REQUIRE(batch);
    CHECK(batch->annotations.size() == 2);
    CHECK_FALSE(q.wait("s1", 0ms));  // handed over once
    CHECK(q.batches_fired() == 1);
  }

  TEST_CASE("publish rules") {
    AnnotationQueue q(ids(3));
    CHECK_THROWS_AS(q.publish(survey("s"), 0), InvalidArgument);
    q.publish(survey("s"), 1);
    CHECK_THROWS_AS(q.publish(survey("s"), 1), InvalidArgument);
  }

  TEST_CASE("expired leases free the slot") {
    AnnotationQueue q(ids(3), QueueConfig{.lease = 20ms, .retry_after_seconds = 1});
    q.publish(survey("s"), 1);
    CHECK(q.next("w0").status == NextStatus::kSurvey);
    CHECK(q.next("w1").status == NextStatus::kEmpty);
    std::this_thread::sleep_for(40ms);
    CHECK(q.next("w1").status == NextStatus::kSurvey);
    // late answer from w0 is still taken while the request is open
    CHECK(q.submit("w0", "s", {}).status == SubmitStatus::kCompleted);
    CHECK(q.submit("w1", "s", {}).status == SubmitStatus::kClosed);
  }

  TEST_CASE("no annotator sees a survey twice under random traffic") {
    std::mt19937_64 rng(5);
    const auto who = ids(12);
    AnnotationQueue q(who, QueueConfig{.lease = 1h, .retry_after_seconds = 1});
    std::map<std::pair<std::string, std::string>, int> handed;
    std::size_t published = 0;
    std::set<std::string> live;
    for (int step = 0; step < 4000; ++step) {
      const auto& w = who[rng() % who.size()];
      const auto roll = rng() % 10;
      if (roll == 0 && live.size() < 6) {
        const auto id = "s" + std::to_string(published++);
        q.publish(survey(id, published), 5);
        live.insert(id);
      } else if (roll < 6) {
        auto r = q.next(w);
        if (r.status == NextStatus::kSurvey) {
          const auto& id = r.survey->survey_id;
          ++handed[{w, id}];
          CHECK(q.has_seen(w, id));
        }
      } else {
        // answer some survey this annotator currently holds, or a random one
        for (const auto& id : live) {
          auto res = q.submit(w, id, {});
          if (res.status == SubmitStatus::kCompleted) {
            auto b = q.wait(id, 0ms);
            REQUIRE(b);
            CHECK(b->annotations.size() == 5);
            std::set<std::string> distinct;
            for (const auto& a : b->annotations) distinct.insert(a.annotator_id);
            CHECK(distinct.size() == 5);
            live.erase(id);
            break;
          }
          if (res.status == SubmitStatus::kAccepted) break;
        }
      }
    }
    // a re-fetched live lease is the only repeat; after answering it never returns
    std::size_t answered_twice = 0;
    for (const auto& [k, n] : handed) answered_twice += n > 1 && !q.has_seen(k.first, k.second);
    CHECK(answered_twice == 0);
    CHECK(q.batches_fired() > 0);
  }

  TEST_CASE("concurrent submissions complete a batch exactly once") {
    for (int round = 0; round < 20; ++round) {
      const auto who = ids(40);
      AnnotationQueue q(who);
      q.publish(survey("s"), 5);
      std::vector<std::string> holders;
      for (const auto& w : who) {
        if (q.next(w).status == NextStatus::kSurvey) holders.push_back(w);
      }
      REQUIRE(holders.size() == 5);
      std::atomic<int> completed{0}, accepted{0}, other{0};
      std::vector<std::thread> threads;
      // every holder submits twice, plus outsiders try too
      for (int t = 0; t < 10; ++t) {
        threads.emplace_back([&, t] {
          const auto& w = t < 5 ? holders[t] : holders[t - 5];
          const auto st = q.submit(w, "s", {}).status;
          if (st == SubmitStatus::kCompleted) ++completed;
          else if (st == SubmitStatus::kAccepted) ++accepted;
          else ++other;
          q.submit(who[39 - t], "s", {});
        });
      }
      for (auto& th : threads) th.join();
      CHECK(completed == 1);
      CHECK(accepted == 4);
      CHECK(other == 5);
      CHECK(q.batches_fired() == 1);
      auto b = q.wait("s", 0ms);
      REQUIRE(b);
      CHECK(b->annotations.size() == 5);
    }
  }

  TEST_CASE("live source feeds a labeling session") {
    const auto who = ids(20);
    AnnotationQueue q(who, QueueConfig{.lease = 1h, .retry_after_seconds = 1});
    LiveQueueSource source(q, {}, 10s);
    crowd::CostLedger ledger;
    crowd::LabelingSession session(source, ledger, {});
    std::atomic<bool> stop{false};
    // simulated workers: first batch splits 3/2 on relevance, later ones agree
    std::thread workers([&] {
      std::size_t turn = 0;
      while (!stop) {
        for (const auto& w : who) {
          auto r = q.next(w);
          if (r.status != NextStatus::kSurvey) continue;
          crowd::Answers a;
          a.relevant = r.survey->attempt > 1 || (turn++ % 5) < 3;
          a.modes = {ActionMode::kAssert, ActionMode::kNotMentioned, ActionMode::kNotMentioned};
          if (!a.relevant) a.modes = kAllNotMentioned;
          q.submit(w, r.survey->survey_id, a);
        }
        std::this_thread::sleep_for(1ms);
      }
    });
    const auto res = session.label(survey("x").segment);
    stop = true;
    workers.join();
    CHECK(res.accepted());
    REQUIRE(res.label);
    CHECK(res.label->relevant);
    CHECK(res.annotations == 10);
    CHECK(ledger.snapshot().annotations == 10);
  }

  TEST_CASE("live source times out") {
    AnnotationQueue q(ids(5));
    LiveQueueSource source(q, {}, 10ms);
    CHECK_THROWS_AS(source.collect(survey("t"), 5), IoError);
  }

  TEST_CASE("http round trip") {
    AnnotationQueue q(ids(6));
    crowd::CostLedger ledger;
    Service svc(q, ledger);
    HttpServer server(svc);
    const int port = server.start("127.0.0.1", 0);
    REQUIRE(port > 0);
    httplib::Client cli("127.0.0.1", port);

    auto r = cli.Get("/api/surveys/next?annotator=w0");
    REQUIRE(r);
    CHECK(r->status == 204);
    CHECK(r->get_header_value("Retry-After") == "5");
    r = cli.Get("/api/surveys/next");
    REQUIRE(r);
    CHECK(r->status == 400);

    q.publish(survey("s1"), 1);
    r = cli.Get("/api/surveys/next?annotator=w0");
    REQUIRE(r);
    REQUIRE(r->status == 200);
    const auto s = json::parse(r->body);
    CHECK(s["survey_id"] == "s1");

    r = cli.Post("/api/surveys/s1/annotations", body("w0"), "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(json::parse(r->body)["completed"] == true);
    r = cli.Post("/api/surveys/s1/annotations", body("w0"), "application/json");
    REQUIRE(r);
    CHECK(r->status == 409);
    r = cli.Post("/api/surveys/zz/annotations", body("w0"), "application/json");
    REQUIRE(r);
    CHECK(r->status == 404);

    r = cli.Get("/api/segments/doc:contact:0-1");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(json::parse(r->body)["text"] == "We share your email address.");
    r = cli.Get("/api/metrics");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(json::parse(r->body)["queue"]["completed"] == 1);
    server.stop();
  }
}
