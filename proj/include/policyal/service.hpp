#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "policyal/alengine.hpp"
#include "policyal/crowd.hpp"
#include "policyal/ledger.hpp"
#include "policyal/sources.hpp"

namespace httplib {
class Server;
}

namespace policyal::service {

struct QueueConfig {
  // An assignment that is not answered within the lease frees its slot for
  // another annotator. A late answer is still taken while the request is open.
  std::chrono::milliseconds lease{std::chrono::minutes(10)};
  int retry_after_seconds = 5;
};

struct QueueCounts {
  std::size_t pending = 0;    // published, nobody assigned yet
  std::size_t in_flight = 0;  // assigned or partially answered
  std::size_t completed = 0;  // batches that reached n annotations
  std::size_t annotations = 0;
};

struct CompletedBatch {
  crowd::Survey survey;
  std::vector<crowd::Annotation> annotations;
};

enum class NextStatus { kSurvey, kEmpty, kUnauthorized };

struct NextResult {
  NextStatus status = NextStatus::kEmpty;
  std::optional<crowd::Survey> survey;
};

enum class SubmitStatus {
  kAccepted,     // stored, batch still open
  kCompleted,    // stored and the batch reached n
  kUnauthorized, // unknown annotator
  kNotAssigned,  // qualified, but the survey was never handed to them
  kUnknownSurvey,
  kDuplicate,    // already answered this survey
  kClosed,       // batch completed without this annotator
};

struct SubmitResult {
  SubmitStatus status = SubmitStatus::kAccepted;
  std::size_t received = 0;
  std::size_t needed = 0;
};

// Live survey queue. All mutations take one mutex, so submissions are applied
// in arrival order and a batch completes exactly once.
class AnnotationQueue {
 public:
  explicit AnnotationQueue(std::vector<std::string> annotators, QueueConfig config = {});

  // Opens a request for n annotations. InvalidArgument when a request for the
  // same survey id is still open or n == 0.
  void publish(const crowd::Survey& survey, std::size_t n);

  // An annotator holding an unanswered live assignment gets it again.
  NextResult next(const std::string& annotator_id);
  SubmitResult submit(const std::string& annotator_id, const std::string& survey_id,
                      const crowd::Answers& answers);

  // Blocks until the batch of survey_id completes and hands it over once.
  // Empty on timeout or after close().
  std::optional<CompletedBatch> wait(const std::string& survey_id,
                                     std::optional<std::chrono::milliseconds> timeout = {});
  void close();

  bool qualified(const std::string& annotator_id) const;
  bool has_seen(const std::string& annotator_id, const std::string& survey_id) const;
  std::optional<segmenter::Segment> segment(const std::string& key) const;
  QueueCounts counts() const;
  std::size_t batches_fired() const;
  const QueueConfig& config() const { return config_; }

 private:
  using Clock = std::chrono::steady_clock;
  struct Request {
    crowd::Survey survey;
    std::size_t n = 0;
    std::vector<crowd::Annotation> received;
    std::map<std::string, Clock::time_point> leases;  // live, unanswered
    std::set<std::string> assigned;                   // ever handed out
  };

  void expire(Request& r, Clock::time_point now);

  QueueConfig config_;
  std::set<std::string> annotators_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> order_;  // open requests, publish order
  std::map<std::string, Request> open_;
  std::map<std::string, CompletedBatch> ready_;
  std::map<std::string, std::set<std::string>> seen_;  // survey id -> annotators
  std::set<std::pair<std::string, std::string>> answered_;  // (survey id, annotator)
  std::map<std::string, segmenter::Segment> segments_;
  std::size_t fired_ = 0;
  std::size_t annotations_ = 0;
  bool closed_ = false;
};

// Wire format. The relevance, three action and honesty questions use fixed
// option identifiers.
nlohmann::json survey_json(const crowd::Survey& survey);
nlohmann::json segment_json(const segmenter::Segment& segment);
nlohmann::json answers_json(const crowd::Answers& answers);
// Throws ValidationError on a missing key, unknown key or value outside the option set.
crowd::Answers parse_answers(const nlohmann::json& j);

struct Response {
  int status = 200;
  nlohmann::json body;  // null for 204
  std::map<std::string, std::string> headers;
};

// Request handlers, free of any HTTP library types.
class Service {
 public:
  Service(AnnotationQueue& queue, const crowd::CostLedger& ledger);

  Response next_survey(const std::optional<std::string>& annotator_id);
  Response submit(const std::string& survey_id, const std::string& body);
  Response metrics() const;
  Response segment(const std::string& key) const;

  void push_trace(const al::TraceRow& row);

 private:
  AnnotationQueue& queue_;
  const crowd::CostLedger& ledger_;
  mutable std::mutex mu_;
  std::vector<al::TraceRow> trace_;
};

// Blocking source backed by the queue: collect() publishes the survey and
// waits for the batch. Document screening is delegated to `screen`.
class LiveQueueSource final : public crowd::AnnotatorSource {
 public:
  using Screen = std::function<bool(const corpus::Policy&, DataCategory)>;
  explicit LiveQueueSource(AnnotationQueue& queue, Screen screen = {},
                           std::optional<std::chrono::milliseconds> timeout = {});

  std::vector<crowd::Annotation> collect(const crowd::Survey& survey, std::size_t n) override;
  bool screen(const corpus::Policy& policy, DataCategory category) override;

 private:
  AnnotationQueue& queue_;
  Screen screen_;
  std::optional<std::chrono::milliseconds> timeout_;
};

// httplib front end on a background thread.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // port 0 picks a free port; returns the bound port. IoError on failure.
  int start(const std::string& host, int port);
  void stop();

 private:
  Service& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace policyal::service
