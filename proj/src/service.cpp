#include "policyal/service.hpp"

#include <algorithm>

#include "httplib.h"
#include "policyal/error.hpp"
#include "policyal/log.hpp"

namespace policyal::service {

using nlohmann::json;

namespace {

constexpr const char* kRelevanceKey = "relevance";
constexpr const char* kHonestyKey = "honesty";

json error_body(const std::string& message) { return json{{"error", message}}; }

}  // namespace

// ---------------------------------------------------------------------------
// Queue

AnnotationQueue::AnnotationQueue(std::vector<std::string> annotators, QueueConfig config)
    : config_(config), annotators_(annotators.begin(), annotators.end()) {
  if (annotators_.empty()) throw InvalidArgument("annotation queue needs at least one annotator");
}

void AnnotationQueue::publish(const crowd::Survey& survey, std::size_t n) {
  if (n == 0) throw InvalidArgument("publish: n must be positive");
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (closed_) throw InvalidArgument("publish on a closed queue");
    if (open_.count(survey.survey_id) || ready_.count(survey.survey_id)) {
      throw InvalidArgument("survey " + survey.survey_id + " already has an open request");
    }
    Request r;
    r.survey = survey;
    r.n = n;
    open_.emplace(survey.survey_id, std::move(r));
    order_.push_back(survey.survey_id);
    segments_[survey.segment.key()] = survey.segment;
  }
  cv_.notify_all();
}

void AnnotationQueue::expire(Request& r, Clock::time_point now) {
  for (auto it = r.leases.begin(); it != r.leases.end();) {
    if (it->second <= now) {
      it = r.leases.erase(it);
    } else {
      ++it;
    }
  }
}

NextResult AnnotationQueue::next(const std::string& annotator_id) {
  std::lock_guard<std::mutex> lock(mu_);
  if (!annotators_.count(annotator_id)) return {NextStatus::kUnauthorized, std::nullopt};
  const auto now = Clock::now();

  // refetch of a live assignment
  for (const auto& id : order_) {
    auto& r = open_.at(id);
    auto it = r.leases.find(annotator_id);
    if (it != r.leases.end() && it->second > now) {
      it->second = now + config_.lease;
      return {NextStatus::kSurvey, r.survey};
    }
  }
  for (const auto& id : order_) {
    auto& r = open_.at(id);
    expire(r, now);
    if (seen_[id].count(annotator_id)) continue;
    if (r.received.size() + r.leases.size() >= r.n) continue;
    r.leases[annotator_id] = now + config_.lease;
    r.assigned.insert(annotator_id);
    seen_[id].insert(annotator_id);
    return {NextStatus::kSurvey, r.survey};
  }
  return {NextStatus::kEmpty, std::nullopt};
}

SubmitResult AnnotationQueue::submit(const std::string& annotator_id, const std::string& survey_id,
                                     const crowd::Answers& answers) {
  SubmitResult out;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (!annotators_.count(annotator_id)) {
      out.status = SubmitStatus::kUnauthorized;
      return out;
    }
    const auto key = std::make_pair(survey_id, annotator_id);
    auto it = open_.find(survey_id);
    if (it == open_.end()) {
      if (!seen_.count(survey_id)) {
        out.status = SubmitStatus::kUnknownSurvey;
      } else {
        out.status = answered_.count(key) ? SubmitStatus::kDuplicate : SubmitStatus::kClosed;
      }
      return out;
    }
    auto& r = it->second;
    out.needed = r.n;
    out.received = r.received.size();
    if (answered_.count(key)) {
      out.status = SubmitStatus::kDuplicate;
      return out;
    }
    if (!r.assigned.count(annotator_id)) {
      out.status = SubmitStatus::kNotAssigned;
      return out;
    }
    answered_.insert(key);
    r.leases.erase(annotator_id);
    r.received.push_back({survey_id, annotator_id, answers});
    ++annotations_;
    out.received = r.received.size();
    if (r.received.size() < r.n) {
      out.status = SubmitStatus::kAccepted;
      return out;
    }
    out.status = SubmitStatus::kCompleted;
    ready_[survey_id] = CompletedBatch{r.survey, std::move(r.received)};
    order_.erase(std::find(order_.begin(), order_.end(), survey_id));
    open_.erase(it);
    ++fired_;
  }
  cv_.notify_all();
  return out;
}

std::optional<CompletedBatch> AnnotationQueue::wait(const std::string& survey_id,
                                                    std::optional<std::chrono::milliseconds> timeout) {
  std::unique_lock<std::mutex> lock(mu_);
  auto ready = [&] { return closed_ || ready_.count(survey_id) > 0; };
  if (timeout) {
    if (!cv_.wait_for(lock, *timeout, ready)) return std::nullopt;
  } else {
    cv_.wait(lock, ready);
  }
  auto it = ready_.find(survey_id);
  if (it == ready_.end()) return std::nullopt;
  CompletedBatch b = std::move(it->second);
  ready_.erase(it);
  return b;
}

void AnnotationQueue::close() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool AnnotationQueue::qualified(const std::string& annotator_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  return annotators_.count(annotator_id) > 0;
}

bool AnnotationQueue::has_seen(const std::string& annotator_id, const std::string& survey_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = seen_.find(survey_id);
  return it != seen_.end() && it->second.count(annotator_id) > 0;
}

std::optional<segmenter::Segment> AnnotationQueue::segment(const std::string& key) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = segments_.find(key);
  if (it == segments_.end()) return std::nullopt;
  return it->second;
}

QueueCounts AnnotationQueue::counts() const {
  std::lock_guard<std::mutex> lock(mu_);
  QueueCounts c;
  const auto now = Clock::now();
  for (const auto& [id, r] : open_) {
    (void)id;
    const bool live = std::any_of(r.leases.begin(), r.leases.end(),
                                  [&](const auto& l) { return l.second > now; });
    if (r.received.empty() && !live) {
      ++c.pending;
    } else {
      ++c.in_flight;
    }
  }
  c.completed = fired_;
  c.annotations = annotations_;
  return c;
}

std::size_t AnnotationQueue::batches_fired() const {
  std::lock_guard<std::mutex> lock(mu_);
  return fired_;
}

// ---------------------------------------------------------------------------
// Wire format

json segment_json(const segmenter::Segment& s) {
  return json{{"key", s.key()},
              {"doc_id", s.doc_id},
              {"category", to_string(s.category)},
              {"first_index", s.first_index},
              {"last_index", s.last_index},
              {"seed_index", s.seed_index},
              {"text", s.text}};
}

json survey_json(const crowd::Survey& survey) {
  json modes = json::array();
  for (auto m : kAllModes) modes.push_back(to_string(m));
  json questions = json::array();
  questions.push_back({{"id", kRelevanceKey}, {"options", {"relevant", "irrelevant"}}});
  for (auto a : kAllActions) questions.push_back({{"id", to_string(a)}, {"options", modes}});
  questions.push_back({{"id", kHonestyKey}, {"options", {"yes", "no"}}});
  return json{{"survey_id", survey.survey_id},
              {"attempt", survey.attempt},
              {"category", to_string(survey.category)},
              {"segment", segment_json(survey.segment)},
              {"questions", questions}};
}

json answers_json(const crowd::Answers& a) {
  json j{{kRelevanceKey, a.relevant ? "relevant" : "irrelevant"}, {kHonestyKey, a.honest ? "yes" : "no"}};
  for (auto act : kAllActions) j[std::string(to_string(act))] = to_string(a.modes[index_of(act)]);
  return j;
}

crowd::Answers parse_answers(const json& j) {
  if (!j.is_object()) throw ValidationError("answers must be an object");
  auto text = [&](const std::string& key) {
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError("missing answer '" + key + "'");
    if (!it->is_string()) throw ValidationError("answer '" + key + "' must be a string");
    return it->get<std::string>();
  };
  std::size_t known = 2 + kNumActions;
  if (j.size() != known) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      if (k != kRelevanceKey && k != kHonestyKey && !parse_action(k)) {
        throw ValidationError("unknown answer '" + k + "'");
      }
    }
  }
  crowd::Answers a;
  const auto rel = text(kRelevanceKey);
  if (rel == "relevant") {
    a.relevant = true;
  } else if (rel == "irrelevant") {
    a.relevant = false;
  } else {
    throw ValidationError("relevance must be relevant|irrelevant, got '" + rel + "'");
  }
  for (auto act : kAllActions) {
    const auto v = text(std::string(to_string(act)));
    auto m = parse_mode(v);
    if (!m) throw ValidationError("invalid mode '" + v + "' for " + std::string(to_string(act)));
    a.modes[index_of(act)] = *m;
  }
  const auto h = text(kHonestyKey);
  if (h == "yes") {
    a.honest = true;
  } else if (h == "no") {
    a.honest = false;
  } else {
    throw ValidationError("honesty must be yes|no, got '" + h + "'");
  }
  return a;
}

// ---------------------------------------------------------------------------
// Handlers

Service::Service(AnnotationQueue& queue, const crowd::CostLedger& ledger)
    : queue_(queue), ledger_(ledger) {}

Response Service::next_survey(const std::optional<std::string>& annotator_id) {
  if (!annotator_id || annotator_id->empty()) return {400, error_body("missing annotator"), {}};
  auto r = queue_.next(*annotator_id);
  switch (r.status) {
    case NextStatus::kUnauthorized:
      return {403, error_body("unknown annotator " + *annotator_id), {}};
    case NextStatus::kEmpty:
      return {204, nullptr, {{"Retry-After", std::to_string(queue_.config().retry_after_seconds)}}};
    case NextStatus::kSurvey:
      break;
  }
  return {200, survey_json(*r.survey), {}};
}

Response Service::submit(const std::string& survey_id, const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    return {400, error_body(std::string("malformed json: ") + e.what()), {}};
  }
  if (!j.is_object() || !j.contains("annotator_id") || !j["annotator_id"].is_string()) {
    return {400, error_body("annotator_id (string) required"), {}};
  }
  if (!j.contains("answers")) return {400, error_body("answers required"), {}};
  const auto annotator = j["annotator_id"].get<std::string>();
  crowd::Answers answers;
  try {
    answers = parse_answers(j["answers"]);
  } catch (const ValidationError& e) {
    return {400, error_body(e.what()), {}};
  }
  const auto r = queue_.submit(annotator, survey_id, answers);
  json ack{{"survey_id", survey_id}, {"received", r.received}, {"needed", r.needed}};
  switch (r.status) {
    case SubmitStatus::kAccepted:
      ack["completed"] = false;
      return {200, ack, {}};
    case SubmitStatus::kCompleted:
      ack["completed"] = true;
      return {200, ack, {}};
    case SubmitStatus::kUnauthorized:
      return {403, error_body("unknown annotator " + annotator), {}};
    case SubmitStatus::kNotAssigned:
      return {403, error_body("survey " + survey_id + " was not assigned to " + annotator), {}};
    case SubmitStatus::kUnknownSurvey:
      return {404, error_body("unknown survey " + survey_id), {}};
    case SubmitStatus::kDuplicate:
      return {409, error_body("duplicate submission"), {}};
    case SubmitStatus::kClosed:
      return {409, error_body("survey " + survey_id + " is closed"), {}};
  }
  return {500, error_body("unreachable"), {}};
}

Response Service::metrics() const {
  const auto snap = ledger_.snapshot();
  const auto q = queue_.counts();
  json ledger{{"total_spend", snap.total_spend},
              {"surveys_issued", snap.surveys_issued},
              {"annotations", snap.annotations},
              {"accepted_labels", snap.accepted_labels},
              {"wasted_requests", snap.wasted_requests},
              {"ambiguous", snap.ambiguous},
              {"voided", snap.voided},
              {"cost_per_accepted", snap.cost_per_accepted() ? json(*snap.cost_per_accepted()) : json(nullptr)}};
  json queue{{"pending", q.pending},
             {"in_flight", q.in_flight},
             {"completed", q.completed},
             {"annotations", q.annotations}};
  json trace = nullptr;
  std::size_t iterations = 0;
  {
    std::lock_guard<std::mutex> lock(mu_);
    iterations = trace_.size();
    if (!trace_.empty()) {
      const auto& t = trace_.back();
      trace = json{{"iter", t.iter},
                   {"category", to_string(t.category)},
                   {"model", t.model},
                   {"f1_val", t.f1_val},
                   {"f1_action", t.f1_action},
                   {"minority_frac", t.minority_frac},
                   {"accepted", t.accepted},
                   {"wasted", t.wasted},
                   {"spend", t.spend}};
    }
  }
  return {200, json{{"iterations", iterations}, {"last", trace}, {"ledger", ledger}, {"queue", queue}}, {}};
}

Response Service::segment(const std::string& key) const {
  auto s = queue_.segment(key);
  if (!s) return {404, error_body("unknown segment " + key), {}};
  return {200, segment_json(*s), {}};
}

void Service::push_trace(const al::TraceRow& row) {
  std::lock_guard<std::mutex> lock(mu_);
  trace_.push_back(row);
}

// ---------------------------------------------------------------------------
// Live source

LiveQueueSource::LiveQueueSource(AnnotationQueue& queue, Screen screen,
                                 std::optional<std::chrono::milliseconds> timeout)
    : queue_(queue), screen_(std::move(screen)), timeout_(timeout) {}

std::vector<crowd::Annotation> LiveQueueSource::collect(const crowd::Survey& survey, std::size_t n) {
  queue_.publish(survey, n);
  auto batch = queue_.wait(survey.survey_id, timeout_);
  if (!batch) throw IoError("live collection for " + survey.survey_id + " ended before completion");
  return std::move(batch->annotations);
}

bool LiveQueueSource::screen(const corpus::Policy& policy, DataCategory category) {
  return screen_ ? screen_(policy, category) : true;
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  for (const auto& [k, v] : r.headers) res.set_header(k, v);
  if (r.status != 204) res.set_content(r.body.dump(), "application/json");
}

}  // namespace

HttpServer::HttpServer(Service& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  s.Get("/api/surveys/next", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> who;
    if (req.has_param("annotator")) who = req.get_param_value("annotator");
    reply(res, service_.next_survey(who));
  });
  s.Post("/api/surveys/:id/annotations", [this](const httplib::Request& req, httplib::Response& res) {
    reply(res, service_.submit(req.path_params.at("id"), req.body));
  });
  s.Get("/api/metrics", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, service_.metrics());
  });
  s.Get("/api/segments/:id", [this](const httplib::Request& req, httplib::Response& res) {
    reply(res, service_.segment(req.path_params.at("id")));
  });
  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(error_body(what).dump(), "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  log::info("listening on " + host + ":" + std::to_string(bound));
  return bound;
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace policyal::service
