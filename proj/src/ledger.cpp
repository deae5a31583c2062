#include "policyal/ledger.hpp"

#include <fstream>

#include "json.hpp"
#include "policyal/error.hpp"
#include "policyal/text.hpp"

namespace policyal::crowd {

using nlohmann::json;

std::string_view to_string(EventType t) {
  switch (t) {
    case EventType::kIssued: return "issued";
    case EventType::kAnnotated: return "annotated";
    case EventType::kAggregated: return "aggregated";
    case EventType::kVoided: return "voided";
    case EventType::kAccepted: return "accepted";
    case EventType::kWasted: return "wasted";
    case EventType::kAmbiguous: return "ambiguous";
  }
  return "?";
}

EventType event_type_from(std::string_view s) {
  for (auto t : {EventType::kIssued, EventType::kAnnotated, EventType::kAggregated,
                 EventType::kVoided, EventType::kAccepted, EventType::kWasted,
                 EventType::kAmbiguous}) {
    if (to_string(t) == s) return t;
  }
  throw ParseError("unknown ledger event: " + std::string(s));
}

std::optional<double> LedgerSnapshot::cost_per_accepted() const {
  if (accepted_labels == 0) return std::nullopt;
  return total_spend / static_cast<double>(accepted_labels);
}

namespace {

void apply(LedgerSnapshot& s, const LedgerEvent& e) {
  switch (e.type) {
    case EventType::kIssued: ++s.surveys_issued; break;
    case EventType::kAnnotated:
      ++s.annotations;
      s.total_spend += e.amount;
      break;
    case EventType::kAggregated: break;
    case EventType::kVoided: ++s.voided; break;
    case EventType::kAccepted: ++s.accepted_labels; break;
    case EventType::kWasted: ++s.wasted_requests; break;
    case EventType::kAmbiguous: ++s.ambiguous; break;
  }
}

}  // namespace

LedgerSnapshot fold(std::span<const LedgerEvent> events) {
  LedgerSnapshot s;
  for (const auto& e : events) apply(s, e);
  return s;
}

CostLedger::CostLedger(CostLedger&& other) noexcept {
  std::lock_guard<std::mutex> lock(other.mu_);
  events_ = std::move(other.events_);
  totals_ = other.totals_;
  other.totals_ = {};
}

void CostLedger::record(LedgerEvent event) {
  if (event.amount < 0.0) throw InvalidArgument("negative ledger amount");
  std::lock_guard<std::mutex> lock(mu_);
  apply(totals_, event);
  events_.push_back(std::move(event));
}

void CostLedger::issued(const std::string& survey_id, std::size_t attempt, std::size_t count) {
  record({EventType::kIssued, survey_id, {}, attempt, 0.0, count});
}
void CostLedger::annotated(const std::string& survey_id, const std::string& annotator_id,
                           std::size_t attempt, double amount) {
  record({EventType::kAnnotated, survey_id, annotator_id, attempt, amount, 0});
}
void CostLedger::aggregated(const std::string& survey_id, std::size_t attempt, std::size_t pooled) {
  record({EventType::kAggregated, survey_id, {}, attempt, 0.0, pooled});
}
void CostLedger::voided(const std::string& survey_id, std::size_t attempt) {
  record({EventType::kVoided, survey_id, {}, attempt, 0.0, 0});
}
void CostLedger::accepted(const std::string& survey_id, std::size_t attempt) {
  record({EventType::kAccepted, survey_id, {}, attempt, 0.0, 0});
}
void CostLedger::wasted(const std::string& survey_id, std::size_t attempt) {
  record({EventType::kWasted, survey_id, {}, attempt, 0.0, 0});
}
void CostLedger::ambiguous(const std::string& survey_id, std::size_t attempt) {
  record({EventType::kAmbiguous, survey_id, {}, attempt, 0.0, 0});
}

LedgerSnapshot CostLedger::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return totals_;
}

std::vector<LedgerEvent> CostLedger::events() const {
  std::lock_guard<std::mutex> lock(mu_);
  return events_;
}

std::size_t CostLedger::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return events_.size();
}

void CostLedger::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : events()) {
    json payload{{"survey_id", e.survey_id}, {"attempt", e.attempt}};
    if (e.type == EventType::kAnnotated) {
      payload["annotator_id"] = e.annotator_id;
      payload["amount"] = e.amount;
    }
    if (e.type == EventType::kIssued || e.type == EventType::kAggregated) payload["count"] = e.count;
    out << json{{"event", to_string(e.type)}, {"payload", payload}}.dump() << '\n';
  }
}

CostLedger CostLedger::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CostLedger ledger;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      const auto& p = j.at("payload");
      LedgerEvent e;
      e.type = event_type_from(j.at("event").get<std::string>());
      e.survey_id = p.at("survey_id").get<std::string>();
      e.attempt = p.value("attempt", std::size_t{0});
      e.annotator_id = p.value("annotator_id", std::string());
      e.amount = p.value("amount", 0.0);
      e.count = p.value("count", std::size_t{0});
      ledger.record(std::move(e));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  return ledger;
}

}  // namespace policyal::crowd
