#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace policyal::crowd {

enum class EventType { kIssued, kAnnotated, kAggregated, kVoided, kAccepted, kWasted, kAmbiguous };
std::string_view to_string(EventType t);
EventType event_type_from(std::string_view s);

struct LedgerEvent {
  EventType type = EventType::kIssued;
  std::string survey_id;
  std::string annotator_id;  // kAnnotated only
  std::size_t attempt = 0;
  double amount = 0.0;  // USD paid, kAnnotated only
  std::size_t count = 0;  // requested annotations (kIssued) or pooled votes (kAggregated)

  friend bool operator==(const LedgerEvent&, const LedgerEvent&) = default;
};

struct LedgerSnapshot {
  double total_spend = 0.0;
  std::size_t surveys_issued = 0;  // issue events, one per (re)request batch
  std::size_t annotations = 0;
  std::size_t accepted_labels = 0;
  std::size_t wasted_requests = 0;
  std::size_t ambiguous = 0;
  std::size_t voided = 0;

  // total_spend / accepted_labels; empty when nothing was accepted.
  std::optional<double> cost_per_accepted() const;
};

LedgerSnapshot fold(std::span<const LedgerEvent> events);

// Append-only event log. Totals are always derived from the events.
class CostLedger {
 public:
  CostLedger() = default;
  CostLedger(CostLedger&& other) noexcept;
  CostLedger& operator=(CostLedger&&) = delete;

  void record(LedgerEvent event);

  void issued(const std::string& survey_id, std::size_t attempt, std::size_t count);
  void annotated(const std::string& survey_id, const std::string& annotator_id,
                 std::size_t attempt, double amount);
  void aggregated(const std::string& survey_id, std::size_t attempt, std::size_t pooled);
  void voided(const std::string& survey_id, std::size_t attempt);
  void accepted(const std::string& survey_id, std::size_t attempt);
  void wasted(const std::string& survey_id, std::size_t attempt);
  void ambiguous(const std::string& survey_id, std::size_t attempt);

  LedgerSnapshot snapshot() const;
  std::vector<LedgerEvent> events() const;
  std::size_t size() const;

  void save(const std::filesystem::path& path) const;
  static CostLedger load(const std::filesystem::path& path);

 private:
  mutable std::mutex mu_;
  std::vector<LedgerEvent> events_;
  LedgerSnapshot totals_;
};

}  // namespace policyal::crowd
