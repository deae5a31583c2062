#pragma once

#include <functional>
#include <string_view>

namespace policyal::log {

enum class Level { kDebug, kInfo, kWarn };

using Sink = std::function<void(Level, std::string_view)>;

// Replaces the process-wide sink; returns the previous one. The default sink
// writes warnings and info to stderr.
Sink set_sink(Sink sink);
void set_min_level(Level level);

void debug(std::string_view msg);
void info(std::string_view msg);
void warn(std::string_view msg);

// Captures messages for the lifetime of the guard (tests).
class ScopedCapture {
 public:
  explicit ScopedCapture(Sink sink) : previous_(set_sink(std::move(sink))) {}
  ~ScopedCapture() { set_sink(std::move(previous_)); }
  ScopedCapture(const ScopedCapture&) = delete;
  ScopedCapture& operator=(const ScopedCapture&) = delete;

 private:
  Sink previous_;
};

}  // namespace policyal::log
