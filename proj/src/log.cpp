#include "policyal/log.hpp"

#include <iostream>
#include <mutex>

namespace policyal::log {

namespace {

std::mutex g_mu;
Level g_min = Level::kInfo;

void default_sink(Level level, std::string_view msg) {
  const char* tag = level == Level::kWarn ? "WARN" : level == Level::kInfo ? "INFO" : "DEBUG";
  std::clog << "[" << tag << "] " << msg << '\n';
}

Sink& sink() {
  static Sink s = default_sink;
  return s;
}

void emit(Level level, std::string_view msg) {
  std::lock_guard<std::mutex> lock(g_mu);
  if (level < g_min) return;
  if (sink()) sink()(level, msg);
}

}  // namespace

Sink set_sink(Sink s) {
  std::lock_guard<std::mutex> lock(g_mu);
  Sink prev = std::move(sink());
  sink() = s ? std::move(s) : Sink(default_sink);
  return prev;
}

void set_min_level(Level level) {
  std::lock_guard<std::mutex> lock(g_mu);
  g_min = level;
}

void debug(std::string_view msg) { emit(Level::kDebug, msg); }
void info(std::string_view msg) { emit(Level::kInfo, msg); }
void warn(std::string_view msg) { emit(Level::kWarn, msg); }

}  // namespace policyal::log
