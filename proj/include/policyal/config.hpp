#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "policyal/alengine.hpp"
#include "policyal/corpus.hpp"
#include "policyal/sources.hpp"

namespace policyal::config {

enum class SourceKind { kSimulated, kReplay, kLive };
std::string_view to_string(SourceKind k);
SourceKind source_from(std::string_view s);

struct Paths {
  std::filesystem::path corpus_dir;
  std::optional<std::filesystem::path> metadata;
  std::filesystem::path vectors;
  std::optional<std::filesystem::path> truth;  // label JSONL for simulated/replay annotators
  std::filesystem::path out_dir = "out";
};

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t annotators = 50;  // ids w0000..
  std::size_t lease_seconds = 600;
};

struct AppConfig {
  Paths paths;
  std::vector<DataCategory> categories = {DataCategory::kContact};
  SourceKind source = SourceKind::kSimulated;
  double replay_noise = 0.05;
  crowd::SimulatedConfig simulated;
  al::LoopConfig loop;
  corpus::FilterConfig filter;
  ServeConfig serve;
};

// Unknown keys and malformed values raise InvalidConfig. Missing keys keep
// their defaults.
AppConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const AppConfig& c);
AppConfig load(const std::filesystem::path& path);

// "loop.strategy=margin", "serve.port=9000": the value is read as JSON when it
// parses, as a plain string otherwise.
void apply_override(AppConfig& c, std::string_view assignment);

void validate(const AppConfig& c);

}  // namespace policyal::config
