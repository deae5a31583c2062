#include "policyal/config.hpp"

#include <fstream>
#include <sstream>

#include "policyal/error.hpp"

namespace policyal::config {

using nlohmann::json;

std::string_view to_string(SourceKind k) {
  switch (k) {
    case SourceKind::kSimulated: return "simulated";
    case SourceKind::kReplay: return "replay";
    case SourceKind::kLive: return "live";
  }
  return "simulated";
}

SourceKind source_from(std::string_view s) {
  if (s == "simulated") return SourceKind::kSimulated;
  if (s == "replay") return SourceKind::kReplay;
  if (s == "live") return SourceKind::kLive;
  throw InvalidConfig("unknown source '" + std::string(s) + "' (simulated|replay|live)");
}

namespace {

json opt_path(const std::optional<std::filesystem::path>& p) {
  return p ? json(p->string()) : json(nullptr);
}

std::optional<std::filesystem::path> read_opt_path(const json& j) {
  if (j.is_null()) return std::nullopt;
  return std::filesystem::path(j.get<std::string>());
}

// Every key of `patch` must exist in `schema`; objects recurse, null leaves
// in the schema accept anything.
void check_keys(const json& schema, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw InvalidConfig(prefix.empty() ? "config must be an object" : prefix + " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const auto name = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!schema.contains(it.key())) throw InvalidConfig("unknown config key '" + name + "'");
    const auto& s = schema.at(it.key());
    if (s.is_object()) check_keys(s, it.value(), name);
  }
}

}  // namespace

json to_json(const AppConfig& c) {
  json cats = json::array();
  for (auto k : c.categories) cats.push_back(to_string(k));
  const auto& l = c.loop;
  const auto& s = c.simulated;
  return json{
      {"paths",
       {{"corpus_dir", c.paths.corpus_dir.string()},
        {"metadata", opt_path(c.paths.metadata)},
        {"vectors", c.paths.vectors.string()},
        {"truth", opt_path(c.paths.truth)},
        {"out_dir", c.paths.out_dir.string()}}},
      {"categories", cats},
      {"source", to_string(c.source)},
      {"replay_noise", c.replay_noise},
      {"simulated",
       {{"pool_size", s.pool_size},
        {"accuracy_alpha", s.accuracy_alpha},
        {"accuracy_beta", s.accuracy_beta},
        {"fixed_accuracy", s.fixed_accuracy ? json(*s.fixed_accuracy) : json(nullptr)},
        {"dishonest_rate", s.dishonest_rate},
        {"seed", s.seed}}},
      {"loop",
       {{"strategy", al::to_string(l.strategy)},
        {"batch_accept_target", l.batch_accept_target},
        {"acceptance_rate_estimate", l.acceptance_rate_estimate},
        {"crowd",
         {{"acceptance_threshold", l.crowd.acceptance_threshold},
          {"relabel_policy", crowd::to_string(l.crowd.policy)},
          {"unit_cost_min", l.crowd.unit_cost_min},
          {"unit_cost_max", l.crowd.unit_cost_max},
          {"seed", l.crowd.seed}}},
        {"f1_switch", l.f1_switch},
        {"full_retrain_every", l.full_retrain_every},
        {"prune", {{"tau", l.prune.tau}, {"window", l.prune.window}}},
        {"bootstrap_category_size", l.bootstrap_category_size},
        {"bootstrap_min_per_mode", l.bootstrap_min_per_mode},
        {"bootstrap_action_share", l.bootstrap_action_share},
        {"max_iterations", l.max_iterations},
        {"label_budget", l.label_budget},
        {"validation_fraction", l.validation_fraction},
        {"incremental_epochs", l.incremental_epochs},
        {"train",
         {{"epochs", l.train.epochs},
          {"batch_size", l.train.batch_size},
          {"learning_rate", l.train.learning_rate},
          {"l2", l.train.l2},
          {"seed", l.train.seed}}},
        {"segmenter",
         {{"alpha", l.segmenter.alpha},
          {"tau_rel", l.segmenter.tau_rel},
          {"max_span", l.segmenter.max_span},
          {"pairs", l.segmenter.pairs == embedding::PairMode::kAdjacent ? "adjacent" : "all_pairs"}}},
        {"hash_bits", l.hash_bits},
        {"seed", l.seed}}},
      {"filter",
       {{"legal_keywords", c.filter.legal_keywords},
        {"min_keyword_hits", c.filter.min_keyword_hits},
        {"min_chars", c.filter.min_chars},
        {"min_stopword_ratio", c.filter.min_stopword_ratio}}},
      {"serve",
       {{"host", c.serve.host},
        {"port", c.serve.port},
        {"annotators", c.serve.annotators},
        {"lease_seconds", c.serve.lease_seconds}}},
  };
}

AppConfig from_json(const json& patch) {
  json j = to_json(AppConfig{});
  check_keys(j, patch, "");
  j.merge_patch(patch);
  // merge_patch drops keys patched with null; put optional leaves back
  for (auto key : {"metadata", "truth"}) {
    if (!j["paths"].contains(key)) j["paths"][key] = nullptr;
  }
  if (!j["simulated"].contains("fixed_accuracy")) j["simulated"]["fixed_accuracy"] = nullptr;

  AppConfig c;
  try {
    const auto& p = j.at("paths");
    c.paths.corpus_dir = p.at("corpus_dir").get<std::string>();
    c.paths.metadata = read_opt_path(p.at("metadata"));
    c.paths.vectors = p.at("vectors").get<std::string>();
    c.paths.truth = read_opt_path(p.at("truth"));
    c.paths.out_dir = p.at("out_dir").get<std::string>();

    c.categories.clear();
    for (const auto& k : j.at("categories")) c.categories.push_back(category_from(k.get<std::string>()));
    c.source = source_from(j.at("source").get<std::string>());
    c.replay_noise = j.at("replay_noise").get<double>();

    const auto& s = j.at("simulated");
    c.simulated.pool_size = s.at("pool_size").get<std::size_t>();
    c.simulated.accuracy_alpha = s.at("accuracy_alpha").get<double>();
    c.simulated.accuracy_beta = s.at("accuracy_beta").get<double>();
    if (!s.at("fixed_accuracy").is_null()) c.simulated.fixed_accuracy = s.at("fixed_accuracy").get<double>();
    c.simulated.dishonest_rate = s.at("dishonest_rate").get<double>();
    c.simulated.seed = s.at("seed").get<std::uint64_t>();

    const auto& l = j.at("loop");
    auto& o = c.loop;
    o.strategy = al::strategy_from(l.at("strategy").get<std::string>());
    o.batch_accept_target = l.at("batch_accept_target").get<std::size_t>();
    o.acceptance_rate_estimate = l.at("acceptance_rate_estimate").get<double>();
    const auto& cr = l.at("crowd");
    o.crowd.acceptance_threshold = cr.at("acceptance_threshold").get<double>();
    o.crowd.policy = crowd::relabel_policy_from(cr.at("relabel_policy").get<std::string>());
    o.crowd.unit_cost_min = cr.at("unit_cost_min").get<double>();
    o.crowd.unit_cost_max = cr.at("unit_cost_max").get<double>();
    o.crowd.seed = cr.at("seed").get<std::uint64_t>();
    o.f1_switch = l.at("f1_switch").get<double>();
    o.full_retrain_every = l.at("full_retrain_every").get<std::size_t>();
    o.prune.tau = l.at("prune").at("tau").get<double>();
    o.prune.window = l.at("prune").at("window").get<std::size_t>();
    o.bootstrap_category_size = l.at("bootstrap_category_size").get<std::size_t>();
    o.bootstrap_min_per_mode = l.at("bootstrap_min_per_mode").get<std::size_t>();
    o.bootstrap_action_share = l.at("bootstrap_action_share").get<double>();
    o.max_iterations = l.at("max_iterations").get<std::size_t>();
    o.label_budget = l.at("label_budget").get<std::size_t>();
    o.validation_fraction = l.at("validation_fraction").get<double>();
    o.incremental_epochs = l.at("incremental_epochs").get<std::size_t>();
    const auto& t = l.at("train");
    o.train.epochs = t.at("epochs").get<std::size_t>();
    o.train.batch_size = t.at("batch_size").get<std::size_t>();
    o.train.learning_rate = t.at("learning_rate").get<double>();
    o.train.l2 = t.at("l2").get<double>();
    o.train.seed = t.at("seed").get<std::uint64_t>();
    const auto& sg = l.at("segmenter");
    o.segmenter.alpha = sg.at("alpha").get<double>();
    o.segmenter.tau_rel = sg.at("tau_rel").get<double>();
    o.segmenter.max_span = sg.at("max_span").get<std::size_t>();
    const auto pairs = sg.at("pairs").get<std::string>();
    if (pairs == "adjacent") {
      o.segmenter.pairs = embedding::PairMode::kAdjacent;
    } else if (pairs == "all_pairs") {
      o.segmenter.pairs = embedding::PairMode::kAllPairs;
    } else {
      throw InvalidConfig("loop.segmenter.pairs must be adjacent|all_pairs");
    }
    o.hash_bits = l.at("hash_bits").get<unsigned>();
    o.seed = l.at("seed").get<std::uint64_t>();

    const auto& f = j.at("filter");
    c.filter.legal_keywords = f.at("legal_keywords").get<std::vector<std::string>>();
    c.filter.min_keyword_hits = f.at("min_keyword_hits").get<std::size_t>();
    c.filter.min_chars = f.at("min_chars").get<std::size_t>();
    c.filter.min_stopword_ratio = f.at("min_stopword_ratio").get<double>();

    const auto& sv = j.at("serve");
    c.serve.host = sv.at("host").get<std::string>();
    c.serve.port = sv.at("port").get<int>();
    c.serve.annotators = sv.at("annotators").get<std::size_t>();
    c.serve.lease_seconds = sv.at("lease_seconds").get<std::size_t>();
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  } catch (const ParseError& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

AppConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidConfig(path.string() + ": " + e.what());
  }
  return from_json(j);
}

void apply_override(AppConfig& c, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw InvalidConfig("override must look like key.path=value: " + std::string(assignment));
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json patch = json::object();
  json* node = &patch;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;

  json full = to_json(c);
  check_keys(full, patch, "");
  full.merge_patch(patch);
  c = from_json(full);
}

void validate(const AppConfig& c) {
  if (c.categories.empty()) throw InvalidConfig("categories must not be empty");
  if (c.replay_noise < 0.0 || c.replay_noise > 1.0) throw InvalidConfig("replay_noise must lie in [0,1]");
  if (c.serve.port < 0 || c.serve.port > 65535) throw InvalidConfig("serve.port out of range");
  if (c.serve.annotators == 0) throw InvalidConfig("serve.annotators must be positive");
  al::validate(c.loop);
}

}  // namespace policyal::config
