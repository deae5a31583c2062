// policyal command line: corpus ingest, bootstrapping, the active-learning
// loop, segmentation, reports, the live annotation service and experiments.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "policyal/alengine.hpp"
#include "policyal/analysis.hpp"
#include "policyal/config.hpp"
#include "policyal/corpus.hpp"
#include "policyal/error.hpp"
#include "policyal/experiments.hpp"
#include "policyal/log.hpp"
#include "policyal/segmenter.hpp"
#include "policyal/service.hpp"
#include "policyal/sources.hpp"
#include "policyal/synthetic.hpp"
#include "policyal/textmodel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace policyal;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

config::AppConfig load_config(const Common& c) {
  config::AppConfig cfg = c.config_path.empty() ? config::AppConfig{} : config::load(c.config_path);
  for (const auto& o : c.overrides) config::apply_override(cfg, o);
  return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "JSON config file");
  cmd->add_option("-s,--set", c.overrides, "override, e.g. loop.strategy=margin");
}

std::vector<corpus::Policy> load_policies(const config::AppConfig& cfg) {
  auto docs = corpus::load_corpus_dir(cfg.paths.corpus_dir, cfg.paths.metadata);
  auto res = corpus::ingest(docs, cfg.filter);
  log::info("ingested " + std::to_string(res.policies.size()) + " policies, rejected " +
            std::to_string(res.rejected.size()));
  return std::move(res.policies);
}

std::shared_ptr<const embedding::WordVectorTable> load_table(const config::AppConfig& cfg) {
  return std::make_shared<const embedding::WordVectorTable>(embedding::load_vectors(cfg.paths.vectors));
}

std::shared_ptr<const crowd::GroundTruth> load_truth(const config::AppConfig& cfg) {
  if (!cfg.paths.truth) throw InvalidConfig("paths.truth is required for simulated and replay sources");
  return std::make_shared<const crowd::GroundTruth>(crowd::GroundTruth::load(*cfg.paths.truth));
}

std::unique_ptr<crowd::AnnotatorSource> offline_source(const config::AppConfig& cfg) {
  switch (cfg.source) {
    case config::SourceKind::kSimulated:
      return std::make_unique<crowd::SimulatedSource>(load_truth(cfg), cfg.simulated);
    case config::SourceKind::kReplay:
      return std::make_unique<crowd::ReplaySource>(load_truth(cfg), cfg.replay_noise,
                                                   cfg.simulated.pool_size, cfg.simulated.seed);
    case config::SourceKind::kLive:
      break;
  }
  throw InvalidConfig("the live source is only available through 'serve'");
}

void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path bootstrap_path(const config::AppConfig& cfg, DataCategory cat, const char* kind) {
  return cfg.paths.out_dir / "bootstrap" / (std::string(to_string(cat)) + "_" + kind + ".jsonl");
}

// ---------------------------------------------------------------------------

int cmd_synth(const fs::path& out, std::size_t policies, std::uint64_t seed, double noise) {
  synthetic::CorpusConfig cc;
  cc.policies = policies;
  cc.seed = seed;
  auto gen = synthetic::generate_corpus(cc);
  const auto corpus_dir = out / "corpus";
  fs::create_directories(corpus_dir);
  std::ofstream meta(out / "metadata.jsonl");
  for (const auto& d : gen.documents) {
    std::ofstream(corpus_dir / (d.doc_id + ".txt")) << d.text;
    if (d.source_meta) {
      const auto& m = *d.source_meta;
      meta << json{{"doc_id", d.doc_id},
                   {"app_category", m.app_category},
                   {"downloads", m.downloads},
                   {"rating", m.rating ? json(*m.rating) : json(nullptr)},
                   {"review_count", m.review_count}}
                  .dump()
           << '\n';
    }
  }
  embedding::save_vectors(synthetic::build_vectors(gen.documents), out / "vectors.txt");
  crowd::save_labels(gen.truth, out / "truth.jsonl");

  config::AppConfig cfg;
  cfg.paths.corpus_dir = fs::absolute(corpus_dir);
  cfg.paths.metadata = fs::absolute(out / "metadata.jsonl");
  cfg.paths.vectors = fs::absolute(out / "vectors.txt");
  cfg.paths.truth = fs::absolute(out / "truth.jsonl");
  cfg.paths.out_dir = fs::absolute(out / "run");
  cfg.source = config::SourceKind::kReplay;
  cfg.replay_noise = noise;
  // a small corpus cannot feed the full-size bootstrap
  cfg.loop.bootstrap_category_size = 200;
  cfg.loop.bootstrap_min_per_mode = 3;
  cfg.loop.max_iterations = 10;
  cfg.loop.hash_bits = 14;
  write_json(config::to_json(cfg), out / "config.json");
  std::cout << "wrote " << gen.documents.size() << " policies and " << gen.truth.size()
            << " truth labels to " << out.string() << '\n';
  return 0;
}

int cmd_ingest(const config::AppConfig& cfg) {
  auto docs = corpus::load_corpus_dir(cfg.paths.corpus_dir, cfg.paths.metadata);
  auto res = corpus::ingest(docs, cfg.filter);
  fs::create_directories(cfg.paths.out_dir);
  std::ofstream out(cfg.paths.out_dir / "ingest.jsonl");
  for (const auto& p : res.policies) {
    out << json{{"doc_id", p.doc_id}, {"kept", true}, {"sentences", p.sentences.size()},
                {"gates", p.filter_trace}}
               .dump()
        << '\n';
  }
  for (const auto& [id, why] : res.rejected) {
    out << json{{"doc_id", id}, {"kept", false}, {"reason", corpus::to_string(why)}}.dump() << '\n';
  }
  std::cout << "kept " << res.policies.size() << ", rejected " << res.rejected.size() << '\n';
  return 0;
}

int cmd_bootstrap(const config::AppConfig& cfg) {
  auto policies = load_policies(cfg);
  auto table = load_table(cfg);
  auto source = offline_source(cfg);
  crowd::CostLedger ledger;
  crowd::LabelingSession session(*source, ledger, cfg.loop.crowd);
  for (auto cat : cfg.categories) {
    auto b = al::run_bootstraps(policies, cat, table, session, cfg.loop);
    fs::create_directories(cfg.paths.out_dir / "bootstrap");
    crowd::save_labels(b.category, bootstrap_path(cfg, cat, "category"));
    crowd::save_labels(b.action, bootstrap_path(cfg, cat, "action"));
    std::cout << to_string(cat) << ": " << b.category.size() << " sentence labels, " << b.action.size()
              << " segment labels\n";
  }
  ledger.save(cfg.paths.out_dir / "bootstrap" / "ledger.jsonl");
  return 0;
}

void save_result(const config::AppConfig& cfg, const al::CategoryResult& r) {
  const auto models = cfg.paths.out_dir / "models";
  fs::create_directories(models);
  const std::string cat(to_string(r.category));
  textmodel::save_model(*r.category_model, models / (cat + "_category.json"));
  for (auto a : kAllActions) {
    textmodel::save_model(*r.action_models[index_of(a)], models / (cat + "_" + std::string(to_string(a)) + ".json"));
  }
  al::write_trace(r.trace, cfg.paths.out_dir / ("trace_" + cat + ".jsonl"));
}

std::vector<crowd::SegmentLabel> run_categories(const config::AppConfig& cfg,
                                                std::span<const corpus::Policy> policies,
                                                std::shared_ptr<const embedding::WordVectorTable> table,
                                                crowd::LabelingSession& session, bool reuse_bootstrap) {
  std::vector<crowd::SegmentLabel> all;
  for (auto cat : cfg.categories) {
    al::Bootstrap b;
    if (reuse_bootstrap && fs::exists(bootstrap_path(cfg, cat, "category"))) {
      b.category = crowd::load_labels(bootstrap_path(cfg, cat, "category"));
      b.action = crowd::load_labels(bootstrap_path(cfg, cat, "action"));
      log::info("reusing bootstrap labels for " + std::string(to_string(cat)));
    } else {
      b = al::run_bootstraps(policies, cat, table, session, cfg.loop);
    }
    auto r = al::run_loop(policies, cat, table, session, b, cfg.loop);
    save_result(cfg, r);
    std::cout << to_string(cat) << ": " << r.trace.size() << " iterations, " << r.labels.size()
              << " labels, stop: " << r.stop_reason << '\n';
    all.insert(all.end(), r.labels.begin(), r.labels.end());
  }
  return all;
}

void write_run_outputs(const config::AppConfig& cfg, std::span<const crowd::SegmentLabel> labels,
                       const crowd::CostLedger& ledger) {
  fs::create_directories(cfg.paths.out_dir);
  crowd::save_labels(labels, cfg.paths.out_dir / "labels.jsonl");
  ledger.save(cfg.paths.out_dir / "ledger.jsonl");
  const auto s = ledger.snapshot();
  std::cout << "spend $" << s.total_spend << ", accepted " << s.accepted_labels << ", wasted "
            << s.wasted_requests;
  if (auto cpa = s.cost_per_accepted()) std::cout << ", $" << *cpa << " per accepted label";
  std::cout << '\n';
}

int cmd_run(const config::AppConfig& cfg, bool reuse_bootstrap) {
  auto policies = load_policies(cfg);
  auto table = load_table(cfg);
  auto source = offline_source(cfg);
  crowd::CostLedger ledger;
  crowd::LabelingSession session(*source, ledger, cfg.loop.crowd);
  auto labels = run_categories(cfg, policies, table, session, reuse_bootstrap);
  write_run_outputs(cfg, labels, ledger);
  return 0;
}

int cmd_segment(const config::AppConfig& cfg, const fs::path& model_path, const std::string& category,
                const fs::path& out) {
  auto policies = load_policies(cfg);
  auto table = load_table(cfg);
  auto model = textmodel::load_model(model_path, table);
  auto segs = segmenter::segment_corpus(policies, category_from(category), model, *table, cfg.loop.segmenter);
  segmenter::save_segments(segs, out);
  std::cout << segs.size() << " segments written to " << out.string() << '\n';
  return 0;
}

int cmd_report(const fs::path& labels_path, const std::optional<fs::path>& metadata, const fs::path& out) {
  auto labels = crowd::load_labels(labels_path);
  std::map<std::string, corpus::SourceMeta> meta;
  if (metadata) {
    for (auto& [id, m] : corpus::load_metadata(*metadata)) meta[id] = std::move(m);
  }
  auto report = analysis::corpus_stats(labels, meta);
  analysis::write_report(report, out);

  fs::create_directories(out);
  std::ofstream conflicts(out / "conflicts.jsonl");
  std::size_t n = 0;
  for (const auto& [doc, doc_labels] : analysis::group_by_document(labels)) {
    for (const auto& c : analysis::detect_conflicts(doc_labels)) {
      json modes = json::array();
      for (auto m : c.modes) modes.push_back(to_string(m));
      conflicts << json{{"doc_id", c.doc_id},
                        {"category", to_string(c.category)},
                        {"action", to_string(c.action)},
                        {"modes", modes},
                        {"segments", c.segment_keys},
                        {"note", c.note}}
                       .dump()
                << '\n';
      ++n;
    }
  }
  std::cout << analysis::to_csv(report.by_category) << n << " intra-document conflicts\n";
  return 0;
}

std::atomic<bool> g_stop{false};

int cmd_serve(const config::AppConfig& cfg, bool stay) {
  auto policies = load_policies(cfg);
  auto table = load_table(cfg);
  std::vector<std::string> ids;
  const crowd::AnnotatorPool pool(cfg.serve.annotators);
  for (std::size_t i = 0; i < pool.size(); ++i) ids.push_back(pool.id(i));

  service::QueueConfig qc;
  qc.lease = std::chrono::seconds(cfg.serve.lease_seconds);
  service::AnnotationQueue queue(ids, qc);
  crowd::CostLedger ledger;
  service::Service svc(queue, ledger);
  service::LiveQueueSource source(queue);
  service::HttpServer http(svc);
  const int port = http.start(cfg.serve.host, cfg.serve.port);
  std::cout << "serving on http://" << cfg.serve.host << ":" << port << " with " << ids.size()
            << " annotators (w0000..)\n"
            << std::flush;

  auto loop_cfg = cfg;
  loop_cfg.loop.on_trace = [&svc](const al::TraceRow& row) { svc.push_trace(row); };
  crowd::LabelingSession session(source, ledger, loop_cfg.loop.crowd);

  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  std::atomic<bool> done{false};
  std::thread worker([&] {
    try {
      auto labels = run_categories(loop_cfg, policies, table, session, true);
      write_run_outputs(loop_cfg, labels, ledger);
    } catch (const std::exception& e) {
      log::warn(std::string("loop stopped: ") + e.what());
    }
    done = true;
  });
  while (!g_stop && (!done || stay)) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  queue.close();
  worker.join();
  http.stop();
  return 0;
}

int cmd_experiment(const std::string& name, std::uint64_t seed, const std::optional<fs::path>& out) {
  json result;
  if (name == "savings") {
    experiments::SavingsConfig sc;
    auto r = experiments::al_savings_experiment(sc);
    json seeds = json::array();
    for (const auto& s : r.per_seed) {
      seeds.push_back({{"seed", s.seed},
                       {"random_labels", s.random.labels},
                       {"random_reached", s.random.reached},
                       {"al_labels", s.active.labels},
                       {"al_reached", s.active.reached},
                       {"save", s.save},
                       {"m_end", s.active.m_end}});
    }
    result = {{"n_nonal", r.report.n_nonal}, {"n_al", r.report.n_al},   {"al_save", r.report.al_save},
              {"m_start", r.report.m_start}, {"m_end", r.report.m_end}, {"al_wins", r.report.al_wins},
              {"seeds", seeds}};
  } else if (name == "pool") {
    experiments::FixtureConfig fc;
    fc.seed = seed;
    auto r = experiments::pool_size_experiment(fc, 200, 40, 150, seed);
    result = {{"large_pool", r.large_size},          {"small_pool", r.small_size},
              {"large_m_end", r.large.m_end},        {"small_m_end", r.small.m_end},
              {"large_curve", r.large.minority_curve}, {"small_curve", r.small.minority_curve}};
  } else if (name == "sweep") {
    experiments::SweepConfig sc;
    sc.seed = seed;
    json rows = json::array();
    for (const auto& p : experiments::at_sweep(sc)) {
      rows.push_back({{"threshold", p.threshold},
                      {"acceptance_rate", p.acceptance_rate},
                      {"accepted_sample", p.accepted_sample},
                      {"surveys", p.surveys},
                      {"accepted", p.accepted},
                      {"wrong", p.wrong},
                      {"f1", p.f1}});
    }
    result = rows;
  } else if (name == "rsr") {
    synthetic::CorpusConfig cc;
    cc.seed = seed;
    auto gen = synthetic::generate_corpus(cc);
    auto truth = std::make_shared<const crowd::GroundTruth>(gen.truth);
    std::vector<segmenter::Segment> segs;
    for (const auto& l : gen.truth) segs.push_back(l.segment);
    crowd::SimulatedSource sim(truth, {});
    crowd::AmbiguitySource amb(truth);
    auto a = experiments::rsr_experiment(sim, segs, 0.8, seed);
    auto b = experiments::rsr_experiment(amb, segs, 0.8, seed);
    auto row = [](const experiments::RsrResult& r) {
      return json{{"surveys", r.surveys},
                  {"rejected_first", r.rejected_first},
                  {"recovered", r.recovered},
                  {"rsr", r.rsr() ? json(*r.rsr()) : json(nullptr)}};
    };
    result = {{"simulated", row(a)}, {"ambiguity", row(b)}};
  } else if (name == "cost") {
    json rows = json::array();
    for (double rate : {0.70, 0.73, 0.75, 0.80, 0.85}) {
      auto p = experiments::cost_point(rate, 0.16, 0.25, 20, 30, seed);
      rows.push_back({{"rate", rate},
                      {"spend", p.ledger.total_spend},
                      {"accepted", p.ledger.accepted_labels},
                      {"wasted", p.ledger.wasted_requests},
                      {"cost_per_accepted", p.cost_per_accepted}});
    }
    result = rows;
  } else {
    throw InvalidArgument("unknown experiment '" + name + "' (savings|pool|sweep|rsr|cost)");
  }
  if (out) {
    write_json(result, *out);
  } else {
    std::cout << result.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-learning privacy policy labeling pipeline"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  Common common;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus, vectors, truth labels and config");
  std::string synth_out = "synth";
  std::size_t synth_n = 80;
  std::uint64_t synth_seed = 5;
  double synth_noise = 0.05;
  synth->add_option("-o,--out", synth_out, "output directory");
  synth->add_option("-n,--policies", synth_n, "number of policies");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--noise", synth_noise, "replay annotator noise in the written config");

  auto* ingest = app.add_subcommand("ingest", "filter and sentence-split the corpus");
  add_common(ingest, common);

  auto* boot = app.add_subcommand("bootstrap", "collect bootstrap labels");
  add_common(boot, common);

  auto* run = app.add_subcommand("run", "run the active-learning loop (simulated or replay annotators)");
  add_common(run, common);
  bool reuse = false;
  run->add_flag("--reuse-bootstrap", reuse, "load bootstrap labels written by 'bootstrap'");

  auto* seg = app.add_subcommand("segment", "segment the corpus with a trained category model");
  add_common(seg, common);
  std::string seg_model, seg_cat = "contact", seg_out = "segments.jsonl";
  seg->add_option("-m,--model", seg_model, "category model checkpoint")->required();
  seg->add_option("--category", seg_cat, "data category");
  seg->add_option("-o,--out", seg_out, "output JSONL");

  auto* rep = app.add_subcommand("report", "corpus statistics and intra-document conflicts");
  std::string rep_labels, rep_out = "report";
  std::optional<std::string> rep_meta;
  rep->add_option("-l,--labels", rep_labels, "label JSONL")->required();
  rep->add_option("--metadata", rep_meta, "app metadata JSONL");
  rep->add_option("-o,--out", rep_out, "output directory");

  auto* serve = app.add_subcommand("serve", "run the loop with live annotators behind the HTTP queue");
  add_common(serve, common);
  bool stay = false;
  serve->add_flag("--stay", stay, "keep serving after the loop finishes");

  auto* exp = app.add_subcommand("experiment", "sensitivity experiments");
  std::string exp_name;
  std::uint64_t exp_seed = 1;
  std::optional<std::string> exp_out;
  exp->add_option("name", exp_name, "savings|pool|sweep|rsr|cost")->required();
  exp->add_option("--seed", exp_seed, "seed");
  exp->add_option("-o,--out", exp_out, "write JSON here");

  CLI11_PARSE(app, argc, argv);
  if (verbose) log::set_min_level(log::Level::kDebug);

  try {
    if (*synth) return cmd_synth(synth_out, synth_n, synth_seed, synth_noise);
    if (*ingest) return cmd_ingest(load_config(common));
    if (*boot) return cmd_bootstrap(load_config(common));
    if (*run) return cmd_run(load_config(common), reuse);
    if (*seg) return cmd_segment(load_config(common), seg_model, seg_cat, seg_out);
    if (*rep) {
      std::optional<fs::path> meta;
      if (rep_meta) meta = *rep_meta;
      return cmd_report(rep_labels, meta, rep_out);
    }
    if (*serve) return cmd_serve(load_config(common), stay);
    if (*exp) {
      std::optional<fs::path> out;
      if (exp_out) out = *exp_out;
      return cmd_experiment(exp_name, exp_seed, out);
    }
  } catch (const policyal::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
