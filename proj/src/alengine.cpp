#include "policyal/alengine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"
#include "policyal/error.hpp"
#include "policyal/kernels.hpp"
#include "policyal/log.hpp"

namespace policyal::al {

using textmodel::LabeledFeatures;
using textmodel::LabeledText;

// ---------------------------------------------------------------------------
// Query scores

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kUncertainty: return "uncertainty";
    case Strategy::kMargin: return "margin";
    case Strategy::kEntropy: return "entropy";
  }
  return "?";
}

Strategy strategy_from(std::string_view s) {
  if (s == "uncertainty") return Strategy::kUncertainty;
  if (s == "margin") return Strategy::kMargin;
  if (s == "entropy") return Strategy::kEntropy;
  throw ParseError("unknown query strategy: " + std::string(s));
}

double least_confidence(std::span<const double> dist) {
  return 1.0 - *std::max_element(dist.begin(), dist.end());
}

double score_unchecked(std::span<const double> dist, Strategy strategy) {
  switch (strategy) {
    case Strategy::kUncertainty: return least_confidence(dist);
    case Strategy::kMargin: {
      double first = -1.0, second = -1.0;
      for (double p : dist) {
        if (p > first) {
          second = first;
          first = p;
        } else if (p > second) {
          second = p;
        }
      }
      return -(first - second);
    }
    case Strategy::kEntropy: {
      double h = 0.0;
      for (double p : dist) {
        if (p > 0.0) h -= p * std::log(p);
      }
      return h;
    }
  }
  return 0.0;
}

double query_score(std::span<const double> dist, Strategy strategy) {
  if (dist.size() < 2) throw InvalidArgument("distribution needs at least two classes");
  double sum = 0.0;
  for (double p : dist) {
    if (!std::isfinite(p) || p < -1e-12 || p > 1.0 + 1e-12) {
      throw InvalidArgument("probability outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw InvalidArgument("probabilities do not sum to 1");
  return score_unchecked(dist, strategy);
}

// ---------------------------------------------------------------------------
// Pool selection

std::vector<PoolEntry> make_pool(std::size_t n) {
  std::vector<PoolEntry> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i].item = i;
  return pool;
}

namespace {

bool active(const PoolEntry& e) { return !e.pruned && !e.consumed; }

std::vector<std::size_t> active_positions(std::span<const PoolEntry> pool) {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (active(pool[i])) pos.push_back(i);
  }
  return pos;
}

}  // namespace

std::size_t active_count(std::span<const PoolEntry> pool) {
  return static_cast<std::size_t>(std::count_if(pool.begin(), pool.end(), active));
}

std::vector<std::size_t> select_scored(std::vector<PoolEntry>& pool, std::span<const double> score,
                                       std::span<const double> uncertainty, std::size_t k,
                                       const PruneConfig& prune) {
  if (k == 0) throw InvalidArgument("batch size k must be >= 1");
  const auto pos = active_positions(pool);
  if (pos.empty()) throw PoolExhausted("no unpruned entries left in the pool");
  if (score.size() != pos.size() || uncertainty.size() != pos.size()) {
    throw InvalidArgument("one score per active pool entry expected");
  }

  std::vector<std::size_t> candidates;  // indices into pos
  for (std::size_t j = 0; j < pos.size(); ++j) {
    auto& e = pool[pos[j]];
    if (prune.window > 0) {
      e.history.push_back(uncertainty[j]);
      while (e.history.size() > prune.window) e.history.pop_front();
      if (e.history.size() == prune.window &&
          std::all_of(e.history.begin(), e.history.end(), [&](double u) { return u < prune.tau; })) {
        e.pruned = true;
        continue;
      }
    }
    candidates.push_back(j);
  }
  if (candidates.empty()) throw PoolExhausted("every remaining pool entry was pruned");

  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  candidates.resize(std::min(k, candidates.size()));
  std::vector<std::size_t> items;
  items.reserve(candidates.size());
  for (auto j : candidates) {
    pool[pos[j]].consumed = true;
    items.push_back(pool[pos[j]].item);
  }
  return items;
}

std::vector<std::size_t> select_batch(std::vector<PoolEntry>& pool,
                                      const textmodel::LinearModel& model,
                                      std::span<const textmodel::FeatureVector> features,
                                      Strategy strategy, std::size_t k, const PruneConfig& prune) {
  if (k == 0) throw InvalidArgument("batch size k must be >= 1");
  const auto pos = active_positions(pool);
  if (pos.empty()) throw PoolExhausted("no unpruned entries left in the pool");
  std::vector<std::size_t> which(pos.size());
  for (std::size_t j = 0; j < pos.size(); ++j) {
    which[j] = pool[pos[j]].item;
    if (which[j] >= features.size()) throw InvalidArgument("pool item without features");
  }
  const auto scored = kernels::score_pool(model, features, which, strategy);
  return select_scored(pool, scored.score, scored.uncertainty, k, prune);
}

// ---------------------------------------------------------------------------
// Bootstraps

std::vector<crowd::SegmentLabel> bootstrap_category(std::span<const corpus::Policy> policies,
                                                    DataCategory category,
                                                    crowd::LabelingSession& session,
                                                    std::size_t size, std::mt19937_64& rng) {
  if (size == 0) throw InvalidConfig("bootstrap size must be >= 1");
  if (policies.empty()) throw InvalidArgument("bootstrap needs a non-empty corpus");

  std::vector<std::size_t> order(policies.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::pair<std::size_t, std::size_t>> sentences;
  for (auto p : order) {
    if (!session.source().screen(policies[p], category)) continue;
    for (std::size_t s = 0; s < policies[p].sentences.size(); ++s) sentences.emplace_back(p, s);
  }
  if (sentences.empty()) {
    throw PoolExhausted("no policy screened positive for category " + std::string(to_string(category)));
  }
  std::shuffle(sentences.begin(), sentences.end(), rng);

  std::vector<crowd::SegmentLabel> out;
  for (const auto& [p, s] : sentences) {
    if (out.size() == size) break;
    auto seg = segmenter::make_segment(policies[p], category, s, s, s);
    auto r = session.label(seg, crowd::Provenance::kBootstrap);
    if (r.accepted()) out.push_back(*r.label);
  }
  if (out.size() < size) {
    log::warn("category bootstrap for " + std::string(to_string(category)) + " stopped at " +
              std::to_string(out.size()) + " of " + std::to_string(size) + " labels");
  }
  return out;
}

namespace {

bool cells_full(const ActionBootstrap& b, std::size_t min_per_mode) {
  for (const auto& row : b.cells) {
    for (auto c : row) {
      if (c < min_per_mode) return false;
    }
  }
  return true;
}

}  // namespace

ActionBootstrap bootstrap_action(std::span<const segmenter::Segment> stream,
                                 crowd::LabelingSession& session, std::size_t min_per_mode,
                                 std::size_t max_consumed) {
  if (min_per_mode == 0) throw InvalidConfig("min_per_mode must be >= 1");
  ActionBootstrap b;
  for (const auto& seg : stream) {
    if (cells_full(b, min_per_mode) || b.consumed >= max_consumed) break;
    ++b.consumed;
    auto r = session.label(seg, crowd::Provenance::kBootstrap);
    if (!r.accepted()) continue;
    for (auto a : kAllActions) ++b.cells[index_of(a)][index_of(r.label->modes[index_of(a)])];
    b.labels.push_back(*r.label);
  }
  b.complete = cells_full(b, min_per_mode);
  if (!b.complete) {
    std::string missing;
    for (auto a : kAllActions) {
      for (auto m : kAllModes) {
        if (b.cells[index_of(a)][index_of(m)] < min_per_mode) {
          missing += " " + std::string(to_string(a)) + "/" + std::string(to_string(m));
        }
      }
    }
    log::warn("action bootstrap: stopped after " + std::to_string(b.consumed) +
              " segments; short cells:" + missing);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Loop

void validate(const LoopConfig& c) {
  auto fraction = [](double v, const char* name) {
    if (!(v > 0.0) || v > 1.0) throw InvalidConfig(std::string(name) + " must be in (0, 1]");
  };
  fraction(c.acceptance_rate_estimate, "acceptance_rate_estimate");
  fraction(c.f1_switch, "f1_switch");
  fraction(c.validation_fraction, "validation_fraction");
  fraction(c.bootstrap_action_share, "bootstrap_action_share");
  crowd::validate(c.crowd);
  if (c.batch_accept_target == 0) throw InvalidConfig("batch_accept_target must be >= 1");
  if (c.full_retrain_every == 0) throw InvalidConfig("full_retrain_every must be >= 1");
  if (c.bootstrap_category_size == 0) throw InvalidConfig("bootstrap_category_size must be >= 1");
  if (c.bootstrap_min_per_mode == 0) throw InvalidConfig("bootstrap_min_per_mode must be >= 1");
  if (c.max_iterations == 0) throw InvalidConfig("max_iterations must be >= 1");
  if (c.prune.tau < 0.0) throw InvalidConfig("prune tau must be >= 0");
  if (c.hash_bits < 4 || c.hash_bits > 26) throw InvalidConfig("hash_bits must be in [4, 26]");
}

namespace {

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_indices(
    std::span<const std::size_t> labels, double fraction, std::mt19937_64& rng) {
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<std::size_t> keep, held;
  for (auto& [cls, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    // a lone example stays in training
    const auto n_held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    const std::size_t cut = idx.size() > 1 ? std::min(n_held, idx.size() - 1) : 0;
    held.insert(held.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
    keep.insert(keep.end(), idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  std::sort(held.begin(), held.end());
  return {keep, held};
}

LabeledText category_example(const crowd::SegmentLabel& l) {
  return {l.segment.text, l.relevant ? kRelevant : kIrrelevant};
}

LabeledText action_example(const crowd::SegmentLabel& l, std::size_t action) {
  return {l.segment.text, index_of(l.modes[action])};
}

std::vector<LabeledFeatures> featurize_labeled(const textmodel::Featurizer& f,
                                               std::span<const LabeledText> data) {
  std::vector<std::string> texts;
  texts.reserve(data.size());
  for (const auto& d : data) texts.push_back(d.text);
  auto xs = kernels::featurize(f, texts);
  std::vector<LabeledFeatures> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = {std::move(xs[i]), data[i].label};
  return out;
}

double minority_fraction(std::span<const LabeledText> data) {
  if (data.empty()) return 0.0;
  std::size_t pos = 0;
  for (const auto& d : data) pos += d.label == kRelevant ? 1 : 0;
  return static_cast<double>(std::min(pos, data.size() - pos)) / static_cast<double>(data.size());
}

struct SegmentPool {
  std::vector<segmenter::Segment> segments;
  std::vector<textmodel::FeatureVector> features;
  std::vector<PoolEntry> entries;
};

SegmentPool build_segment_pool(std::span<const corpus::Policy> policies, DataCategory category,
                               const textmodel::LogisticClassifier& model,
                               const embedding::WordVectorTable& table,
                               const std::set<std::string>& labeled, const LoopConfig& cfg) {
  SegmentPool sp;
  for (auto& s : segmenter::segment_corpus(policies, category, model, table, cfg.segmenter)) {
    if (!labeled.count(s.key())) sp.segments.push_back(std::move(s));
  }
  std::vector<std::string> texts;
  texts.reserve(sp.segments.size());
  for (const auto& s : sp.segments) texts.push_back(s.text);
  sp.features = kernels::featurize(model.featurizer(), texts);
  sp.entries = make_pool(sp.segments.size());
  return sp;
}

}  // namespace

std::pair<std::vector<LabeledText>, std::vector<LabeledText>> stratified_split(
    std::span<const LabeledText> data, double fraction, std::mt19937_64& rng) {
  std::vector<std::size_t> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data[i].label;
  const auto [keep, held] = stratified_indices(labels, fraction, rng);
  std::pair<std::vector<LabeledText>, std::vector<LabeledText>> out;
  for (auto i : keep) out.first.push_back(data[i]);
  for (auto i : held) out.second.push_back(data[i]);
  return out;
}

Bootstrap run_bootstraps(std::span<const corpus::Policy> policies, DataCategory category,
                         std::shared_ptr<const embedding::WordVectorTable> table,
                         crowd::LabelingSession& session, const LoopConfig& config) {
  validate(config);
  if (!table) throw InvalidArgument("bootstraps need a word-vector table");
  std::mt19937_64 rng(config.seed * 0x9e3779b97f4a7c15ULL + index_of(category));
  Bootstrap b;
  b.category = bootstrap_category(policies, category, session, config.bootstrap_category_size, rng);

  std::vector<LabeledText> data;
  for (const auto& l : b.category) data.push_back(category_example(l));
  const textmodel::Featurizer feat(config.hash_bits, table);
  const auto model = textmodel::train(feat, 2, std::span<const LabeledText>(data), config.train);

  auto stream = segmenter::segment_corpus(policies, category, model, *table, config.segmenter);
  std::shuffle(stream.begin(), stream.end(), rng);
  const auto cap = std::max<std::size_t>(
      1, static_cast<std::size_t>(config.bootstrap_action_share * static_cast<double>(stream.size())));
  b.action = bootstrap_action(stream, session, config.bootstrap_min_per_mode, cap).labels;
  return b;
}

CategoryResult run_loop(std::span<const corpus::Policy> policies, DataCategory category,
                        std::shared_ptr<const embedding::WordVectorTable> table,
                        crowd::LabelingSession& session, const Bootstrap& bootstrap,
                        const LoopConfig& cfg) {
  validate(cfg);
  if (!table) throw InvalidArgument("the loop needs a word-vector table");
  if (bootstrap.category.empty()) throw InvalidArgument("empty category bootstrap");
  if (bootstrap.action.empty()) throw InvalidArgument("empty action bootstrap");

  std::mt19937_64 rng(cfg.seed * 0xbf58476d1ce4e5b9ULL + index_of(category));
  const textmodel::Featurizer feat(cfg.hash_bits, table);
  textmodel::TrainConfig incremental = cfg.train;
  incremental.epochs = cfg.incremental_epochs;

  CategoryResult res;
  res.category = category;
  std::set<std::string> labeled;

  // Category data, with a stratified validation split.
  std::vector<LabeledText> cat_all;
  for (const auto& l : bootstrap.category) {
    if (!l.trainable()) continue;
    cat_all.push_back(category_example(l));
    labeled.insert(l.segment.key());
    res.labels.push_back(l);
  }
  auto [cat_train, cat_val] = stratified_split(cat_all, cfg.validation_fraction, rng);

  // Action data: split once, stratified on the collect_use mode.
  std::vector<crowd::SegmentLabel> act_labels;
  for (const auto& l : bootstrap.action) {
    if (!l.trainable()) continue;
    act_labels.push_back(l);
    labeled.insert(l.segment.key());
    res.labels.push_back(l);
  }
  std::vector<std::size_t> strat(act_labels.size());
  for (std::size_t i = 0; i < act_labels.size(); ++i) strat[i] = index_of(act_labels[i].modes[0]);
  const auto [act_keep, act_held] = stratified_indices(strat, cfg.validation_fraction, rng);
  std::array<std::vector<LabeledText>, kNumActions> act_train, act_val;
  for (std::size_t a = 0; a < kNumActions; ++a) {
    for (auto i : act_keep) act_train[a].push_back(action_example(act_labels[i], a));
    for (auto i : act_held) act_val[a].push_back(action_example(act_labels[i], a));
  }

  auto retrain_all = [&] {
    res.category_model = std::make_shared<textmodel::LogisticClassifier>(
        textmodel::train(feat, 2, std::span<const LabeledText>(cat_train), cfg.train));
    for (std::size_t a = 0; a < kNumActions; ++a) {
      res.action_models[a] = std::make_shared<textmodel::LogisticClassifier>(
          textmodel::train(feat, kNumModes, std::span<const LabeledText>(act_train[a]), cfg.train));
    }
  };
  retrain_all();

  // Sentence pool (Category Model priority).
  std::vector<std::pair<std::size_t, std::size_t>> sent_refs;
  std::vector<std::string> sent_texts;
  for (std::size_t p = 0; p < policies.size(); ++p) {
    for (std::size_t s = 0; s < policies[p].sentences.size(); ++s) {
      sent_refs.emplace_back(p, s);
      sent_texts.push_back(policies[p].sentences[s].text);
    }
  }
  const auto sent_features = kernels::featurize(feat, sent_texts);
  auto sent_pool = make_pool(sent_refs.size());
  for (std::size_t i = 0; i < sent_refs.size(); ++i) {
    const auto& [p, s] = sent_refs[i];
    if (labeled.count(segmenter::make_segment(policies[p], category, s, s, s).key())) {
      sent_pool[i].consumed = true;
    }
  }

  SegmentPool seg_pool =
      build_segment_pool(policies, category, *res.category_model, *table, labeled, cfg);

  bool action_priority = false;
  bool switched = false;  // the switch happens once; an empty segment pool falls back for good
  const std::size_t requests = crowd::plan_requests(cfg.batch_accept_target,
                                                    cfg.acceptance_rate_estimate);
  std::size_t accepted_in_loop = 0;

  for (std::size_t iter = 1; iter <= cfg.max_iterations; ++iter) {
    if (cfg.label_budget > 0 && accepted_in_loop >= cfg.label_budget) {
      res.stop_reason = "label budget reached";
      break;
    }
    TraceRow row;
    row.iter = iter;
    row.category = category;
    row.model = action_priority ? "action" : "category";
    row.requested = requests;

    // Choose the batch.
    std::vector<segmenter::Segment> batch;
    const bool segments_left = std::any_of(seg_pool.entries.begin(), seg_pool.entries.end(),
                                           [](const PoolEntry& e) { return !e.pruned && !e.consumed; });
    if (action_priority && !segments_left) {
      log::info("segment pool exhausted; back to category priority");
      action_priority = false;
      row.model = "category";
    }
    try {
      if (!action_priority) {
        for (auto i : select_batch(sent_pool, res.category_model->model(), sent_features,
                                   cfg.strategy, requests, cfg.prune)) {
          const auto& [p, s] = sent_refs[i];
          batch.push_back(segmenter::make_segment(policies[p], category, s, s, s));
        }
      } else {
        std::vector<std::size_t> which;
        for (const auto& e : seg_pool.entries) {
          if (!e.pruned && !e.consumed) which.push_back(e.item);
        }
        std::vector<double> score(which.size(), -1e300), unc(which.size(), 0.0);
        for (const auto& m : res.action_models) {
          const auto s = kernels::score_pool(m->model(), seg_pool.features, which, cfg.strategy);
          for (std::size_t j = 0; j < which.size(); ++j) {
            score[j] = std::max(score[j], s.score[j]);
            unc[j] = std::max(unc[j], s.uncertainty[j]);
          }
        }
        for (auto i : select_scored(seg_pool.entries, score, unc, requests, cfg.prune)) {
          batch.push_back(seg_pool.segments[i]);
        }
      }
    } catch (const PoolExhausted& e) {
      res.stop_reason = std::string("pool exhausted: ") + e.what();
      break;
    }

    // Label through the crowd.
    std::vector<crowd::SegmentLabel> fresh;
    for (const auto& seg : batch) {
      labeled.insert(seg.key());
      auto r = session.label(seg);
      if (!r.label) continue;
      if (!r.label->trainable()) {
        ++res.system_ambiguous;
        continue;
      }
      fresh.push_back(*r.label);
    }
    accepted_in_loop += fresh.size();

    std::vector<LabeledText> cat_new;
    std::array<std::vector<LabeledText>, kNumActions> act_new;
    for (const auto& l : fresh) {
      res.labels.push_back(l);
      cat_new.push_back(category_example(l));
      for (std::size_t a = 0; a < kNumActions; ++a) act_new[a].push_back(action_example(l, a));
    }
    cat_train.insert(cat_train.end(), cat_new.begin(), cat_new.end());
    for (std::size_t a = 0; a < kNumActions; ++a) {
      act_train[a].insert(act_train[a].end(), act_new[a].begin(), act_new[a].end());
    }

    // Update models.
    row.full_retrain = iter % cfg.full_retrain_every == 0;
    if (row.full_retrain) {
      retrain_all();
      seg_pool = build_segment_pool(policies, category, *res.category_model, *table, labeled, cfg);
    } else {
      // warm start over everything seen so far; updating on the new batch
      // alone makes the model forget the bootstrap
      textmodel::continue_training(*res.category_model, featurize_labeled(feat, cat_train), incremental);
      for (std::size_t a = 0; a < kNumActions; ++a) {
        textmodel::continue_training(*res.action_models[a], featurize_labeled(feat, act_train[a]),
                                     incremental);
      }
    }

    // Metrics.
    if (!cat_val.empty()) row.f1_val = textmodel::evaluate(*res.category_model, cat_val).balanced_f1;
    if (!act_held.empty()) {
      double sum = 0.0;
      for (std::size_t a = 0; a < kNumActions; ++a) {
        sum += textmodel::evaluate(*res.action_models[a], act_val[a]).balanced_f1;
      }
      row.f1_action = sum / static_cast<double>(kNumActions);
    }
    row.minority_frac = minority_fraction(cat_train);
    const auto snap = session.ledger().snapshot();
    row.accepted = snap.accepted_labels;
    row.wasted = snap.wasted_requests;
    row.spend = snap.total_spend;
    row.pool_active = action_priority ? active_count(seg_pool.entries) : active_count(sent_pool);
    log::info(trace_line(row));
    if (cfg.on_trace) cfg.on_trace(row);
    res.trace.push_back(row);

    if (row.f1_val >= cfg.f1_switch && !switched) {
      action_priority = true;
      switched = true;
    }
  }
  if (res.stop_reason.empty()) res.stop_reason = "iteration limit";
  return res;
}

std::string trace_line(const TraceRow& r) {
  const nlohmann::json j{{"iter", r.iter},
                         {"category", to_string(r.category)},
                         {"model", r.model},
                         {"f1_val", r.f1_val},
                         {"f1_action", r.f1_action},
                         {"minority_frac", r.minority_frac},
                         {"requested", r.requested},
                         {"accepted", r.accepted},
                         {"wasted", r.wasted},
                         {"spend", r.spend},
                         {"full_retrain", r.full_retrain},
                         {"pool_active", r.pool_active}};
  return j.dump();
}

void write_trace(std::span<const TraceRow> trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : trace) out << trace_line(r) << '\n';
}

}  // namespace policyal::al
