#include "policyal/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "policyal/error.hpp"
#include "policyal/log.hpp"

namespace policyal::experiments {

using textmodel::FeatureVector;
using textmodel::LabeledFeatures;

std::size_t Fixture::minority_count() const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), std::size_t{1}));
}

namespace {

struct Draw {
  FeatureVector x;
  double score = 0.0;
};

Draw draw_item(const std::vector<double>& w, std::size_t per_item, std::mt19937_64& rng) {
  std::vector<std::uint32_t> toks;
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(w.size() - 1));
  while (toks.size() < per_item) {
    const auto t = pick(rng);
    if (std::find(toks.begin(), toks.end(), t) == toks.end()) toks.push_back(t);
  }
  std::sort(toks.begin(), toks.end());
  Draw d;
  const double v = 1.0 / std::sqrt(static_cast<double>(per_item));
  for (auto t : toks) {
    d.x.entries.emplace_back(t, v);
    d.score += w[t];
  }
  return d;
}

double minority_frac(std::span<const std::size_t> labels) {
  if (labels.empty()) return 0.0;
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), std::size_t{1}));
  return pos / static_cast<double>(labels.size());
}

textmodel::LogisticClassifier fit(const Fixture& f, std::span<const std::size_t> items,
                                  std::span<const std::size_t> labels,
                                  const textmodel::TrainConfig& cfg) {
  std::vector<LabeledFeatures> data(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) data[i] = {f.x[items[i]], labels[i]};
  return textmodel::train(textmodel::Featurizer(f.hash_bits), 2,
                          std::span<const LabeledFeatures>(data), cfg);
}

double validation_f1(const textmodel::LogisticClassifier& m, const Fixture& f) {
  return textmodel::evaluate(m, f.validation).balanced_f1;
}

unsigned bits_for(std::size_t n) {
  unsigned b = 1;
  while ((std::size_t{1} << b) < n) ++b;
  return b;
}

}  // namespace

Fixture make_fixture(const FixtureConfig& cfg) {
  if (cfg.items == 0 || cfg.vocab == 0) throw InvalidConfig("fixture needs items and vocab");
  if (cfg.tokens_per_item == 0 || cfg.tokens_per_item > cfg.vocab) {
    throw InvalidConfig("tokens_per_item must be in [1, vocab]");
  }
  if (!(cfg.minority > 0.0) || cfg.minority >= 0.5) throw InvalidConfig("minority must be in (0, 0.5)");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> w(cfg.vocab);
  for (auto& v : w) v = n01(rng);

  // Boundary from a large calibration sample; score std is sqrt(tokens).
  std::vector<double> calib(20000);
  for (auto& s : calib) s = draw_item(w, cfg.tokens_per_item, rng).score;
  std::sort(calib.begin(), calib.end());
  const double theta = calib[static_cast<std::size_t>((1.0 - cfg.minority) * static_cast<double>(calib.size()))];
  const double band = cfg.gap * std::sqrt(static_cast<double>(cfg.tokens_per_item));

  Fixture f;
  f.hash_bits = bits_for(cfg.vocab);
  const auto n_pos = static_cast<std::size_t>(std::llround(cfg.minority * static_cast<double>(cfg.items)));
  std::size_t pos = 0, neg = 0;
  std::size_t vpos = 0, vneg = 0;
  while (pos + neg < cfg.items || vpos + vneg < 2 * cfg.validation_per_class) {
    auto d = draw_item(w, cfg.tokens_per_item, rng);
    if (std::abs(d.score - theta) < band) continue;
    const std::size_t label = d.score > theta ? 1 : 0;
    if (label == 1 && pos < n_pos) {
      f.x.push_back(std::move(d.x));
      f.y.push_back(1);
      ++pos;
    } else if (label == 0 && neg < cfg.items - n_pos) {
      f.x.push_back(std::move(d.x));
      f.y.push_back(0);
      ++neg;
    } else if (label == 1 && vpos < cfg.validation_per_class) {
      f.validation.push_back({std::move(d.x), 1});
      ++vpos;
    } else if (label == 0 && vneg < cfg.validation_per_class) {
      f.validation.push_back({std::move(d.x), 0});
      ++vneg;
    }
  }
  // interleave classes so pool order carries no label signal
  std::vector<std::size_t> perm(f.x.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Fixture out;
  out.hash_bits = f.hash_bits;
  out.validation = std::move(f.validation);
  for (auto i : perm) {
    out.x.push_back(std::move(f.x[i]));
    out.y.push_back(f.y[i]);
  }
  return out;
}

std::vector<std::size_t> draw_bootstrap(const Fixture& f, std::size_t n, std::size_t min_minority,
                                        std::uint64_t seed) {
  if (n == 0 || n > f.size()) throw InvalidConfig("bootstrap size must be in [1, pool size]");
  if (min_minority > f.minority_count() || min_minority > n) {
    throw InvalidConfig("not enough minority items for the bootstrap");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(f.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> out(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n));
  std::size_t have = 0;
  for (auto i : out) have += f.y[i];
  // swap in minority items from the tail if needed
  for (std::size_t j = n; j < idx.size() && have < min_minority; ++j) {
    if (f.y[idx[j]] != 1) continue;
    for (auto& o : out) {
      if (f.y[o] == 0) {
        o = idx[j];
        ++have;
        break;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Fixture restrict_pool(const Fixture& f, std::span<const std::size_t> keep, std::size_t size,
                      std::uint64_t seed, std::vector<std::size_t>* bootstrap_out) {
  if (size < keep.size() || size > f.size()) throw InvalidConfig("pool size out of range");
  std::vector<char> taken(f.size(), 0);
  std::vector<std::size_t> chosen(keep.begin(), keep.end());
  for (auto i : keep) taken.at(i) = 1;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!taken[i]) rest.push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  chosen.insert(chosen.end(), rest.begin(),
                rest.begin() + static_cast<std::ptrdiff_t>(size - keep.size()));
  Fixture out;
  out.hash_bits = f.hash_bits;
  out.validation = f.validation;
  for (auto i : chosen) {
    out.x.push_back(f.x[i]);
    out.y.push_back(f.y[i]);
  }
  if (bootstrap_out) {
    bootstrap_out->resize(keep.size());
    std::iota(bootstrap_out->begin(), bootstrap_out->end(), 0);
  }
  return out;
}

ArmResult run_arm(const Fixture& f, std::span<const std::size_t> bootstrap, const ArmConfig& cfg,
                  std::uint64_t seed) {
  if (cfg.step == 0) throw InvalidConfig("step must be >= 1");
  if (bootstrap.empty()) throw InvalidArgument("arm needs a bootstrap");
  const std::size_t budget = cfg.label_budget == 0 ? f.size() : std::min(cfg.label_budget, f.size());
  std::mt19937_64 rng(seed);

  auto pool = al::make_pool(f.size());
  std::vector<std::size_t> items(bootstrap.begin(), bootstrap.end());
  std::vector<std::size_t> labels;
  for (auto i : items) {
    pool.at(i).consumed = true;
    labels.push_back(f.y[i]);
  }

  ArmResult r;
  r.m_start = minority_frac(labels);
  auto model = fit(f, items, labels, cfg.train);
  auto record = [&] {
    const double f1 = validation_f1(model, f);
    r.label_curve.push_back(items.size());
    r.f1_curve.push_back(f1);
    r.minority_curve.push_back(minority_frac(labels));
    return f1;
  };
  double f1 = record();
  auto done = [&] { return cfg.target_f1 && f1 >= *cfg.target_f1; };

  while (!done() && items.size() < budget) {
    const std::size_t k = std::min(cfg.step, budget - items.size());
    std::vector<std::size_t> picked;
    if (cfg.active) {
      try {
        picked = al::select_batch(pool, model.model(), f.x, cfg.strategy, k, cfg.prune);
      } catch (const PoolExhausted&) {
        r.exhausted = true;
        break;
      }
    } else {
      std::vector<std::size_t> free;
      for (const auto& e : pool) {
        if (!e.consumed) free.push_back(e.item);
      }
      if (free.empty()) {
        r.exhausted = true;
        break;
      }
      for (std::size_t j = 0; j < k && j < free.size(); ++j) {
        std::uniform_int_distribution<std::size_t> d(j, free.size() - 1);
        std::swap(free[j], free[d(rng)]);
        picked.push_back(free[j]);
        pool[free[j]].consumed = true;
      }
    }
    for (auto i : picked) {
      items.push_back(i);
      labels.push_back(f.y[i]);
    }
    model = fit(f, items, labels, cfg.train);
    f1 = record();
  }
  r.labels = items.size();
  r.reached = done();
  if (!r.reached && items.size() >= f.size()) r.exhausted = true;
  r.m_end = minority_frac(labels);
  return r;
}

SavingsResult al_savings_experiment(const SavingsConfig& cfg) {
  if (cfg.seeds.empty()) throw InvalidConfig("savings experiment needs at least one seed");
  SavingsResult res;
  res.report.name = "synthetic";
  double sum_random = 0.0, sum_active = 0.0, sum_start = 0.0, sum_end = 0.0;
  for (auto seed : cfg.seeds) {
    FixtureConfig fc = cfg.fixture;
    fc.seed = seed;
    const Fixture f = make_fixture(fc);
    const auto boot = draw_bootstrap(f, cfg.bootstrap, 1, seed + 1000);
    SavingsSeed s;
    s.seed = seed;
    ArmConfig random_cfg = cfg.arm;
    random_cfg.active = false;
    ArmConfig active_cfg = cfg.arm;
    active_cfg.active = true;
    s.random = run_arm(f, boot, random_cfg, seed + 2000);
    s.active = run_arm(f, boot, active_cfg, seed + 3000);
    s.save = analysis::al_save(static_cast<double>(s.random.labels), static_cast<double>(s.active.labels));
    log::info("savings seed " + std::to_string(seed) + ": random " + std::to_string(s.random.labels) +
              " active " + std::to_string(s.active.labels));
    sum_random += static_cast<double>(s.random.labels);
    sum_active += static_cast<double>(s.active.labels);
    sum_start += s.active.m_start;
    sum_end += s.active.m_end;
    res.report.exhausted_random += s.random.reached ? 0 : 1;
    res.report.exhausted_al += s.active.reached ? 0 : 1;
    res.report.al_wins += (s.random.reached && s.active.reached && s.save >= cfg.win_margin) ? 1 : 0;
    res.per_seed.push_back(std::move(s));
  }
  const double n = static_cast<double>(cfg.seeds.size());
  res.report.seeds = cfg.seeds.size();
  res.report.n_nonal = sum_random / n;
  res.report.n_al = sum_active / n;
  res.report.al_save = analysis::al_save(res.report.n_nonal, res.report.n_al);
  res.report.m_start = sum_start / n;
  res.report.m_end = sum_end / n;
  return res;
}

PoolSizeResult pool_size_experiment(const FixtureConfig& fc, std::size_t small_size,
                                    std::size_t bootstrap, std::size_t label_budget,
                                    std::uint64_t seed, ArmConfig arm) {
  const Fixture large = make_fixture(fc);
  if (small_size >= large.size()) throw InvalidConfig("small pool must be strictly smaller");
  const auto boot = draw_bootstrap(large, bootstrap, 1, seed);
  arm.active = true;
  arm.target_f1.reset();
  arm.label_budget = label_budget;

  PoolSizeResult r;
  r.large_size = large.size();
  r.small_size = small_size;
  r.large = run_arm(large, boot, arm, seed);
  std::vector<std::size_t> small_boot;
  const Fixture small = restrict_pool(large, boot, small_size, seed + 7, &small_boot);
  r.small = run_arm(small, small_boot, arm, seed);
  return r;
}

namespace {

// Ground truth for fixture items: item i is sentence i of document "fixture".
std::shared_ptr<crowd::GroundTruth> fixture_truth(const Fixture& f) {
  auto gt = std::make_shared<crowd::GroundTruth>();
  for (std::size_t i = 0; i < f.size(); ++i) {
    segmenter::Segment s;
    s.doc_id = "fixture";
    s.first_index = s.last_index = s.seed_index = i;
    ModeTriple m = kAllNotMentioned;
    m[0] = ActionMode::kAssert;
    gt->add(crowd::make_label(s, s.category, f.y[i] == 1, m, crowd::Provenance::kReplay));
  }
  return gt;
}

segmenter::Segment fixture_segment(std::size_t i) {
  segmenter::Segment s;
  s.doc_id = "fixture";
  s.first_index = s.last_index = s.seed_index = i;
  return s;
}

}  // namespace

std::vector<SweepPoint> at_sweep(const SweepConfig& cfg) {
  if (cfg.thresholds.empty()) throw InvalidConfig("at_sweep needs thresholds");
  FixtureConfig fc = cfg.fixture;
  fc.seed = cfg.seed;
  const Fixture f = make_fixture(fc);
  const auto truth = fixture_truth(f);
  std::vector<SweepPoint> out(cfg.thresholds.size());
  for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) out[t].threshold = cfg.thresholds[t];

  // Shared votes.
  {
    crowd::SimulatedConfig sc;
    sc.fixed_accuracy = cfg.accuracy;
    sc.seed = cfg.seed + 11;
    crowd::SimulatedSource src(truth, sc);
    std::mt19937_64 rng(cfg.seed + 5);
    std::uniform_int_distribution<std::size_t> pick(0, f.size() - 1);
    for (std::size_t k = 0; k < cfg.vote_sample; ++k) {
      crowd::Survey s;
      s.survey_id = "v" + std::to_string(k);
      s.segment = fixture_segment(pick(rng));
      const auto votes = src.collect(s, crowd::kAnnotationsPerRequest);
      for (auto& p : out) {
        ++p.votes_sample;
        if (crowd::aggregate(votes, p.threshold).accepted) ++p.accepted_sample;
      }
    }
    for (auto& p : out) {
      p.acceptance_rate = p.votes_sample == 0 ? 0.0
                                              : static_cast<double>(p.accepted_sample) /
                                                    static_cast<double>(p.votes_sample);
    }
  }

  // Downstream active arm per threshold, crowd-labeled.
  const auto boot = draw_bootstrap(f, cfg.bootstrap, 1, cfg.seed + 21);
  const textmodel::TrainConfig train;
  for (auto& p : out) {
    crowd::SimulatedConfig sc;
    sc.fixed_accuracy = cfg.accuracy;
    sc.seed = cfg.seed + 31;
    crowd::SimulatedSource src(truth, sc);
    crowd::CostLedger ledger;
    crowd::CrowdConfig cc;
    cc.acceptance_threshold = p.threshold;
    cc.policy = crowd::RelabelPolicy::kLabelAndDiscard;
    cc.seed = cfg.seed + 41;
    crowd::LabelingSession session(src, ledger, cc);

    auto pool = al::make_pool(f.size());
    std::vector<std::size_t> items(boot.begin(), boot.end());
    std::vector<std::size_t> labels;
    for (auto i : items) {
      pool[i].consumed = true;
      labels.push_back(f.y[i]);
    }
    auto model = fit(f, items, labels, train);
    while (p.surveys < cfg.survey_budget) {
      const std::size_t k = std::min(cfg.step, cfg.survey_budget - p.surveys);
      std::vector<std::size_t> picked;
      try {
        picked = al::select_batch(pool, model.model(), f.x, al::Strategy::kUncertainty, k, {});
      } catch (const PoolExhausted&) {
        break;
      }
      for (auto i : picked) {
        ++p.surveys;
        const auto r = session.label(fixture_segment(i));
        if (!r.accepted()) continue;
        const std::size_t y = r.label->relevant ? 1 : 0;
        ++p.accepted;
        if (y != f.y[i]) ++p.wrong;
        items.push_back(i);
        labels.push_back(y);
      }
      model = fit(f, items, labels, train);
    }
    p.f1 = validation_f1(model, f);
  }
  return out;
}

std::optional<double> RsrResult::rsr() const {
  if (rejected_first == 0) return std::nullopt;
  return static_cast<double>(recovered) / static_cast<double>(rejected_first);
}

RsrResult rsr_experiment(crowd::AnnotatorSource& source, std::span<const segmenter::Segment> segments,
                         double acceptance_threshold, std::uint64_t seed) {
  crowd::CostLedger ledger;
  crowd::CrowdConfig cc;
  cc.acceptance_threshold = acceptance_threshold;
  cc.policy = crowd::RelabelPolicy::kIncremental;
  cc.seed = seed;
  crowd::LabelingSession session(source, ledger, cc);
  RsrResult r;
  for (const auto& seg : segments) {
    const auto res = session.label(seg);
    ++r.surveys;
    if (res.republished > 0) continue;  // honesty voids are not relabeling
    if (res.attempts > 1) {
      ++r.rejected_first;
      if (res.accepted()) ++r.recovered;
    }
  }
  return r;
}

CalibratedSource::CalibratedSource(double rate, std::uint64_t seed, std::size_t pool_size)
    : rate_(rate), pool_(pool_size), rng_(seed) {
  if (rate_ < 0.0 || rate_ > 1.0) throw InvalidConfig("rate must be in [0, 1]");
}

std::vector<crowd::Annotation> CalibratedSource::collect(const crowd::Survey& survey, std::size_t n) {
  auto it = agrees_.find(survey.survey_id);
  if (it == agrees_.end()) {
    std::bernoulli_distribution agree(rate_);
    it = agrees_.emplace(survey.survey_id, agree(rng_)).first;
  }
  crowd::Answers base;  // irrelevant, all not_mentioned
  crowd::Answers other = base;
  other.modes[0] = ActionMode::kAssert;
  std::vector<crowd::Annotation> out;
  const auto picked = pool_.draw(survey.survey_id, n, rng_);
  for (std::size_t j = 0; j < picked.size(); ++j) {
    const bool dissent = !it->second && j % 5 >= 3;
    out.push_back({survey.survey_id, pool_.id(picked[j]), dissent ? other : base});
  }
  return out;
}

CostPoint cost_point(double rate, double unit_cost_min, double unit_cost_max,
                     std::size_t iterations, std::size_t target, std::uint64_t seed) {
  CalibratedSource src(rate, seed);
  crowd::CostLedger ledger;
  crowd::CrowdConfig cc;
  cc.policy = crowd::RelabelPolicy::kLabelAndDiscard;
  cc.unit_cost_min = unit_cost_min;
  cc.unit_cost_max = unit_cost_max;
  cc.seed = seed + 1;
  crowd::LabelingSession session(src, ledger, cc);
  const std::size_t per_iter = crowd::plan_requests(target, rate);
  const auto segs = dummy_segments(per_iter * iterations);
  for (const auto& s : segs) session.label(s);
  CostPoint p;
  p.rate = rate;
  p.unit_cost_min = unit_cost_min;
  p.unit_cost_max = unit_cost_max;
  p.ledger = ledger.snapshot();
  p.cost_per_accepted = p.ledger.cost_per_accepted().value_or(0.0);
  return p;
}

std::vector<segmenter::Segment> dummy_segments(std::size_t n, const std::string& doc_id) {
  std::vector<segmenter::Segment> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].doc_id = doc_id;
    out[i].first_index = out[i].last_index = out[i].seed_index = i;
  }
  return out;
}

}  // namespace policyal::experiments
