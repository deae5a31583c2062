#include "policyal/sources.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "policyal/error.hpp"

namespace policyal::crowd {

namespace {

std::vector<std::string> numbered_ids(std::size_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  char buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "w%04zu", i);
    ids.emplace_back(buf);
  }
  return ids;
}

double draw_beta(double a, double b, std::mt19937_64& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

}  // namespace

AnnotatorPool::AnnotatorPool(std::size_t size) : AnnotatorPool(numbered_ids(size)) {}

AnnotatorPool::AnnotatorPool(std::vector<std::string> ids) : ids_(std::move(ids)) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw InvalidArgument("duplicate annotator id " + ids_[i]);
  }
}

std::vector<std::size_t> AnnotatorPool::draw(const std::string& survey_id, std::size_t n,
                                             std::mt19937_64& rng) {
  std::lock_guard<std::mutex> lock(mu_);
  auto& seen = seen_[survey_id];
  std::vector<std::size_t> fresh;
  fresh.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!seen.count(i)) fresh.push_back(i);
  }
  if (fresh.size() < n) {
    throw PoolExhausted("only " + std::to_string(fresh.size()) + " annotators left for survey " +
                        survey_id);
  }
  // partial Fisher-Yates
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, fresh.size() - 1);
    std::swap(fresh[i], fresh[pick(rng)]);
  }
  fresh.resize(n);
  for (auto i : fresh) seen.insert(i);
  return fresh;
}

bool AnnotatorPool::qualified(const std::string& annotator_id) const {
  return index_.count(annotator_id) > 0;
}

bool AnnotatorPool::has_seen(const std::string& annotator_id, const std::string& survey_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = index_.find(annotator_id);
  if (it == index_.end()) return false;
  auto s = seen_.find(survey_id);
  return s != seen_.end() && s->second.count(it->second) > 0;
}

void AnnotatorPool::mark_seen(const std::string& annotator_id, const std::string& survey_id) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = index_.find(annotator_id);
  if (it == index_.end()) throw InvalidArgument("unknown annotator " + annotator_id);
  seen_[survey_id].insert(it->second);
}

GroundTruth::GroundTruth(std::span<const SegmentLabel> labels) {
  for (const auto& l : labels) add(l);
}

GroundTruth GroundTruth::load(const std::filesystem::path& path) {
  const auto labels = load_labels(path);
  return GroundTruth(labels);
}

void GroundTruth::add(const SegmentLabel& label) {
  by_doc_[{label.segment.doc_id, label.category}].push_back(label);
  ++count_;
}

Answers GroundTruth::truth(const segmenter::Segment& segment, DataCategory category) const {
  Answers a;
  auto it = by_doc_.find({segment.doc_id, category});
  if (it == by_doc_.end()) return a;
  const SegmentLabel* best = nullptr;
  for (const auto& l : it->second) {
    if (!l.relevant) continue;
    const bool overlaps =
        l.segment.first_index <= segment.last_index && segment.first_index <= l.segment.last_index;
    if (!overlaps) continue;
    if (l.segment.contains(segment.seed_index)) {
      best = &l;
      break;
    }
    if (!best || l.segment.first_index < best->segment.first_index) best = &l;
  }
  if (best) {
    a.relevant = true;
    a.modes = best->modes;
  }
  return a;
}

bool GroundTruth::mentions(const std::string& doc_id, DataCategory category) const {
  auto it = by_doc_.find({doc_id, category});
  if (it == by_doc_.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [](const SegmentLabel& l) { return l.relevant; });
}

std::size_t noisy_answer(std::size_t correct, std::size_t options, double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < p) return correct;
  std::uniform_int_distribution<std::size_t> wrong(0, options - 2);
  const std::size_t w = wrong(rng);
  return w >= correct ? w + 1 : w;
}

Answers noisy_answers(const Answers& truth, double p, std::mt19937_64& rng) {
  Answers a = truth;
  for (std::size_t q = 0; q < kNumQuestions; ++q) {
    set_option(a, q, noisy_answer(option_of(truth, q), option_count(q), p, rng));
  }
  return a;
}

SimulatedSource::SimulatedSource(std::shared_ptr<const GroundTruth> truth, SimulatedConfig config)
    : truth_(std::move(truth)), config_(config), pool_(config.pool_size), rng_(config.seed) {
  if (!truth_) throw InvalidArgument("simulated source needs ground truth");
  if (config_.fixed_accuracy && (*config_.fixed_accuracy < 0.0 || *config_.fixed_accuracy > 1.0)) {
    throw InvalidConfig("fixed_accuracy must be in [0, 1]");
  }
  if (config_.accuracy_alpha <= 0.0 || config_.accuracy_beta <= 0.0) {
    throw InvalidConfig("accuracy Beta parameters must be positive");
  }
  accuracy_.resize(pool_.size());
  for (auto& a : accuracy_) {
    a = config_.fixed_accuracy ? *config_.fixed_accuracy
                               : draw_beta(config_.accuracy_alpha, config_.accuracy_beta, rng_);
  }
}

std::vector<Annotation> SimulatedSource::collect(const Survey& survey, std::size_t n) {
  const Answers truth = truth_->truth(survey.segment, survey.category);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Annotation> out;
  for (auto i : pool_.draw(survey.survey_id, n, rng_)) {
    Annotation a{survey.survey_id, pool_.id(i), noisy_answers(truth, accuracy_[i], rng_)};
    a.answers.honest = !(config_.dishonest_rate > 0.0 && u(rng_) < config_.dishonest_rate);
    out.push_back(std::move(a));
  }
  return out;
}

bool SimulatedSource::screen(const corpus::Policy& policy, DataCategory category) {
  return truth_->mentions(policy.doc_id, category);
}

ReplaySource::ReplaySource(std::shared_ptr<const GroundTruth> truth, double noise,
                           std::size_t pool_size, std::uint64_t seed)
    : truth_(std::move(truth)), noise_(noise), pool_(pool_size), rng_(seed) {
  if (!truth_) throw InvalidArgument("replay source needs ground truth");
  if (noise_ < 0.0 || noise_ > 1.0) throw InvalidConfig("noise must be in [0, 1]");
}

std::vector<Annotation> ReplaySource::collect(const Survey& survey, std::size_t n) {
  const Answers truth = truth_->truth(survey.segment, survey.category);
  std::vector<Annotation> out;
  for (auto i : pool_.draw(survey.survey_id, n, rng_)) {
    Answers a = noise_ > 0.0 ? noisy_answers(truth, 1.0 - noise_, rng_) : truth;
    out.push_back({survey.survey_id, pool_.id(i), a});
  }
  return out;
}

bool ReplaySource::screen(const corpus::Policy& policy, DataCategory category) {
  return truth_->mentions(policy.doc_id, category);
}

AmbiguitySource::AmbiguitySource(std::shared_ptr<const GroundTruth> truth, double spread,
                                 std::size_t pool_size, std::uint64_t seed)
    : truth_(std::move(truth)), spread_(spread), pool_(pool_size), rng_(seed) {
  if (spread_ < 0.0) throw InvalidConfig("spread must be >= 0");
}

const std::vector<std::vector<double>>& AmbiguitySource::distribution(const Survey& survey) {
  const std::string key = survey.segment.key();
  auto it = dists_.find(key);
  if (it != dists_.end()) return it->second;
  std::uniform_real_distribution<double> u(0.0, spread_);
  std::vector<std::vector<double>> d(kNumQuestions);
  for (std::size_t q = 0; q < kNumQuestions; ++q) {
    d[q].resize(option_count(q));
    for (auto& w : d[q]) w = 1.0 + u(rng_);
  }
  return dists_.emplace(key, std::move(d)).first->second;
}

std::vector<Annotation> AmbiguitySource::collect(const Survey& survey, std::size_t n) {
  const auto dist = distribution(survey);
  std::vector<Annotation> out;
  for (auto i : pool_.draw(survey.survey_id, n, rng_)) {
    Answers a;
    for (std::size_t q = 0; q < kNumQuestions; ++q) {
      std::discrete_distribution<std::size_t> pick(dist[q].begin(), dist[q].end());
      set_option(a, q, pick(rng_));
    }
    out.push_back({survey.survey_id, pool_.id(i), a});
  }
  return out;
}

bool AmbiguitySource::screen(const corpus::Policy& policy, DataCategory category) {
  return truth_ ? truth_->mentions(policy.doc_id, category) : true;
}

DeterministicSplitSource::DeterministicSplitSource(std::shared_ptr<const GroundTruth> truth,
                                                   std::size_t pool_size)
    : truth_(std::move(truth)), pool_(pool_size) {
  if (!truth_) throw InvalidArgument("split source needs ground truth");
}

std::vector<Annotation> DeterministicSplitSource::collect(const Survey& survey, std::size_t n) {
  const Answers truth = truth_->truth(survey.segment, survey.category);
  Answers other = truth;
  for (std::size_t q = 1; q < kNumQuestions; ++q) {
    set_option(other, q, (option_of(truth, q) + 1) % option_count(q));
  }
  std::vector<Annotation> out;
  const auto picked = pool_.draw(survey.survey_id, n, rng_);
  for (std::size_t j = 0; j < picked.size(); ++j) {
    out.push_back({survey.survey_id, pool_.id(picked[j]), j % 5 < 3 ? truth : other});
  }
  return out;
}

bool DeterministicSplitSource::screen(const corpus::Policy& policy, DataCategory category) {
  return truth_->mentions(policy.doc_id, category);
}

void validate(const CrowdConfig& config) {
  if (!(config.acceptance_threshold > 0.0) || config.acceptance_threshold > 1.0) {
    throw InvalidConfig("acceptance_threshold must be in (0, 1]");
  }
  if (config.unit_cost_min < 0.0 || config.unit_cost_max < config.unit_cost_min) {
    throw InvalidConfig("unit cost range must satisfy 0 <= min <= max");
  }
}

LabelingSession::LabelingSession(AnnotatorSource& source, CostLedger& ledger, CrowdConfig config)
    : source_(source), ledger_(ledger), config_(config), rng_(config.seed) {
  validate(config_);
}

Survey LabelingSession::issue(const segmenter::Segment& segment) {
  Survey s;
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06zu", next_id_++);
  s.survey_id = buf;
  s.segment = segment;
  s.category = segment.category;
  s.attempt = 1;
  std::uniform_real_distribution<double> cost(config_.unit_cost_min, config_.unit_cost_max);
  s.unit_cost = config_.unit_cost_min == config_.unit_cost_max ? config_.unit_cost_min : cost(rng_);
  return s;
}

Resolution LabelingSession::resolve(Survey survey, Provenance on_accept) {
  Resolution r;
  std::vector<Annotation> pooled;
  survey.attempt = 1;
  while (true) {
    ledger_.issued(survey.survey_id, survey.attempt, kAnnotationsPerRequest);
    auto batch = source_.collect(survey, kAnnotationsPerRequest);
    for (const auto& a : batch) {
      ledger_.annotated(survey.survey_id, a.annotator_id, survey.attempt, survey.unit_cost);
    }
    r.annotations += batch.size();

    std::vector<Annotation> candidate = pooled;
    candidate.insert(candidate.end(), batch.begin(), batch.end());
    r.last = aggregate(candidate, config_.acceptance_threshold);
    ledger_.aggregated(survey.survey_id, survey.attempt, candidate.size());
    const Directive d = apply_relabel_policy(r.last, config_.policy, survey.attempt);

    switch (d.kind) {
      case DirectiveKind::kRepublish:
        ledger_.voided(survey.survey_id, survey.attempt);
        if (++r.republished > kMaxRepublish) {
          ledger_.wasted(survey.survey_id, survey.attempt);
          r.final = DirectiveKind::kDiscardWasted;
          r.attempts = survey.attempt;
          r.survey = survey;
          return r;
        }
        continue;
      case DirectiveKind::kRerequest:
        pooled = std::move(candidate);
        ++survey.attempt;
        continue;
      case DirectiveKind::kAccept:
        ledger_.accepted(survey.survey_id, survey.attempt);
        r.label = make_label(survey.segment, survey.category, r.last.consensus.relevant,
                             r.last.consensus.modes, on_accept);
        break;
      case DirectiveKind::kDiscardWasted:
        ledger_.wasted(survey.survey_id, survey.attempt);
        break;
      case DirectiveKind::kMarkAmbiguous: {
        ledger_.ambiguous(survey.survey_id, survey.attempt);
        const bool rel = r.last.consensus.relevant;
        const ModeTriple amb = {ActionMode::kAmbiguous, ActionMode::kAmbiguous,
                                ActionMode::kAmbiguous};
        r.label = make_label(survey.segment, survey.category, rel, amb,
                             Provenance::kSystemAmbiguous);
        break;
      }
    }
    r.final = d.kind;
    r.attempts = survey.attempt;
    r.survey = survey;
    return r;
  }
}

Resolution LabelingSession::label(const segmenter::Segment& segment, Provenance on_accept) {
  return resolve(issue(segment), on_accept);
}

}  // namespace policyal::crowd
