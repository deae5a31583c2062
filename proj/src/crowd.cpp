#include "policyal/crowd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "policyal/error.hpp"
#include "policyal/text.hpp"

namespace policyal::crowd {

using nlohmann::json;

std::size_t option_of(const Answers& a, std::size_t q) {
  if (q == 0) return a.relevant ? 1 : 0;
  return index_of(a.modes.at(q - 1));
}

std::size_t option_count(std::size_t q) { return q == 0 ? 2 : kNumModes; }

void set_option(Answers& a, std::size_t q, std::size_t option) {
  if (option >= option_count(q)) throw InvalidArgument("option out of range");
  if (q == 0) {
    a.relevant = option == 1;
  } else {
    a.modes.at(q - 1) = kAllModes[option];
  }
}

Tally tally(std::span<const std::size_t> votes, std::size_t options) {
  std::vector<std::size_t> counts(options, 0);
  for (auto v : votes) {
    if (v >= options) throw InvalidArgument("vote out of range");
    ++counts[v];
  }
  Tally t;
  t.total = votes.size();
  for (std::size_t o = 0; o < options; ++o) {
    if (counts[o] > t.modal_count) {
      t.modal = o;
      t.modal_count = counts[o];
    }
  }
  return t;
}

bool meets_threshold(double agreement, double threshold) { return agreement >= threshold - 1e-9; }

AggregationOutcome aggregate(std::span<const Annotation> annotations, double acceptance_threshold) {
  if (annotations.empty()) throw InvalidArgument("aggregate: no annotations");
  AggregationOutcome out;
  out.survey_id = annotations.front().survey_id;
  out.pooled_count = annotations.size();
  for (const auto& a : annotations) {
    if (a.survey_id != out.survey_id) throw InvalidArgument("aggregate: mixed survey ids");
    if (!a.answers.honest) out.voided = true;
  }
  if (out.voided) return out;

  std::vector<std::size_t> votes(annotations.size());
  double sum = 0.0;
  out.min_agreement = 1.0;
  for (std::size_t q = 0; q < kNumQuestions; ++q) {
    for (std::size_t i = 0; i < annotations.size(); ++i) votes[i] = option_of(annotations[i].answers, q);
    out.questions[q] = tally(votes, option_count(q));
    set_option(out.consensus, q, out.questions[q].modal);
    const double ag = out.questions[q].agreement();
    out.min_agreement = std::min(out.min_agreement, ag);
    sum += ag;
  }
  out.avg_agreement = sum / static_cast<double>(kNumQuestions);
  out.accepted = meets_threshold(out.min_agreement, acceptance_threshold);
  return out;
}

std::string_view to_string(RelabelPolicy p) {
  return p == RelabelPolicy::kIncremental ? "incremental" : "label_and_discard";
}

RelabelPolicy relabel_policy_from(std::string_view s) {
  if (s == "incremental") return RelabelPolicy::kIncremental;
  if (s == "label_and_discard") return RelabelPolicy::kLabelAndDiscard;
  throw ParseError("unknown relabel policy: " + std::string(s));
}

std::string_view to_string(DirectiveKind d) {
  switch (d) {
    case DirectiveKind::kAccept: return "accept";
    case DirectiveKind::kDiscardWasted: return "discard_wasted";
    case DirectiveKind::kRerequest: return "rerequest";
    case DirectiveKind::kMarkAmbiguous: return "mark_ambiguous";
    case DirectiveKind::kRepublish: return "republish";
  }
  return "?";
}

Directive apply_relabel_policy(const AggregationOutcome& outcome, RelabelPolicy policy,
                               std::size_t attempt) {
  if (attempt == 0 || attempt > kMaxAttempts) throw InvalidArgument("attempt must be in 1..3");
  if (outcome.voided) return {DirectiveKind::kRepublish, kAnnotationsPerRequest};
  if (outcome.accepted) return {DirectiveKind::kAccept, 0};
  if (policy == RelabelPolicy::kLabelAndDiscard) return {DirectiveKind::kDiscardWasted, 0};
  if (attempt < kMaxAttempts) return {DirectiveKind::kRerequest, kAnnotationsPerRequest};
  return {DirectiveKind::kMarkAmbiguous, 0};
}

std::size_t plan_requests(std::size_t target_accepted, double estimated_acceptance_rate) {
  if (!(estimated_acceptance_rate > 0.0) || estimated_acceptance_rate > 1.0) {
    throw InvalidArgument("acceptance rate must be in (0, 1]");
  }
  const double r = static_cast<double>(target_accepted) / estimated_acceptance_rate;
  return static_cast<std::size_t>(std::ceil(r - 1e-9));
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kAnnotated: return "annotated";
    case Provenance::kSystemAmbiguous: return "system_ambiguous";
    case Provenance::kBootstrap: return "bootstrap";
    case Provenance::kReplay: return "replay";
  }
  return "?";
}

Provenance provenance_from(std::string_view s) {
  if (s == "annotated") return Provenance::kAnnotated;
  if (s == "system_ambiguous") return Provenance::kSystemAmbiguous;
  if (s == "bootstrap") return Provenance::kBootstrap;
  if (s == "replay") return Provenance::kReplay;
  throw ParseError("unknown provenance: " + std::string(s));
}

bool SegmentLabel::any_mode(ActionMode m) const {
  return std::find(modes.begin(), modes.end(), m) != modes.end();
}

SegmentLabel make_label(const segmenter::Segment& segment, DataCategory category, bool relevant,
                        const ModeTriple& modes, Provenance provenance) {
  SegmentLabel l;
  l.segment = segment;
  l.category = category;
  l.relevant = relevant;
  l.modes = relevant ? modes : kAllNotMentioned;
  l.provenance = provenance;
  return l;
}

std::vector<SegmentLabel> trainable_only(std::span<const SegmentLabel> labels) {
  std::vector<SegmentLabel> out;
  for (const auto& l : labels) {
    if (l.trainable()) out.push_back(l);
  }
  return out;
}

namespace {

json label_json(const SegmentLabel& l) {
  json j{{"doc_id", l.segment.doc_id},
         {"category", to_string(l.category)},
         {"first_index", l.segment.first_index},
         {"last_index", l.segment.last_index},
         {"seed_index", l.segment.seed_index},
         {"text", l.segment.text},
         {"relevant", l.relevant},
         {"provenance", to_string(l.provenance)}};
  for (auto a : kAllActions) j[std::string(to_string(a))] = to_string(l.modes[index_of(a)]);
  return j;
}

SegmentLabel label_from_json(const json& j) {
  segmenter::Segment s;
  s.doc_id = j.at("doc_id").get<std::string>();
  s.category = category_from(j.at("category").get<std::string>());
  s.first_index = j.at("first_index").get<std::size_t>();
  s.last_index = j.value("last_index", s.first_index);
  s.seed_index = j.value("seed_index", s.first_index);
  s.text = j.value("text", std::string());
  if (s.last_index < s.first_index) throw ParseError("last_index before first_index");
  ModeTriple modes = kAllNotMentioned;
  for (auto a : kAllActions) {
    const std::string key(to_string(a));
    if (j.contains(key)) modes[index_of(a)] = mode_from(j.at(key).get<std::string>());
  }
  return make_label(s, s.category, j.at("relevant").get<bool>(), modes,
                    provenance_from(j.value("provenance", std::string("replay"))));
}

}  // namespace

void save_labels(std::span<const SegmentLabel> labels, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& l : labels) out << label_json(l).dump() << '\n';
}

std::vector<SegmentLabel> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<SegmentLabel> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(label_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace policyal::crowd
