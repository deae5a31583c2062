#include "policyal/segmenter.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "policyal/error.hpp"
#include "policyal/log.hpp"
#include "policyal/text.hpp"

namespace policyal::segmenter {

using nlohmann::json;

std::string Segment::key() const {
  return doc_id + ":" + std::string(to_string(category)) + ":" + std::to_string(first_index) + "-" +
         std::to_string(last_index);
}

std::string join_sentences(const corpus::Policy& policy, std::size_t first, std::size_t last) {
  std::string out;
  for (std::size_t i = first; i <= last && i < policy.sentences.size(); ++i) {
    if (!out.empty()) out.push_back(' ');
    out += policy.sentences[i].text;
  }
  return out;
}

Segment make_segment(const corpus::Policy& policy, DataCategory category, std::size_t first,
                     std::size_t last, std::size_t seed) {
  Segment s;
  s.doc_id = policy.doc_id;
  s.category = category;
  s.first_index = first;
  s.last_index = last;
  s.seed_index = seed;
  s.text = join_sentences(policy, first, last);
  return s;
}

std::vector<RelevantSentence> relevant_sentences(const corpus::Policy& policy,
                                                 const textmodel::TextClassifier& model,
                                                 double tau_rel) {
  if (model.class_count() != 2) throw InvalidArgument("category model must be binary");
  std::vector<RelevantSentence> out;
  for (const auto& s : policy.sentences) {
    const double p = model.predict_proba(s.text)[kRelevant];
    if (p >= tau_rel) out.push_back({s.index, p});
  }
  return out;
}

PolicyBags::PolicyBags(const corpus::Policy& policy, const embedding::WordVectorTable& table) {
  bags_.reserve(policy.sentences.size());
  for (const auto& s : policy.sentences) bags_.push_back(embedding::make_bag(s.text, table));
}

Segment contextualize(std::size_t seed, const corpus::Policy& policy, const PolicyBags& bags,
                      const embedding::WmdStats& stats, const embedding::WordVectorTable& table,
                      DataCategory category, std::size_t max_span) {
  const std::size_t n = policy.sentences.size();
  if (seed >= n) throw InvalidArgument("seed sentence outside policy");
  if (bags.size() != n) throw InvalidArgument("bags do not belong to this policy");
  if (max_span == 0) throw InvalidConfig("max_span must be >= 1");

  std::size_t lo = seed, hi = seed;
  if (bags[seed].empty()) return make_segment(policy, category, lo, hi, seed);

  constexpr double kTol = 1e-12;
  embedding::Bag pooled = bags[seed];
  bool prev_open = lo > 0;
  bool next_open = hi + 1 < n;
  bool prev_turn = true;

  while ((prev_open || next_open) && hi - lo + 1 < max_span) {
    const bool use_prev = prev_turn ? prev_open : !next_open;
    prev_turn = !use_prev;
    const std::size_t cand = use_prev ? lo - 1 : hi + 1;
    bool join = false;
    if (!bags[cand].empty()) {
      join = embedding::wmd(bags[cand], pooled, table) <= stats.threshold + kTol;
    }
    if (join) {
      pooled = embedding::merge(pooled, bags[cand]);
      if (use_prev) {
        lo = cand;
        prev_open = lo > 0;
      } else {
        hi = cand;
        next_open = hi + 1 < n;
      }
    } else if (use_prev) {
      prev_open = false;
    } else {
      next_open = false;
    }
  }
  return make_segment(policy, category, lo, hi, seed);
}

std::vector<Segment> merge_overlapping(std::vector<Segment> segments, const corpus::Policy& policy) {
  std::sort(segments.begin(), segments.end(), [](const Segment& a, const Segment& b) {
    return a.first_index != b.first_index ? a.first_index < b.first_index
                                          : a.seed_index < b.seed_index;
  });
  std::vector<Segment> out;
  for (auto& s : segments) {
    if (!out.empty() && out.back().category == s.category && s.first_index <= out.back().last_index) {
      auto& cur = out.back();
      if (s.last_index > cur.last_index) {
        cur.last_index = s.last_index;
      }
      cur.seed_index = std::min(cur.seed_index, s.seed_index);
      cur.text = join_sentences(policy, cur.first_index, cur.last_index);
      continue;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Segment> segment_policy(const corpus::Policy& policy, DataCategory category,
                                    const textmodel::TextClassifier& category_model,
                                    const embedding::WordVectorTable& table,
                                    const SegmenterConfig& config) {
  const auto seeds = relevant_sentences(policy, category_model, config.tau_rel);
  if (seeds.empty()) return {};
  const PolicyBags bags(policy, table);
  const auto stats = embedding::document_wmd_stats(bags.all(), table, config.alpha, config.pairs);
  std::vector<Segment> segs;
  segs.reserve(seeds.size());
  for (const auto& r : seeds) {
    segs.push_back(contextualize(r.index, policy, bags, stats, table, category, config.max_span));
  }
  return merge_overlapping(std::move(segs), policy);
}

std::vector<Segment> segment_corpus(std::span<const corpus::Policy> policies, DataCategory category,
                                    const textmodel::TextClassifier& category_model,
                                    const embedding::WordVectorTable& table,
                                    const SegmenterConfig& config) {
  std::vector<Segment> out;
  for (const auto& p : policies) {
    try {
      auto segs = segment_policy(p, category, category_model, table, config);
      out.insert(out.end(), std::make_move_iterator(segs.begin()), std::make_move_iterator(segs.end()));
    } catch (const DegenerateDocument& e) {
      log::warn("skipping " + p.doc_id + ": " + e.what());
    }
  }
  return out;
}

void save_segments(std::span<const Segment> segments, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& s : segments) {
    out << json{{"doc_id", s.doc_id},         {"category", to_string(s.category)},
                {"first_index", s.first_index}, {"last_index", s.last_index},
                {"seed_index", s.seed_index},   {"text", s.text}}
               .dump()
        << '\n';
  }
}

std::vector<Segment> load_segments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Segment> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      Segment s;
      s.doc_id = j.at("doc_id").get<std::string>();
      s.category = category_from(j.at("category").get<std::string>());
      s.first_index = j.at("first_index").get<std::size_t>();
      s.last_index = j.at("last_index").get<std::size_t>();
      s.seed_index = j.at("seed_index").get<std::size_t>();
      s.text = j.at("text").get<std::string>();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace policyal::segmenter
