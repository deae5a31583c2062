#include "policyal/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "policyal/error.hpp"
#include "policyal/log.hpp"
#include "policyal/text.hpp"

namespace policyal::corpus {

namespace fs = std::filesystem;

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kNone: return "none";
    case RejectReason::kNonLegal: return "non-legal";
    case RejectReason::kNonEnglish: return "non-english";
    case RejectReason::kTooShort: return "too-short";
    case RejectReason::kDuplicate: return "duplicate";
  }
  return "unknown";
}

std::uint64_t content_hash(std::string_view text) {
  return text::fnv1a(text::collapse_whitespace(text::to_lower(text)));
}

FilterDecision filter_document(const RawDocument& doc,
                               const std::unordered_set<std::uint64_t>& seen_hashes,
                               const FilterConfig& config) {
  FilterDecision d;
  const std::string normalized = text::collapse_whitespace(text::to_lower(doc.text));

  std::size_t hits = 0;
  for (const auto& kw : config.legal_keywords) {
    if (!kw.empty() && normalized.find(text::to_lower(kw)) != std::string::npos) ++hits;
  }
  if (hits < config.min_keyword_hits) {
    d.reason = RejectReason::kNonLegal;
    return d;
  }
  d.passed.emplace_back("legal");

  const auto tokens = text::tokenize(normalized);
  const auto stops = static_cast<double>(
      std::count_if(tokens.begin(), tokens.end(),
                    [](const std::string& t) { return text::is_stop_word(t); }));
  if (tokens.empty() || stops / static_cast<double>(tokens.size()) < config.min_stopword_ratio) {
    d.reason = RejectReason::kNonEnglish;
    return d;
  }
  d.passed.emplace_back("english");

  if (text::trim(doc.text).size() < config.min_chars) {
    d.reason = RejectReason::kTooShort;
    return d;
  }
  d.passed.emplace_back("length");

  if (seen_hashes.contains(text::fnv1a(normalized))) {
    d.reason = RejectReason::kDuplicate;
    return d;
  }
  d.passed.emplace_back("unique");
  d.keep = true;
  return d;
}

FilterDecision CorpusFilter::admit(const RawDocument& doc) {
  std::lock_guard<std::mutex> lock(mu_);
  auto d = filter_document(doc, seen_, config_);
  if (d.keep) seen_.insert(content_hash(doc.text));
  return d;
}

namespace {

struct Line {
  std::size_t start;  // offset of first byte
  std::size_t end;    // offset one past last byte (excluding '\n')
};

struct Bullet {
  std::size_t item_start;
  std::size_t item_end;
};

struct Span {
  std::size_t start;
  std::size_t end;
};

constexpr std::string_view kBulletGlyph = "\xE2\x80\xA2";

std::optional<Bullet> match_bullet(std::string_view doc, const Line& line) {
  std::size_t p = line.start;
  while (p < line.end && (doc[p] == ' ' || doc[p] == '\t')) ++p;
  if (p >= line.end) return std::nullopt;

  std::size_t after = 0;
  if (doc[p] == '-' || doc[p] == '*') {
    after = p + 1;
    if (after < line.end && !std::isspace(static_cast<unsigned char>(doc[after]))) {
      return std::nullopt;
    }
  } else if (doc.substr(p, kBulletGlyph.size()) == kBulletGlyph) {
    after = p + kBulletGlyph.size();
  } else if (std::isdigit(static_cast<unsigned char>(doc[p]))) {
    std::size_t q = p;
    while (q < line.end && std::isdigit(static_cast<unsigned char>(doc[q]))) ++q;
    if (q >= line.end || doc[q] != '.') return std::nullopt;
    after = q + 1;
    if (after < line.end && !std::isspace(static_cast<unsigned char>(doc[after]))) {
      return std::nullopt;
    }
  } else {
    return std::nullopt;
  }

  std::size_t b = after;
  std::size_t e = line.end;
  while (b < e && std::isspace(static_cast<unsigned char>(doc[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(doc[e - 1]))) --e;
  if (b >= e) return std::nullopt;
  return Bullet{b, e};
}

bool is_blank(std::string_view doc, const Line& line) {
  for (std::size_t i = line.start; i < line.end; ++i) {
    if (!std::isspace(static_cast<unsigned char>(doc[i]))) return false;
  }
  return true;
}

constexpr std::array<std::string_view, 20> kAbbreviations = {
    "approx", "co", "corp", "dept", "dr", "e.g", "eg", "etc", "fig", "i.e",
    "ie",     "inc", "jr",  "ltd",  "mr", "mrs", "ms", "no",  "sr",  "u.s",
};

// Abbreviations that legitimately end a sentence when a capital follows.
constexpr std::array<std::string_view, 5> kTerminalAbbreviations = {"co", "corp", "etc", "inc",
                                                                    "ltd"};

bool guarded_period(std::string_view doc, std::size_t dot, std::size_t block_end) {
  std::size_t b = dot;
  while (b > 0 && !std::isspace(static_cast<unsigned char>(doc[b - 1]))) --b;
  std::string word = text::to_lower(doc.substr(b, dot - b));
  while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\'')) {
    word.erase(word.begin());
  }
  if (word.size() == 1 && std::isalpha(static_cast<unsigned char>(word[0]))) return true;
  if (std::find(kAbbreviations.begin(), kAbbreviations.end(), word) == kAbbreviations.end()) {
    return false;
  }
  if (std::find(kTerminalAbbreviations.begin(), kTerminalAbbreviations.end(), word) ==
      kTerminalAbbreviations.end()) {
    return true;
  }
  std::size_t n = dot + 1;
  while (n < block_end && std::isspace(static_cast<unsigned char>(doc[n]))) ++n;
  return !(n < block_end && std::isupper(static_cast<unsigned char>(doc[n])));
}

// Rule-based boundary detection inside one prose block.
std::vector<Span> split_block(std::string_view doc, std::size_t begin, std::size_t end) {
  std::vector<Span> out;
  std::size_t cur = begin;
  auto push = [&](std::size_t s, std::size_t e) {
    while (s < e && std::isspace(static_cast<unsigned char>(doc[s]))) ++s;
    while (e > s && std::isspace(static_cast<unsigned char>(doc[e - 1]))) --e;
    if (e > s) out.push_back({s, e});
  };
  for (std::size_t i = begin; i < end; ++i) {
    const char c = doc[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    while (j < end && (doc[j] == '"' || doc[j] == '\'' || doc[j] == ')')) ++j;
    if (j < end && !std::isspace(static_cast<unsigned char>(doc[j]))) continue;
    if (c == '.' && guarded_period(doc, i, end)) continue;
    push(cur, j);
    cur = j;
  }
  push(cur, end);
  return out;
}

}  // namespace

Policy split_sentences(const RawDocument& doc) {
  const std::string_view t = doc.text;
  std::vector<Line> lines;
  {
    std::size_t p = 0;
    while (p <= t.size()) {
      std::size_t nl = t.find('\n', p);
      if (nl == std::string_view::npos) nl = t.size();
      lines.push_back({p, nl});
      p = nl + 1;
    }
  }

  struct Pending {
    Span span;
    std::string text;
    bool from_bullet;
  };
  std::vector<Pending> out;
  // Last prose sentence emitted before any intervening list, usable as an
  // introducer for a following bullet list.
  std::optional<std::size_t> last_prose;

  std::size_t i = 0;
  while (i < lines.size()) {
    if (is_blank(t, lines[i])) {
      ++i;
      continue;
    }
    if (auto bullet = match_bullet(t, lines[i])) {
      std::optional<Pending> intro;
      if (last_prose && *last_prose + 1 == out.size()) {
        intro = std::move(out.back());
        out.pop_back();
      }
      last_prose.reset();
      while (i < lines.size()) {
        if (is_blank(t, lines[i])) {
          ++i;
          continue;
        }
        auto b = match_bullet(t, lines[i]);
        if (!b) break;
        std::string item = text::collapse_whitespace(t.substr(b->item_start, b->item_end - b->item_start));
        Pending p;
        p.from_bullet = true;
        p.span = {intro ? intro->span.start : b->item_start, b->item_end};
        p.text = intro ? intro->text + " " + item : item;
        out.push_back(std::move(p));
        ++i;
      }
      continue;
    }
    // Prose block: consecutive non-blank, non-bullet lines.
    const std::size_t block_start = lines[i].start;
    std::size_t block_end = lines[i].end;
    ++i;
    while (i < lines.size() && !is_blank(t, lines[i]) && !match_bullet(t, lines[i])) {
      block_end = lines[i].end;
      ++i;
    }
    for (const auto& s : split_block(t, block_start, block_end)) {
      out.push_back({s, text::collapse_whitespace(t.substr(s.start, s.end - s.start)), false});
      last_prose = out.size() - 1;
    }
  }

  if (out.empty()) {
    throw DegenerateDocument("document '" + doc.doc_id + "' has no sentences");
  }

  Policy policy;
  policy.doc_id = doc.doc_id;
  policy.sentences.reserve(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    Sentence s;
    s.index = k;
    s.text = std::move(out[k].text);
    s.start = out[k].span.start;
    s.end = out[k].span.end;
    s.from_bullet = out[k].from_bullet;
    policy.sentences.push_back(std::move(s));
  }
  return policy;
}

std::vector<std::pair<std::string, SourceMeta>> load_metadata(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metadata file " + path.string());
  std::vector<std::pair<std::string, SourceMeta>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      SourceMeta m;
      m.app_category = j.value("app_category", std::string{});
      m.downloads = j.value("downloads", std::uint64_t{0});
      if (j.contains("rating") && !j["rating"].is_null()) m.rating = j["rating"].get<double>();
      m.review_count = j.value("review_count", std::uint64_t{0});
      out.emplace_back(j.at("doc_id").get<std::string>(), std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RawDocument> load_corpus_dir(const fs::path& dir,
                                         const std::optional<fs::path>& metadata) {
  if (!fs::is_directory(dir)) throw IoError("corpus directory not found: " + dir.string());
  std::vector<RawDocument> docs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    if (!in) throw IoError("cannot read " + entry.path().string());
    std::ostringstream ss;
    ss << in.rdbuf();
    docs.push_back({entry.path().stem().string(), ss.str(), std::nullopt});
  }
  std::sort(docs.begin(), docs.end(),
            [](const RawDocument& a, const RawDocument& b) { return a.doc_id < b.doc_id; });

  if (metadata) {
    std::unordered_map<std::string, SourceMeta> by_id;
    for (auto& [id, m] : load_metadata(*metadata)) by_id[id] = std::move(m);
    for (auto& d : docs) {
      if (auto it = by_id.find(d.doc_id); it != by_id.end()) d.source_meta = it->second;
    }
  }
  return docs;
}

IngestResult ingest(const std::vector<RawDocument>& docs, const FilterConfig& config) {
  CorpusFilter filter(config);
  IngestResult result;
  std::vector<const RawDocument*> kept;
  std::vector<std::vector<std::string>> traces;
  for (const auto& d : docs) {
    auto decision = filter.admit(d);
    if (decision.keep) {
      kept.push_back(&d);
      traces.push_back(std::move(decision.passed));
    } else {
      result.rejected.emplace_back(d.doc_id, decision.reason);
    }
  }

  std::vector<std::optional<Policy>> split(kept.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(kept.size()); ++k) {
    try {
      split[k] = split_sentences(*kept[k]);
    } catch (const DegenerateDocument&) {
      split[k].reset();
    }
  }
  for (std::size_t k = 0; k < kept.size(); ++k) {
    if (!split[k]) {
      log::warn("dropping degenerate document " + kept[k]->doc_id);
      continue;
    }
    split[k]->filter_trace = std::move(traces[k]);
    result.policies.push_back(std::move(*split[k]));
  }
  return result;
}

}  // namespace policyal::corpus
