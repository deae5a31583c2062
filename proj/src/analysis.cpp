#include "policyal/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "policyal/error.hpp"
#include "policyal/log.hpp"
#include "policyal/text.hpp"

namespace policyal::analysis {

bool conflicting_pair(ActionMode a, ActionMode b) {
  auto is = [&](ActionMode x, ActionMode y) {
    return (a == x && b == y) || (a == y && b == x);
  };
  return is(ActionMode::kAssert, ActionMode::kDenial) || is(ActionMode::kChoice, ActionMode::kDenial);
}

namespace {

bool definite(ActionMode m) {
  return m == ActionMode::kAssert || m == ActionMode::kDenial || m == ActionMode::kChoice;
}

bool cites_legal_duty(std::string_view s) {
  const std::string t = text::to_lower(s);
  for (const char* cue : {"required by law", "legally required", "legal obligation", "court order",
                          "subpoena", "law enforcement", "comply with the law", "legal process",
                          "applicable law requires"}) {
    if (t.find(cue) != std::string::npos) return true;
  }
  return false;
}

void check_single_document(std::span<const crowd::SegmentLabel> labels) {
  for (const auto& l : labels) {
    if (l.segment.doc_id != labels.front().segment.doc_id) {
      throw InvalidArgument("labels span several documents: " + labels.front().segment.doc_id +
                            ", " + l.segment.doc_id);
    }
  }
}

struct Cell {
  std::set<ActionMode> modes;
  std::vector<const crowd::SegmentLabel*> segments;
};

std::map<CellKey, Cell> collect_cells(std::span<const crowd::SegmentLabel> labels) {
  std::map<CellKey, Cell> cells;
  for (const auto& l : labels) {
    if (!l.relevant) continue;
    for (auto a : kAllActions) {
      const ActionMode m = l.modes[index_of(a)];
      if (m == ActionMode::kNotMentioned) continue;
      auto& c = cells[{l.category, a}];
      c.modes.insert(m);
      if (definite(m)) c.segments.push_back(&l);
    }
  }
  return cells;
}

bool has_conflict(const std::set<ActionMode>& modes) {
  for (auto a : modes) {
    for (auto b : modes) {
      if (conflicting_pair(a, b)) return true;
    }
  }
  return false;
}

}  // namespace

std::vector<Conflict> detect_conflicts(std::span<const crowd::SegmentLabel> labels) {
  std::vector<Conflict> out;
  if (labels.empty()) return out;
  check_single_document(labels);
  for (const auto& [key, cell] : collect_cells(labels)) {
    if (!has_conflict(cell.modes)) continue;
    Conflict c;
    c.doc_id = labels.front().segment.doc_id;
    c.category = key.first;
    c.action = key.second;
    c.modes = cell.modes;
    bool legal = false;
    for (const auto* l : cell.segments) {
      c.segment_keys.push_back(l->segment.key());
      legal = legal || cites_legal_duty(l->segment.text);
    }
    std::sort(c.segment_keys.begin(), c.segment_keys.end());
    c.segment_keys.erase(std::unique(c.segment_keys.begin(), c.segment_keys.end()),
                         c.segment_keys.end());
    if (legal) c.note = "legal-exception";
    out.push_back(std::move(c));
  }
  return out;
}

std::string DocumentMode::name() const {
  return conflicting ? "conflicting" : std::string(to_string(mode));
}

std::map<CellKey, DocumentMode> document_rollup(std::span<const crowd::SegmentLabel> labels) {
  if (!labels.empty()) check_single_document(labels);
  std::map<CellKey, DocumentMode> out;
  for (auto c : kAllCategories) {
    for (auto a : kAllActions) out[{c, a}] = DocumentMode{};
  }
  for (const auto& [key, cell] : collect_cells(labels)) {
    DocumentMode& d = out[key];
    std::set<ActionMode> modes = cell.modes;
    if (has_conflict(modes)) {
      d.conflicting = true;
      continue;
    }
    const bool any_definite = std::any_of(modes.begin(), modes.end(), definite);
    if (any_definite) modes.erase(ActionMode::kAmbiguous);
    if (modes.count(ActionMode::kChoice)) {
      d.mode = ActionMode::kChoice;
    } else {
      d.mode = *modes.begin();
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::vector<crowd::SegmentLabel>>> group_by_document(
    std::span<const crowd::SegmentLabel> labels) {
  std::vector<std::pair<std::string, std::vector<crowd::SegmentLabel>>> out;
  std::map<std::string, std::size_t> pos;
  for (const auto& l : labels) {
    auto [it, inserted] = pos.emplace(l.segment.doc_id, out.size());
    if (inserted) out.emplace_back(l.segment.doc_id, std::vector<crowd::SegmentLabel>{});
    out[it->second].second.push_back(l);
  }
  return out;
}

std::vector<std::size_t> duplication_indices(std::span<const std::size_t> labels, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) throw InvalidArgument("duplication baseline needs binary labels");
    by_class[labels[i]].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty()) {
    throw InvalidArgument("duplication baseline needs both classes present");
  }
  const std::size_t minority = by_class[0].size() < by_class[1].size() ? 0 : 1;
  const auto& mi = by_class[minority];
  const std::size_t need = by_class[1 - minority].size() - mi.size();

  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = i;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, mi.size() - 1);
  for (std::size_t k = 0; k < need; ++k) out.push_back(mi[pick(rng)]);
  return out;
}

std::vector<textmodel::LabeledText> duplication_baseline(std::span<const textmodel::LabeledText> data,
                                                         std::uint64_t seed) {
  std::vector<std::size_t> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data[i].label;
  std::vector<textmodel::LabeledText> out;
  for (auto i : duplication_indices(labels, seed)) out.push_back(data[i]);
  return out;
}

double al_save(double n_nonal, double n_al) {
  if (!(n_nonal > 0.0)) throw InvalidArgument("n_nonal must be positive");
  return (n_nonal - n_al) / n_nonal;
}

// ---------------------------------------------------------------------------
// Tables

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string pct(std::optional<double> v) { return v ? fixed2(*v * 100.0) + "%" : "N/A"; }

std::string avg(std::size_t total, std::size_t n) {
  return n == 0 ? "N/A" : fixed2(static_cast<double>(total) / static_cast<double>(n));
}

}  // namespace

std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    out += (i ? "," : "") + csv_field(t.columns[i]);
  }
  out += '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + csv_field(r[i]);
    out += '\n';
  }
  return out;
}

nlohmann::json to_json(const Table& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json row;
    for (std::size_t i = 0; i < t.columns.size() && i < r.size(); ++i) row[t.columns[i]] = r[i];
    rows.push_back(row);
  }
  return {{"name", t.name}, {"columns", t.columns}, {"rows", rows}};
}

std::optional<double> CategoryDenials::denial_pct() const {
  if (labels == 0) return std::nullopt;
  return static_cast<double>(denials) / static_cast<double>(labels);
}

std::string downloads_bin(std::uint64_t d) {
  if (d >= 50000) return "50K+";
  if (d >= 10000) return "10K-50K";
  if (d >= 1000) return "1K-10K";
  return "<1K";
}

std::string rating_bin(const std::optional<double>& r) {
  if (!r) return "None";
  if (*r > 4.5) return ">4.5";
  if (*r > 4.0) return "4.0-4.5";
  if (*r > 3.0) return "3.0-4.0";
  return "<=3.0";
}

CorpusReport corpus_stats(std::span<const crowd::SegmentLabel> labels,
                          const std::map<std::string, corpus::SourceMeta>& metadata) {
  CorpusReport rep;
  std::set<std::string> docs;
  for (const auto& l : labels) docs.insert(l.segment.doc_id);
  for (const auto& [id, m] : metadata) docs.insert(id);

  // Per-document tallies.
  std::map<std::string, std::size_t> denials_per_doc;
  std::map<std::string, std::array<std::size_t, kNumCategories>> rel_per_doc;
  std::array<std::array<std::size_t, kNumModes>, kNumActions> mode_counts{};
  rep.denials.resize(kNumCategories);
  for (auto c : kAllCategories) rep.denials[index_of(c)].category = c;
  for (const auto& l : labels) {
    if (!l.relevant) continue;
    auto& d = rep.denials[index_of(l.category)];
    ++d.labels;
    ++rel_per_doc[l.segment.doc_id][index_of(l.category)];
    if (l.any_mode(ActionMode::kDenial)) {
      ++d.denials;
      ++denials_per_doc[l.segment.doc_id];
    }
    for (auto a : kAllActions) ++mode_counts[index_of(a)][index_of(l.modes[index_of(a)])];
  }

  rep.by_category = {"denials_by_category", {"category", "count", "denial_pct"}, {}};
  for (const auto& d : rep.denials) {
    rep.by_category.rows.push_back(
        {std::string(to_string(d.category)), std::to_string(d.labels), pct(d.denial_pct())});
  }

  rep.modes_per_policy = {"modes_per_policy", {"action", "assert", "denial", "choice"}, {}};
  for (auto a : kAllActions) {
    const auto& mc = mode_counts[index_of(a)];
    rep.modes_per_policy.rows.push_back({std::string(to_string(a)),
                                avg(mc[index_of(ActionMode::kAssert)], docs.size()),
                                avg(mc[index_of(ActionMode::kDenial)], docs.size()),
                                avg(mc[index_of(ActionMode::kChoice)], docs.size())});
  }

  if (metadata.empty()) {
    log::warn("no app metadata: popularity and app-category tables omitted");
    return rep;
  }

  auto denial_table = [&](const std::string& name, const std::string& col,
                          const std::vector<std::string>& bins, auto bin_of) {
    Table t{name, {col, "policies", "avg_denials_per_policy"}, {}};
    for (const auto& b : bins) {
      std::size_t n = 0, total = 0;
      for (const auto& [id, m] : metadata) {
        if (bin_of(m) != b) continue;
        ++n;
        auto it = denials_per_doc.find(id);
        if (it != denials_per_doc.end()) total += it->second;
      }
      t.rows.push_back({b, std::to_string(n), avg(total, n)});
    }
    return t;
  };
  rep.by_downloads = denial_table("denials_by_downloads", "downloads",
                            {"50K+", "10K-50K", "1K-10K", "<1K"},
                            [](const corpus::SourceMeta& m) { return downloads_bin(m.downloads); });
  rep.by_rating = denial_table("denials_by_rating", "rating",
                            {">4.5", "4.0-4.5", "3.0-4.0", "<=3.0", "None"},
                            [](const corpus::SourceMeta& m) { return rating_bin(m.rating); });

  std::set<std::string> app_cats;
  for (const auto& [id, m] : metadata) app_cats.insert(m.app_category);
  Table per_app{"category_by_app_category", {"category"}, {}};
  per_app.columns.insert(per_app.columns.end(), app_cats.begin(), app_cats.end());
  for (auto c : kAllCategories) {
    std::vector<std::string> row{std::string(to_string(c))};
    for (const auto& ac : app_cats) {
      std::size_t n = 0, total = 0;
      for (const auto& [id, m] : metadata) {
        if (m.app_category != ac) continue;
        ++n;
        auto it = rel_per_doc.find(id);
        if (it != rel_per_doc.end()) total += it->second[index_of(c)];
      }
      row.push_back(avg(total, n));
    }
    per_app.rows.push_back(std::move(row));
  }
  rep.by_app_category = std::move(per_app);
  return rep;
}

void write_report(const CorpusReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json all = nlohmann::json::array();
  auto emit = [&](const Table& t) {
    std::ofstream out(dir / (t.name + ".csv"));
    if (!out) throw IoError("cannot write " + (dir / (t.name + ".csv")).string());
    out << to_csv(t);
    all.push_back(to_json(t));
  };
  emit(report.by_category);
  if (report.by_downloads) emit(*report.by_downloads);
  if (report.by_rating) emit(*report.by_rating);
  emit(report.modes_per_policy);
  if (report.by_app_category) emit(*report.by_app_category);
  std::ofstream js(dir / "report.json");
  if (!js) throw IoError("cannot write " + (dir / "report.json").string());
  js << all.dump(2) << '\n';
}

}  // namespace policyal::analysis
