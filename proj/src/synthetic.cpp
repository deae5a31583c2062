#include "policyal/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include "policyal/error.hpp"
#include "policyal/text.hpp"

namespace policyal::synthetic {

namespace {

using Rng = std::mt19937_64;

const std::map<DataCategory, std::vector<std::string>>& lexicons() {
  static const std::map<DataCategory, std::vector<std::string>> m = {
      {DataCategory::kContact, {"email address", "phone number", "mailing address", "contact details"}},
      {DataCategory::kLocation, {"precise location", "GPS coordinates", "geolocation", "location history"}},
      {DataCategory::kDevice, {"device identifier", "IP address", "advertising ID", "hardware model"}},
      {DataCategory::kDemographic, {"age", "gender", "date of birth", "ethnicity"}},
      {DataCategory::kFinancial, {"credit card number", "payment details", "bank account", "billing history"}},
      {DataCategory::kHealth, {"health records", "fitness activity", "heart rate", "medical conditions"}},
      {DataCategory::kSurvey, {"survey responses", "questionnaire answers", "poll results", "feedback forms"}},
      {DataCategory::kPersonalIdentifier, {"social security number", "passport number", "driver license", "national ID"}},
      {DataCategory::kSocialMedia, {"social media profile", "Facebook friends", "Twitter handle", "Instagram followers"}},
  };
  return m;
}

// [action][mode] -> templates; modes in ActionMode order, not_mentioned empty.
using Templates = std::array<std::array<std::vector<std::string>, kNumModes>, kNumActions>;

const Templates& templates() {
  static const Templates t = [] {
    Templates x;
    auto& cu = x[index_of(DataAction::kCollectUse)];
    cu[index_of(ActionMode::kAssert)] = {
        "We collect your {item} when you create an account.",
        "We use your {item} to personalize the service and improve our products.",
        "Our app gathers your {item} automatically while you use it."};
    cu[index_of(ActionMode::kDenial)] = {"We do not collect your {item}.",
                                         "We never use your {item} for any purpose.",
                                         "The app does not access your {item} at any time."};
    cu[index_of(ActionMode::kChoice)] = {
        "You can opt out of the collection of your {item} in your account settings.",
        "We collect your {item} only if you give consent, and you may withdraw it at any time.",
        "You may choose whether we use your {item} by changing your preferences."};
    cu[index_of(ActionMode::kAmbiguous)] = {
        "Your {item} may be processed in certain circumstances described elsewhere.",
        "In some cases we might handle your {item} in connection with our services."};
    auto& sh = x[index_of(DataAction::kShare)];
    sh[index_of(ActionMode::kAssert)] = {
        "We share your {item} with third party advertisers and analytics partners.",
        "Your {item} is disclosed to our business partners for marketing."};
    sh[index_of(ActionMode::kDenial)] = {"We do not share your {item} with third parties.",
                                         "We will never sell or disclose your {item} to other companies."};
    sh[index_of(ActionMode::kChoice)] = {
        "You can opt out of sharing your {item} with our partners at any time.",
        "We share your {item} with partners only if you agree, and you may change this choice."};
    sh[index_of(ActionMode::kAmbiguous)] = {
        "Your {item} may be made available to certain entities in some situations."};
    auto& st = x[index_of(DataAction::kStore)];
    st[index_of(ActionMode::kAssert)] = {
        "We store your {item} on our servers for as long as your account is active.",
        "Your {item} is retained in our databases for several years."};
    st[index_of(ActionMode::kDenial)] = {"We do not store your {item} after your request is completed.",
                                         "Your {item} is never retained on our servers."};
    st[index_of(ActionMode::kChoice)] = {"You can ask us to delete your stored {item} at any time.",
                                         "You may choose how long we keep your {item} in your settings."};
    st[index_of(ActionMode::kAmbiguous)] = {
        "Your {item} may be kept for a period that depends on various factors."};
    return x;
  }();
  return t;
}

const std::vector<std::string>& fillers() {
  static const std::vector<std::string> f = {
      "This policy applies to all users of our website and mobile applications.",
      "We may update this policy from time to time and will post the new version here.",
      "Please read these terms carefully before using the service.",
      "If you have questions about this document, write to our support team.",
      "Continued use of the service after changes means you accept the revised terms.",
      "Our service is not directed to children under the age of thirteen.",
      "We take reasonable measures to protect the security of our systems.",
      "No method of transmission over the internet is completely secure.",
      "The service may contain links to external websites that we do not control.",
      "Those websites have their own rules and we are not responsible for them.",
      "This document is governed by the laws of the state where our company is registered.",
      "Our headquarters are located in a major city and serve customers worldwide.",
      "You agree to resolve any dispute through binding arbitration.",
      "We welcome comments about the design of our products.",
      "Certain features require a stable network connection.",
      "The application is offered free of charge with optional upgrades.",
      "Customer support is available during regular business hours.",
      "We work hard to keep the app fast, reliable and enjoyable.",
      "The effective date of this version appears at the top of the page.",
      "Translations are provided for convenience and the English text prevails.",
      "Accounts that remain inactive for a long period may be closed.",
      "You are responsible for keeping your password confidential.",
      "Our engineers regularly review the quality of the software.",
      "Promotional offers are subject to additional conditions.",
      "We comply with applicable regulations in every region where we operate.",
      "Feedback about the user interface helps our designers.",
      "Subscription fees are billed at the start of each cycle.",
      "Refund requests are handled according to the store rules.",
      "Game progress is synchronized across devices when you sign in.",
      "Our team is committed to transparency about how the service works.",
  };
  return f;
}

const std::vector<std::string>& app_categories() {
  static const std::vector<std::string> a = {"GAME", "HEALTH_AND_FITNESS", "FINANCE", "SOCIAL",
                                             "TOOLS", "EDUCATION", "SHOPPING", "TRAVEL"};
  return a;
}

// Cue words shared by every statement about data handling.
const std::set<std::string>& privacy_words() {
  static const std::set<std::string> w = {
      "collect", "collection", "use", "share", "sharing", "store", "stored", "retain",
      "retained", "servers", "databases", "delete", "opt", "out", "consent", "withdraw",
      "disclose", "disclosed", "sell", "third", "party", "parties", "partners", "advertisers",
      "analytics", "marketing", "not", "never", "may", "might", "choose", "preferences",
      "settings", "agree", "choice", "processed", "handle", "kept", "keep", "gathers",
      "access", "personal", "information", "data", "privacy", "policy", "process"};
  return w;
}

std::string fill(const std::string& tmpl, const std::string& item) {
  std::string out = tmpl;
  const auto pos = out.find("{item}");
  if (pos != std::string::npos) out.replace(pos, 6, item);
  return out;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

struct Unit {
  std::string text;
  bool introducer = false;
  bool bullet = false;
  bool paragraph_break = false;  // blank line before this unit
};

struct Block {
  std::size_t first_unit = 0;
  std::size_t last_unit = 0;
  DataCategory category = DataCategory::kContact;
  ModeTriple modes = kAllNotMentioned;
};

ActionMode draw_mode(const CorpusConfig& cfg, Rng& rng) {
  std::discrete_distribution<std::size_t> d(cfg.mode_weights.begin(), cfg.mode_weights.end());
  static constexpr ActionMode order[] = {ActionMode::kDenial, ActionMode::kAssert,
                                         ActionMode::kChoice, ActionMode::kAmbiguous};
  return order[d(rng)];
}

}  // namespace

const std::vector<std::string>& lexicon(DataCategory category) { return lexicons().at(category); }

GeneratedCorpus generate_corpus(const CorpusConfig& cfg) {
  if (cfg.policies == 0) throw InvalidConfig("policies must be >= 1");
  if (cfg.filler_min > cfg.filler_max) throw InvalidConfig("filler_min > filler_max");
  if (cfg.mode_weights.size() != 4) throw InvalidConfig("mode_weights needs 4 entries");
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GeneratedCorpus out;

  for (std::size_t p = 0; p < cfg.policies; ++p) {
    char id[32];
    std::snprintf(id, sizeof id, "policy_%03zu", p);
    std::vector<Unit> units;
    std::vector<Block> blocks;
    units.push_back({"Privacy Policy", false, false, false});
    units.push_back({"This privacy policy explains how we collect, use and share personal "
                     "information and other data when you use our app.",
                     false, false, true});

    // Statement blocks, interleaved with filler.
    std::vector<std::vector<Unit>> chunks;
    std::vector<std::vector<Block>> chunk_blocks;
    for (auto c : cfg.categories) {
      if (u(rng) >= cfg.mention_rate) continue;
      const std::size_t n_blocks = u(rng) < 0.25 ? 2 : 1;
      for (std::size_t b = 0; b < n_blocks; ++b) {
        const std::string item = pick(lexicon(c), rng);
        ModeTriple modes = kAllNotMentioned;
        modes[0] = draw_mode(cfg, rng);
        if (u(rng) < cfg.follow_up_rate) modes[1] = draw_mode(cfg, rng);
        if (u(rng) < cfg.follow_up_rate * 0.6) modes[2] = draw_mode(cfg, rng);
        std::vector<Unit> chunk;
        for (std::size_t a = 0; a < kNumActions; ++a) {
          if (modes[a] == ActionMode::kNotMentioned) continue;
          chunk.push_back({fill(pick(templates()[a][index_of(modes[a])], rng), item), false, false,
                           chunk.empty()});
        }
        Block blk;
        blk.category = c;
        blk.modes = modes;
        blk.first_unit = 0;
        blk.last_unit = chunk.size() - 1;
        chunks.push_back(std::move(chunk));
        chunk_blocks.push_back({blk});
      }
    }
    if (!chunks.empty() && u(rng) < cfg.bullet_rate) {
      // "The following ... :" followed by one bullet per item
      std::vector<Unit> chunk;
      std::vector<Block> bl;
      chunk.push_back({"When you register we collect the following information:", true, false, true});
      std::vector<DataCategory> cats = cfg.categories;
      std::shuffle(cats.begin(), cats.end(), rng);
      cats.resize(std::min<std::size_t>(cats.size(), 2 + rng() % 3));
      for (auto c : cats) {
        chunk.push_back({"- your " + pick(lexicon(c), rng), false, true, false});
        Block blk;
        blk.category = c;
        blk.modes = kAllNotMentioned;
        blk.modes[0] = ActionMode::kAssert;
        blk.first_unit = blk.last_unit = chunk.size() - 1;
        bl.push_back(blk);
      }
      chunks.push_back(std::move(chunk));
      chunk_blocks.push_back(std::move(bl));
    }
    std::vector<std::size_t> order(chunks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    std::uniform_int_distribution<std::size_t> nfill(cfg.filler_min, cfg.filler_max);
    std::size_t fill_left = nfill(rng);
    auto add_fillers = [&](std::size_t k) {
      for (std::size_t i = 0; i < k && fill_left > 0; ++i, --fill_left) {
        units.push_back({pick(fillers(), rng), false, false, i == 0});
      }
    };
    const std::size_t per_gap = order.empty() ? fill_left : fill_left / (order.size() + 1) + 1;
    add_fillers(per_gap);
    for (auto ci : order) {
      const std::size_t base = units.size();
      for (const auto& unit : chunks[ci]) units.push_back(unit);
      for (auto blk : chunk_blocks[ci]) {
        blk.first_unit += base;
        blk.last_unit += base;
        blocks.push_back(blk);
      }
      add_fillers(per_gap);
    }
    add_fillers(fill_left);
    units.push_back({"Contact us through the help page if you have any questions about this policy.",
                     false, false, true});

    // Render.
    std::string doc;
    for (std::size_t i = 0; i < units.size(); ++i) {
      const auto& un = units[i];
      if (i > 0) {
        if (un.bullet) {
          doc += "\n";
        } else if (un.introducer || un.paragraph_break || units[i - 1].bullet || i == 1) {
          doc += "\n\n";
        } else {
          doc += " ";
        }
      }
      doc += un.text;
    }
    doc += "\n";

    corpus::RawDocument raw;
    raw.doc_id = id;
    raw.text = doc;
    corpus::SourceMeta meta;
    meta.app_category = pick(app_categories(), rng);
    static constexpr std::uint64_t downloads[] = {500, 5000, 20000, 100000, 1000000};
    meta.downloads = downloads[rng() % 5];
    if (u(rng) < 0.85) meta.rating = 2.5 + 2.5 * u(rng);
    meta.review_count = rng() % 100000;
    raw.source_meta = meta;

    // Map units to split sentences: introducers merge into their items.
    const auto policy = corpus::split_sentences(raw);
    std::vector<std::size_t> sentence_of(units.size(), 0);
    std::size_t s = 0;
    for (std::size_t i = 0; i < units.size(); ++i) {
      if (units[i].introducer) continue;
      sentence_of[i] = s++;
    }
    if (s != policy.sentences.size()) {
      throw Error("synthetic generator: " + std::string(id) + " split into " +
                  std::to_string(policy.sentences.size()) + " sentences, expected " +
                  std::to_string(s));
    }
    for (const auto& blk : blocks) {
      const auto first = sentence_of[blk.first_unit];
      const auto last = sentence_of[blk.last_unit];
      auto seg = segmenter::make_segment(policy, blk.category, first, last, first);
      out.truth.push_back(crowd::make_label(seg, blk.category, true, blk.modes, crowd::Provenance::kReplay));
    }
    out.documents.push_back(std::move(raw));
  }
  return out;
}

embedding::WordVectorTable build_vectors(const std::vector<corpus::RawDocument>& documents,
                                         std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw InvalidConfig("vector dimension must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto random_vec = [&](double scale) {
    std::vector<double> v(dim);
    for (auto& x : v) x = scale * n01(rng);
    return v;
  };

  // token -> cluster id (category index, or kNumCategories for privacy cues)
  std::map<std::string, std::size_t> cluster;
  const std::size_t privacy = kNumCategories;
  for (auto c : kAllCategories) {
    for (const auto& phrase : lexicon(c)) {
      for (const auto& tok : text::tokenize(phrase)) {
        auto [it, inserted] = cluster.emplace(tok, index_of(c));
        if (!inserted && it->second != index_of(c)) it->second = privacy;
      }
    }
  }
  for (const auto& w : privacy_words()) cluster[w] = privacy;

  std::vector<std::vector<double>> centroids;
  for (std::size_t k = 0; k <= kNumCategories; ++k) centroids.push_back(random_vec(1.0));

  std::set<std::string> vocab;
  for (const auto& d : documents) {
    for (auto& t : text::tokenize(d.text)) vocab.insert(std::move(t));
  }
  for (const auto& [tok, k] : cluster) vocab.insert(tok);

  embedding::WordVectorTable table(dim);
  for (const auto& tok : vocab) {
    auto it = cluster.find(tok);
    if (it == cluster.end()) {
      table.add(tok, random_vec(1.0));
      continue;
    }
    auto v = random_vec(0.2);
    for (std::size_t i = 0; i < dim; ++i) v[i] += centroids[it->second][i];
    table.add(tok, std::move(v));
  }
  return table;
}

}  // namespace policyal::synthetic
