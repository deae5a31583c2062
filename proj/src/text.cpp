#include "policyal/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace policyal::text {

namespace {

// Sorted for binary search. Negations ("no", "not", "never") are deliberately
// absent: they carry the assert/denial distinction.
constexpr std::array<std::string_view, 118> kStopWords = {
    "a",       "about",   "above",  "after",   "again",  "all",     "also",
    "am",      "an",      "and",    "any",     "are",    "as",      "at",
    "be",      "because", "been",   "before",  "being",  "below",   "between",
    "both",    "but",     "by",     "can",     "could",  "did",     "do",
    "does",    "doing",   "down",   "during",  "each",   "few",     "for",
    "from",    "further", "had",    "has",     "have",   "having",  "he",
    "her",     "here",    "hers",   "him",     "his",    "how",     "i",
    "if",      "in",      "into",   "is",      "it",     "its",     "itself",
    "just",    "me",      "more",   "most",    "my",     "myself",  "of",
    "off",     "on",      "once",   "only",    "or",     "other",   "our",
    "ours",    "out",     "over",   "own",     "same",   "she",     "should",
    "so",      "some",    "such",   "than",    "that",   "the",     "their",
    "theirs",  "them",    "then",   "there",   "these",  "they",    "this",
    "those",   "through", "to",     "too",     "under",  "until",   "up",
    "us",      "very",    "was",    "we",      "were",   "what",    "when",
    "where",   "which",   "while",  "who",     "whom",   "why",     "will",
    "with",    "would",   "you",    "your",    "yours",  "yourself",
};

bool is_token_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (is_token_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '\'' && !cur.empty()) {
      // "don't" -> "dont"
      continue;
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool is_stop_word(std::string_view token) {
  return std::binary_search(kStopWords.begin(), kStopWords.end(), token);
}

std::vector<std::string> content_tokens(std::string_view s) {
  auto toks = tokenize(s);
  std::erase_if(toks, [](const std::string& t) { return is_stop_word(t); });
  return toks;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace policyal::text
