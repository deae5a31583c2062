#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace policyal::text {

// Lowercased alphanumeric runs; everything else separates tokens.
// Non-ASCII bytes are kept inside tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view s);

bool is_stop_word(std::string_view token);

// Drops stop words from an already tokenized sentence.
std::vector<std::string> content_tokens(std::string_view s);

std::string to_lower(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::string_view trim(std::string_view s);

// 64-bit FNV-1a; stable across platforms and runs.
std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace policyal::text
