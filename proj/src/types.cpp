#include "policyal/types.hpp"

#include "policyal/error.hpp"

namespace policyal {

namespace {

constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "contact",   "location", "device", "demographic",         "financial",
    "health",    "survey",   "personal_identifier", "social_media"};

constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "collect_use", "share", "store"};

constexpr std::array<std::string_view, kNumModes> kModeNames = {
    "denial", "assert", "choice", "ambiguous", "not_mentioned"};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N>& names,
                        std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(DataCategory c) { return kCategoryNames[index_of(c)]; }
std::string_view to_string(DataAction a) { return kActionNames[index_of(a)]; }
std::string_view to_string(ActionMode m) { return kModeNames[index_of(m)]; }

std::optional<DataCategory> parse_category(std::string_view s) {
  return lookup<DataCategory>(kCategoryNames, s);
}
std::optional<DataAction> parse_action(std::string_view s) {
  return lookup<DataAction>(kActionNames, s);
}
std::optional<ActionMode> parse_mode(std::string_view s) {
  return lookup<ActionMode>(kModeNames, s);
}

DataCategory category_from(std::string_view s) {
  if (auto c = parse_category(s)) return *c;
  throw ParseError("unknown data category '" + std::string(s) + "'");
}
DataAction action_from(std::string_view s) {
  if (auto a = parse_action(s)) return *a;
  throw ParseError("unknown data action '" + std::string(s) + "'");
}
ActionMode mode_from(std::string_view s) {
  if (auto m = parse_mode(s)) return *m;
  throw ParseError("unknown action mode '" + std::string(s) + "'");
}

}  // namespace policyal
