#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace policyal {

enum class DataCategory : std::uint8_t {
  kContact,
  kLocation,
  kDevice,
  kDemographic,
  kFinancial,
  kHealth,
  kSurvey,
  kPersonalIdentifier,
  kSocialMedia,
};

inline constexpr std::size_t kNumCategories = 9;
inline constexpr std::array<DataCategory, kNumCategories> kAllCategories = {
    DataCategory::kContact,   DataCategory::kLocation,  DataCategory::kDevice,
    DataCategory::kDemographic, DataCategory::kFinancial, DataCategory::kHealth,
    DataCategory::kSurvey,    DataCategory::kPersonalIdentifier,
    DataCategory::kSocialMedia,
};

enum class DataAction : std::uint8_t { kCollectUse, kShare, kStore };

inline constexpr std::size_t kNumActions = 3;
inline constexpr std::array<DataAction, kNumActions> kAllActions = {
    DataAction::kCollectUse, DataAction::kShare, DataAction::kStore};

// Ordinals double as the 5-class Action Model class indices.
enum class ActionMode : std::uint8_t {
  kDenial = 0,
  kAssert = 1,
  kChoice = 2,
  kAmbiguous = 3,
  kNotMentioned = 4,
};

inline constexpr std::size_t kNumModes = 5;
inline constexpr std::array<ActionMode, kNumModes> kAllModes = {
    ActionMode::kDenial, ActionMode::kAssert, ActionMode::kChoice,
    ActionMode::kAmbiguous, ActionMode::kNotMentioned};

// Binary Category Model class order.
inline constexpr std::size_t kIrrelevant = 0;
inline constexpr std::size_t kRelevant = 1;

using ModeTriple = std::array<ActionMode, kNumActions>;

inline constexpr ModeTriple kAllNotMentioned = {
    ActionMode::kNotMentioned, ActionMode::kNotMentioned, ActionMode::kNotMentioned};

std::string_view to_string(DataCategory c);
std::string_view to_string(DataAction a);
std::string_view to_string(ActionMode m);

std::optional<DataCategory> parse_category(std::string_view s);
std::optional<DataAction> parse_action(std::string_view s);
std::optional<ActionMode> parse_mode(std::string_view s);

// Throwing variants for config and wire parsing.
DataCategory category_from(std::string_view s);
DataAction action_from(std::string_view s);
ActionMode mode_from(std::string_view s);

constexpr std::size_t index_of(DataCategory c) { return static_cast<std::size_t>(c); }
constexpr std::size_t index_of(DataAction a) { return static_cast<std::size_t>(a); }
constexpr std::size_t index_of(ActionMode m) { return static_cast<std::size_t>(m); }

}  // namespace policyal
