#include "reid/records.hpp"

#include <array>
#include <utility>

namespace reid {

namespace {

constexpr std::array<std::pair<Split, std::string_view>, 5> kSplitNames{{
    {Split::train, "train"},
    {Split::test, "test"},
    {Split::query, "query"},
    {Split::gallery, "gallery"},
    {Split::distractor, "distractor"},
}};

constexpr std::array<std::pair<ViewLabel, std::string_view>, 3> kViewNames{{
    {ViewLabel::front, "front"},
    {ViewLabel::back, "back"},
    {ViewLabel::side, "side"},
}};

}  // namespace

std::string_view to_string(Split split) {
  for (const auto& [value, name] : kSplitNames)
    if (value == split) return name;
  return "?";
}

std::string_view to_string(ViewLabel view) {
  for (const auto& [value, name] : kViewNames)
    if (value == view) return name;
  return "?";
}

std::optional<Split> parse_split(std::string_view text) {
  for (const auto& [value, name] : kSplitNames)
    if (name == text) return value;
  return std::nullopt;
}

std::optional<ViewLabel> parse_view_label(std::string_view text) {
  for (const auto& [value, name] : kViewNames)
    if (name == text) return value;
  return std::nullopt;
}

}  // namespace reid
