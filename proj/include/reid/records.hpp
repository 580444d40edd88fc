#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace reid {

/// Person id reserved for distractor / junk gallery entries.
inline constexpr int kJunkPersonId = -1;

enum class Split { train, test, query, gallery, distractor };
enum class ViewLabel { front, back, side };

inline constexpr int kNumViews = 3;

std::string_view to_string(Split split);
std::string_view to_string(ViewLabel view);
std::optional<Split> parse_split(std::string_view text);
std::optional<ViewLabel> parse_view_label(std::string_view text);

/// One image of a dataset, with every column any workflow here consumes.
struct ImageRecord {
  std::string image_id;
  int person_id = 0;
  int camera_id = 0;
  Split split = Split::test;
  std::optional<ViewLabel> view_label;
  std::optional<double> det_confidence;
  std::optional<long long> frame_id;
  std::optional<std::string> tracklet_id;

  bool operator==(const ImageRecord&) const = default;
};

}  // namespace reid
