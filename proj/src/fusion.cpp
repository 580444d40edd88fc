#include "reid/fusion.hpp"

namespace reid {

const std::array<std::string_view, kPoseJoints>& pose_joint_names() {
  static constexpr std::array<std::string_view, kPoseJoints> names{
      "right_ankle",    "right_knee", "right_hip",  "left_hip",    "left_knee",
      "left_ankle",     "right_wrist", "right_elbow", "right_shoulder", "left_shoulder",
      "left_elbow",     "left_wrist", "neck",       "head_top"};
  return names;
}

std::array<Index, 4> view_head_trace(Index size) {
  if (size < 1) throw ValidationError("view head input size must be positive");
  const Index after_stride3 = (size + 2) / 3;
  const Index after_stride2 = (after_stride3 + 1) / 2;
  if (after_stride2 < 5)
    throw ValidationError("input too small for 5x5 valid convolution: " + std::to_string(size) +
                          " -> " + std::to_string(after_stride3) + " -> " +
                          std::to_string(after_stride2));
  return {size, after_stride3, after_stride2, after_stride2 - 5 + 1};
}

std::pair<Index, Index> view_head_output_dims(std::pair<Index, Index> input_hw) {
  return {view_head_trace(input_hw.first)[3], view_head_trace(input_hw.second)[3]};
}

}  // namespace reid
