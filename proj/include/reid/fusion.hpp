#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reid/error.hpp"
#include "reid/records.hpp"

namespace reid {

using Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Channel-major planes: one row per channel, H*W pixels per row.
template <typename Scalar>
using PlaneMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Shape of one feature map. A flat D-vector is {D, 1, 1}.
struct MapShape {
  Index channels = 0;
  Index height = 1;
  Index width = 1;

  Index size() const { return channels * height * width; }
  bool operator==(const MapShape&) const = default;
};

inline std::string describe(const MapShape& s) {
  std::ostringstream os;
  os << s.channels << "x" << s.height << "x" << s.width;
  return os.str();
}

/// K view-unit feature maps of one shape, one flattened map per row.
template <typename Scalar>
struct ViewUnitStack {
  MapShape shape;
  PlaneMatrix<Scalar> maps;

  Index units() const { return maps.rows(); }

  void validate() const {
    if (maps.cols() != shape.size())
      throw ValidationError("view unit maps have " + std::to_string(maps.cols()) +
                            " values, shape " + describe(shape) + " needs " +
                            std::to_string(shape.size()));
    if (!maps.allFinite()) throw ValidationError("view unit maps hold non-finite values");
  }
};

/// Numerically stable softmax: w_k = exp(z_k - max z) / sum_j exp(z_j - max z).
template <typename Derived>
Vector<typename Derived::Scalar> softmax_view_weights(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  if (logits.size() == 0) throw ValidationError("softmax of an empty logit vector");
  if (!logits.allFinite()) throw ValidationError("view logits must be finite");
  Vector<Scalar> shifted = logits.reshaped();
  shifted.array() -= shifted.maxCoeff();
  Vector<Scalar> e = shifted.array().exp();
  return e / e.sum();
}

/// Weighted sum of the view-unit maps, flattened like one stack row.
template <typename Scalar, typename Derived>
Vector<Scalar> fuse_view_units(const ViewUnitStack<Scalar>& stack,
                               const Eigen::MatrixBase<Derived>& weights) {
  stack.validate();
  if (weights.size() != stack.units())
    throw ValidationError("fusion got " + std::to_string(weights.size()) + " weights for " +
                          std::to_string(stack.units()) + " view units");
  return stack.maps.transpose() * weights.reshaped().template cast<Scalar>();
}

template <typename Scalar>
struct FusionGradients {
  ViewUnitStack<Scalar> grad_stack;
  Vector<Scalar> grad_logits;
};

/// Backward pass of softmax-weighted fusion. Each map receives w_k * grad_out;
/// the logits receive J^T (M grad_out) with J the softmax Jacobian
/// diag(w) - w w^T.
template <typename Scalar, typename DerivedG, typename DerivedZ>
FusionGradients<Scalar> fuse_backward(const Eigen::MatrixBase<DerivedG>& grad_out,
                                      const ViewUnitStack<Scalar>& stack,
                                      const Eigen::MatrixBase<DerivedZ>& logits) {
  stack.validate();
  if (grad_out.size() != stack.shape.size())
    throw ValidationError("output gradient has " + std::to_string(grad_out.size()) +
                          " values, expected " + std::to_string(stack.shape.size()));
  if (logits.size() != stack.units())
    throw ValidationError("fusion got " + std::to_string(logits.size()) + " logits for " +
                          std::to_string(stack.units()) + " view units");

  const Vector<Scalar> w = softmax_view_weights(logits.reshaped().template cast<Scalar>().eval());
  const Vector<Scalar> g = grad_out.reshaped().template cast<Scalar>();

  FusionGradients<Scalar> out;
  out.grad_stack.shape = stack.shape;
  out.grad_stack.maps = w * g.transpose();

  const Vector<Scalar> grad_w = stack.maps * g;
  // J^T grad_w with J = diag(w) - w w^T (symmetric).
  out.grad_logits = w.cwiseProduct(grad_w) - w * w.dot(grad_w);
  return out;
}

struct GradCheckEntry {
  std::string parameter;
  double max_rel_error = 0.0;
  Index count = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> per_parameter_errors;
  double step = 0.0;
};

/// |a - n| / max(|a|, |n|, 1e-8).
inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Compares fuse_backward against central differences of the scalar loss
/// L = <grad_out, fuse(stack, softmax(logits))>, perturbing every map value
/// and every logit by +-step. L and the difference quotient are evaluated in
/// long double: with a 1e-5 step, double rounding of L alone is ~1e-11 |L|,
/// which swamps gradients near 1e-7.
inline GradCheckReport gradient_check(const ViewUnitStack<double>& stack,
                                      const Eigen::Ref<const Eigen::VectorXd>& logits,
                                      const Eigen::Ref<const Eigen::VectorXd>& grad_out,
                                      double step = 1e-5) {
  using Wide = long double;
  const Vector<Wide> g_wide = grad_out.cast<Wide>();
  auto loss = [&](const ViewUnitStack<double>& s, const Eigen::VectorXd& z) {
    const Vector<Wide> w = softmax_view_weights(z.cast<Wide>().eval());
    const Vector<Wide> fused = s.maps.cast<Wide>().transpose() * w;
    return g_wide.dot(fused);
  };
  const auto analytic = fuse_backward(grad_out, stack, logits);

  GradCheckEntry maps{"view_unit_maps", 0.0, 0};
  ViewUnitStack<double> probe = stack;
  const Eigen::VectorXd z = logits;
  for (Index k = 0; k < stack.maps.rows(); ++k) {
    for (Index d = 0; d < stack.maps.cols(); ++d) {
      const double saved = probe.maps(k, d);
      probe.maps(k, d) = saved + step;
      const Wide up = loss(probe, z);
      probe.maps(k, d) = saved - step;
      const Wide down = loss(probe, z);
      probe.maps(k, d) = saved;
      const auto numeric = static_cast<double>((up - down) / (Wide(2) * step));
      maps.max_rel_error = std::max(maps.max_rel_error, relative_error(analytic.grad_stack.maps(k, d), numeric));
      ++maps.count;
    }
  }

  GradCheckEntry view_logits{"view_logits", 0.0, 0};
  Eigen::VectorXd zp = z;
  for (Index k = 0; k < z.size(); ++k) {
    zp[k] = z[k] + step;
    const Wide up = loss(stack, zp);
    zp[k] = z[k] - step;
    const Wide down = loss(stack, zp);
    zp[k] = z[k];
    const auto numeric = static_cast<double>((up - down) / (Wide(2) * step));
    view_logits.max_rel_error = std::max(view_logits.max_rel_error, relative_error(analytic.grad_logits[k], numeric));
    ++view_logits.count;
  }

  GradCheckReport report;
  report.step = step;
  report.max_rel_error = std::max(maps.max_rel_error, view_logits.max_rel_error);
  report.per_parameter_errors = {maps, view_logits};
  return report;
}

// -- Pose channels -----------------------------------------------------------

inline constexpr Index kImageChannels = 3;
inline constexpr Index kPoseJoints = 14;
inline constexpr Index kNetworkChannels = kImageChannels + kPoseJoints;

/// Joint order of the 14 pose confidence maps.
const std::array<std::string_view, kPoseJoints>& pose_joint_names();

/// Channel-major image of `channels` planes of H x W.
template <typename Scalar>
struct Planes {
  Index height = 0;
  Index width = 0;
  PlaneMatrix<Scalar> data;

  Index channels() const { return data.rows(); }

  static Planes zeros(Index channels, Index height, Index width) {
    return {height, width, PlaneMatrix<Scalar>::Zero(channels, height * width)};
  }
  Scalar at(Index c, Index y, Index x) const { return data(c, y * width + x); }
  Scalar& at(Index c, Index y, Index x) { return data(c, y * width + x); }
};

template <typename Scalar>
std::string describe(const Planes<Scalar>& p) {
  std::ostringstream os;
  os << p.channels() << "x" << p.height << "x" << p.width;
  return os.str();
}

/// 14 joint confidence maps. Values are raw estimator scores (not clamped).
template <typename Scalar>
struct PoseMapSet {
  Planes<Scalar> maps;
  std::vector<std::string> joint_names;

  void validate() const {
    if (maps.channels() != kPoseJoints)
      throw ValidationError("pose map set needs " + std::to_string(kPoseJoints) + " channels, got " +
                            std::to_string(maps.channels()));
    if (maps.data.cols() != maps.height * maps.width)
      throw ValidationError("pose map planes do not match their H x W");
    if (!joint_names.empty() && static_cast<Index>(joint_names.size()) != kPoseJoints)
      throw ValidationError("pose map set needs 14 joint names");
    if (!maps.data.allFinite()) throw ValidationError("pose maps hold non-finite values");
  }
};

template <typename Scalar>
PoseMapSet<Scalar> make_pose_map_set(Planes<Scalar> maps) {
  PoseMapSet<Scalar> set{std::move(maps), {}};
  for (auto name : pose_joint_names()) set.joint_names.emplace_back(name);
  set.validate();
  return set;
}

/// 17-channel network input: R, G, B, then the 14 joint maps in order.
template <typename Scalar>
Planes<Scalar> assemble_pose_input(const Planes<Scalar>& image, const PoseMapSet<Scalar>& pose) {
  pose.validate();
  if (image.channels() != kImageChannels || image.height != pose.maps.height ||
      image.width != pose.maps.width)
    throw ValidationError("shape mismatch: image " + describe(image) + ", pose maps " +
                          describe(pose.maps));
  Planes<Scalar> out{image.height, image.width, PlaneMatrix<Scalar>(kNetworkChannels, image.data.cols())};
  out.data << image.data, pose.maps.data;
  return out;
}

/// Inverse of assemble_pose_input.
template <typename Scalar>
std::pair<Planes<Scalar>, PoseMapSet<Scalar>> split_pose_input(const Planes<Scalar>& input) {
  if (input.channels() != kNetworkChannels)
    throw ValidationError("network input needs 17 channels, got " + std::to_string(input.channels()));
  Planes<Scalar> image{input.height, input.width, input.data.topRows(kImageChannels)};
  Planes<Scalar> pose{input.height, input.width, input.data.bottomRows(kPoseJoints)};
  return {std::move(image), make_pose_map_set(std::move(pose))};
}

/// Single gray plane holding the per-pixel maximum over all joint maps.
template <typename Scalar>
Planes<Scalar> pose_map_visualize(const PoseMapSet<Scalar>& pose) {
  pose.validate();
  return {pose.maps.height, pose.maps.width, pose.maps.data.colwise().maxCoeff()};
}

/// Spatial size after the view-predictor head: stride-3 and stride-2 padded
/// convolutions (ceil division) followed by an unpadded 5x5 convolution.
/// Throws if fewer than 5 positions remain before the 5x5 stage.
std::pair<Index, Index> view_head_output_dims(std::pair<Index, Index> input_hw);

/// Per-axis trace {input, after stride 3, after stride 2, output}.
std::array<Index, 4> view_head_trace(Index size);

/// Per-class pixelwise mean image, indexed by ViewLabel. Classes without
/// members stay std::nullopt.
template <typename Scalar>
std::array<std::optional<Planes<Scalar>>, kNumViews> mean_view_images(
    const std::vector<Planes<Scalar>>& images, const std::vector<ViewLabel>& views) {
  if (images.size() != views.size())
    throw ValidationError("mean_view_images: " + std::to_string(images.size()) + " images but " +
                          std::to_string(views.size()) + " view labels");
  std::array<std::optional<Planes<Scalar>>, kNumViews> sums;
  std::array<Index, kNumViews> counts{};
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (img.channels() != kImageChannels || img.height != images.front().height ||
        img.width != images.front().width)
      throw ValidationError("mean_view_images: image " + std::to_string(i) + " has shape " +
                            describe(img) + ", expected " + describe(images.front()));
    const auto v = static_cast<std::size_t>(views[i]);
    if (!sums[v]) sums[v] = Planes<Scalar>::zeros(kImageChannels, img.height, img.width);
    sums[v]->data += img.data;
    ++counts[v];
  }
  for (std::size_t v = 0; v < sums.size(); ++v)
    if (sums[v]) sums[v]->data /= static_cast<Scalar>(counts[v]);
  return sums;
}

}  // namespace reid
