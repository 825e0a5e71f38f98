#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "omnipd/geometry.hpp"
#include "omnipd/image.hpp"

namespace omnipd {

/// Equidistant fisheye camera: a ray at angle theta from the optical axis
/// lands at radius focal * theta from the principal point.
///
/// Camera frame: x right, y down, z along the optical axis.
struct FisheyeModel {
  double focal = 0.0;  // pixels per radian
  Eigen::Vector2d principal_point{0.0, 0.0};
  ImageDims dims;
  double fov = 0.0;  // full field of view, radians

  /// Throws ArgumentError unless focal > 0, 0 < fov <= pi, the image circle
  /// (radius focal * fov / 2) fits in min(W, H) / 2, and the principal point
  /// is inside the image.
  static FisheyeModel make(double focal, Eigen::Vector2d principal_point, ImageDims dims,
                           double fov);

  double circle_radius() const noexcept { return focal * fov / 2.0; }
};

struct PinholeIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// World-to-camera transform: x_cam = rotation * x_world + translation.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  /// Rotation from intrinsic x-y-z angles in radians (roll about x, then
  /// pitch about y, then yaw about z), composed as Rz * Ry * Rx.
  static CameraPose from_euler(double roll, double pitch, double yaw,
                               Eigen::Vector3d translation = Eigen::Vector3d::Zero());

  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
};

/// Throws ArgumentError unless the rotation is orthonormal with det +1 (tolerance 1e-9).
void validate(const CameraPose& pose);

/// Pixel position of a unit ray, or nullopt outside the field of view.
/// Throws ArgumentError unless |ray| = 1 within 1e-9.
std::optional<Eigen::Vector2d> project(const FisheyeModel& model, const Eigen::Vector3d& ray);

/// Unit ray through a pixel position, or nullopt outside the image circle.
std::optional<Eigen::Vector3d> unproject(const FisheyeModel& model, const Eigen::Vector2d& pixel);

/// Maps a continuous pixel position to another frame, nullopt when it has no image.
using PixelMap = std::function<std::optional<Eigen::Vector2d>(const Eigen::Vector2d&)>;

inline constexpr int kDefaultSamplesPerEdge = 8;

/// Enclosing box of `samples_per_edge` points per box edge (corners included)
/// after mapping, keeping points that land inside `dst` (within 1e-6 px), and
/// clipped to `dst`. Nullopt when no sample lands. Throws ArgumentError when
/// samples_per_edge < 2.
std::optional<BoundingBox> remap_box(const PixelMap& mapper, const BoundingBox& box,
                                     int samples_per_edge, ImageDims dst);

/// Virtual fisheye camera looking at a perspective image.
///
/// The source image is the plane z = plane_depth in the source camera frame,
/// which doubles as the world frame. The fisheye camera sits at
/// `pose.center()`; with zero translation the warp is a pure rotation and the
/// plane depth has no effect.
struct FisheyeScene {
  PinholeIntrinsics source;
  CameraPose pose;
  FisheyeModel model;
  double plane_depth = 1.0;

  /// Throws ArgumentError for an invalid pose or a camera at or beyond the plane.
  void validate() const;

  /// Source pixel seen by a fisheye pixel.
  std::optional<Eigen::Vector2d> fisheye_to_source(const Eigen::Vector2d& pixel) const;
  /// Fisheye pixel showing a source pixel.
  std::optional<Eigen::Vector2d> source_to_fisheye(const Eigen::Vector2d& pixel) const;
};

struct WarpResult {
  Image image;
  std::vector<BoundingBox> boxes;
  /// Index into the input boxes for each output box.
  std::vector<std::size_t> source_index;
};

/// Inverse-mapped warp of a perspective image into the fisheye frame.
/// Bilinear sampling, black outside the source or the image circle.
WarpResult warp_to_fisheye(const Image& src, std::span<const BoundingBox> boxes,
                           const FisheyeScene& scene,
                           int samples_per_edge = kDefaultSamplesPerEdge);

/// Four source points and where they go.
struct QuadTransform {
  std::array<Eigen::Vector2d, 4> src;
  std::array<Eigen::Vector2d, 4> dst;

  QuadTransform inverted() const { return QuadTransform{dst, src}; }
};

/// Homography taking quad.src[i] to quad.dst[i]. Throws ArgumentError when
/// three points of either quad are collinear.
Eigen::Matrix3d homography(const QuadTransform& quad);

/// Applies a homography to a point; nullopt when it maps to infinity.
std::optional<Eigen::Vector2d> apply_homography(const Eigen::Matrix3d& h, const Eigen::Vector2d& p);

/// Warps pixels (inverse mapping, bilinear, black fill) and boxes by the
/// homography of `quad`. Output dims default to the input dims.
WarpResult four_point_warp(const Image& image, std::span<const BoundingBox> boxes,
                           const QuadTransform& quad, std::optional<ImageDims> out_dims = {},
                           int samples_per_edge = kDefaultSamplesPerEdge);

/// Bilinear sample at a continuous position (pixel centres at +0.5).
/// Writes black when the position is outside [0, W] x [0, H].
void sample_bilinear(const Image& src, double x, double y, std::span<std::uint8_t> out);

}  // namespace omnipd
