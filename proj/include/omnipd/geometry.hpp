#pragma once

#include <optional>
#include <ostream>
#include <utility>
#include <variant>
#include <vector>

namespace omnipd {

/// Axis-aligned box in continuous pixel coordinates.
///
/// Origin is the top-left image corner, x grows rightward and y downward.
/// Edges are continuous, so the width of a box is `x_max - x_min` and a
/// pixel (i, j) covers [i, i+1) x [j, j+1).
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  /// Validating constructor; throws ArgumentError on non-finite or inverted coordinates.
  static BoundingBox make(double x_min, double y_min, double x_max, double y_max);

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  bool valid() const noexcept;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

std::ostream& operator<<(std::ostream& os, const BoundingBox& b);

struct ImageDims {
  int width = 0;
  int height = 0;

  static ImageDims make(int width, int height);

  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

std::ostream& operator<<(std::ostream& os, const ImageDims& d);

double area(const BoundingBox& b) noexcept;

/// Intersection over union. Zero when the union has zero area.
double iou(const BoundingBox& a, const BoundingBox& b) noexcept;

/// True when the box lies inside [0, W] x [0, H].
bool inside(const BoundingBox& b, ImageDims dims) noexcept;

// ---------------------------------------------------------------------------
// Geometric transforms
// ---------------------------------------------------------------------------

struct HFlip {
  friend bool operator==(const HFlip&, const HFlip&) = default;
};

struct VFlip {
  friend bool operator==(const VFlip&, const VFlip&) = default;
};

/// Counter-clockwise rotation by k quarter turns. Point map for k = 1 is
/// (x, y) -> (y, W - x) and the frame becomes H x W. Any integer k is
/// accepted and reduced modulo 4.
struct Rot90 {
  int k = 1;
  int quarter_turns() const noexcept { return ((k % 4) + 4) % 4; }
  friend bool operator==(const Rot90& a, const Rot90& b) {
    return a.quarter_turns() == b.quarter_turns();
  }
};

/// Crop to an integer-aligned rectangle inside the image.
struct Crop {
  BoundingBox rect;
  friend bool operator==(const Crop&, const Crop&) = default;
};

struct GeometricTransform;

/// Transforms applied left to right. Empty is the identity.
struct Sequence {
  std::vector<GeometricTransform> steps;
  friend bool operator==(const Sequence&, const Sequence&);
};

struct GeometricTransform {
  std::variant<HFlip, VFlip, Rot90, Crop, Sequence> op;

  GeometricTransform() : op(Sequence{}) {}
  GeometricTransform(HFlip t) : op(t) {}
  GeometricTransform(VFlip t) : op(t) {}
  GeometricTransform(Rot90 t) : op(t) {}
  GeometricTransform(Crop t) : op(t) {}
  GeometricTransform(Sequence t) : op(std::move(t)) {}

  friend bool operator==(const GeometricTransform&, const GeometricTransform&) = default;
};

std::ostream& operator<<(std::ostream& os, const GeometricTransform& t);

/// Sequence whose application equals applying `ts` in order.
GeometricTransform compose(std::vector<GeometricTransform> ts);

/// Flattens nested sequences and drops identity rotations.
std::vector<GeometricTransform> flatten(const GeometricTransform& t);

/// Dimensions of the frame after applying `t` to an image of `dims`.
/// Throws ArgumentError when a crop does not fit the frame it is applied to.
ImageDims transform_dims(const GeometricTransform& t, ImageDims dims);

/// Maps a box into the transformed frame.
///
/// Returns the box together with the transformed frame's dims, or nullopt
/// when a crop clips the box to zero area. Throws ArgumentError when the box
/// is outside the image or a crop rectangle is outside the frame.
std::optional<std::pair<BoundingBox, ImageDims>> transform_box(const GeometricTransform& t,
                                                               ImageDims dims,
                                                               const BoundingBox& b);

/// Inverse of a chain of flips and quarter turns. Throws ArgumentError for crops.
GeometricTransform inverse(const GeometricTransform& t);

/// True when `t` contains no crop.
bool is_invertible(const GeometricTransform& t) noexcept;

}  // namespace omnipd
