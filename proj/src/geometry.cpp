#include "omnipd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "omnipd/errors.hpp"

namespace omnipd {

BoundingBox BoundingBox::make(double x_min, double y_min, double x_max, double y_max) {
  BoundingBox b{x_min, y_min, x_max, y_max};
  if (!b.valid()) {
    std::ostringstream os;
    os << "invalid bounding box " << b;
    throw ArgumentError(os.str());
  }
  return b;
}

bool BoundingBox::valid() const noexcept {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min <= x_max && y_min <= y_max;
}

std::ostream& operator<<(std::ostream& os, const BoundingBox& b) {
  return os << "(" << b.x_min << ", " << b.y_min << ", " << b.x_max << ", " << b.y_max << ")";
}

ImageDims ImageDims::make(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw ArgumentError("image dims must be positive, got " + std::to_string(width) + "x" +
                        std::to_string(height));
  }
  return ImageDims{width, height};
}

std::ostream& operator<<(std::ostream& os, const ImageDims& d) {
  return os << d.width << "x" << d.height;
}

double area(const BoundingBox& b) noexcept { return b.width() * b.height(); }

// The operation order here is mirrored exactly by the batch kernels in
// src/kernels; both must produce bit-identical results.
double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double ix0 = a.x_min > b.x_min ? a.x_min : b.x_min;
  const double iy0 = a.y_min > b.y_min ? a.y_min : b.y_min;
  const double ix1 = a.x_max < b.x_max ? a.x_max : b.x_max;
  const double iy1 = a.y_max < b.y_max ? a.y_max : b.y_max;
  const double dx = ix1 - ix0;
  const double dy = iy1 - iy0;
  const double iw = dx > 0.0 ? dx : 0.0;
  const double ih = dy > 0.0 ? dy : 0.0;
  const double inter = iw * ih;
  const double uni = (a.x_max - a.x_min) * (a.y_max - a.y_min) +
                     (b.x_max - b.x_min) * (b.y_max - b.y_min) - inter;
  if (!(uni > 0.0)) return 0.0;
  return inter / uni;
}

bool inside(const BoundingBox& b, ImageDims dims) noexcept {
  return b.valid() && b.x_min >= 0.0 && b.y_min >= 0.0 && b.x_max <= dims.width &&
         b.y_max <= dims.height;
}

bool operator==(const Sequence& a, const Sequence& b) { return a.steps == b.steps; }

std::ostream& operator<<(std::ostream& os, const GeometricTransform& t) {
  std::visit(
      [&os](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, HFlip>) {
          os << "HFlip";
        } else if constexpr (std::is_same_v<T, VFlip>) {
          os << "VFlip";
        } else if constexpr (std::is_same_v<T, Rot90>) {
          os << "Rot90{" << op.quarter_turns() << "}";
        } else if constexpr (std::is_same_v<T, Crop>) {
          os << "Crop" << op.rect;
        } else {
          os << "[";
          for (std::size_t i = 0; i < op.steps.size(); ++i) {
            if (i) os << ", ";
            os << op.steps[i];
          }
          os << "]";
        }
      },
      t.op);
  return os;
}

GeometricTransform compose(std::vector<GeometricTransform> ts) {
  return GeometricTransform(Sequence{std::move(ts)});
}

namespace {

void flatten_into(const GeometricTransform& t, std::vector<GeometricTransform>& out) {
  if (const auto* seq = std::get_if<Sequence>(&t.op)) {
    for (const auto& s : seq->steps) flatten_into(s, out);
    return;
  }
  if (const auto* rot = std::get_if<Rot90>(&t.op); rot && rot->quarter_turns() == 0) return;
  out.push_back(t);
}

bool is_integral(double v) { return std::floor(v) == v; }

void check_crop(const Crop& c, ImageDims dims) {
  const BoundingBox& r = c.rect;
  if (!inside(r, dims) || !is_integral(r.x_min) || !is_integral(r.y_min) ||
      !is_integral(r.x_max) || !is_integral(r.y_max) || !(area(r) > 0.0)) {
    std::ostringstream os;
    os << "crop rect " << r << " must be integer-aligned, non-empty and inside " << dims;
    throw ArgumentError(os.str());
  }
}

ImageDims crop_dims(const Crop& c) {
  return ImageDims{static_cast<int>(c.rect.width()), static_cast<int>(c.rect.height())};
}

// Single non-sequence step. Returns nullopt when a crop removes the box.
std::optional<BoundingBox> step_box(const GeometricTransform& t, ImageDims dims,
                                    const BoundingBox& b) {
  const double w = dims.width;
  const double h = dims.height;
  if (std::holds_alternative<HFlip>(t.op)) {
    return BoundingBox{w - b.x_max, b.y_min, w - b.x_min, b.y_max};
  }
  if (std::holds_alternative<VFlip>(t.op)) {
    return BoundingBox{b.x_min, h - b.y_max, b.x_max, h - b.y_min};
  }
  if (const auto* rot = std::get_if<Rot90>(&t.op)) {
    BoundingBox cur = b;
    double cur_w = w;
    double cur_h = h;
    for (int i = 0; i < rot->quarter_turns(); ++i) {
      cur = BoundingBox{cur.y_min, cur_w - cur.x_max, cur.y_max, cur_w - cur.x_min};
      std::swap(cur_w, cur_h);
    }
    return cur;
  }
  const auto& crop = std::get<Crop>(t.op);
  check_crop(crop, dims);
  const BoundingBox& r = crop.rect;
  const double x0 = std::max(b.x_min, r.x_min);
  const double y0 = std::max(b.y_min, r.y_min);
  const double x1 = std::min(b.x_max, r.x_max);
  const double y1 = std::min(b.y_max, r.y_max);
  if (!(x1 > x0) || !(y1 > y0)) return std::nullopt;
  return BoundingBox{x0 - r.x_min, y0 - r.y_min, x1 - r.x_min, y1 - r.y_min};
}

ImageDims step_dims(const GeometricTransform& t, ImageDims dims) {
  if (const auto* rot = std::get_if<Rot90>(&t.op)) {
    return rot->quarter_turns() % 2 ? ImageDims{dims.height, dims.width} : dims;
  }
  if (const auto* crop = std::get_if<Crop>(&t.op)) {
    check_crop(*crop, dims);
    return crop_dims(*crop);
  }
  return dims;
}

}  // namespace

std::vector<GeometricTransform> flatten(const GeometricTransform& t) {
  std::vector<GeometricTransform> out;
  flatten_into(t, out);
  return out;
}

ImageDims transform_dims(const GeometricTransform& t, ImageDims dims) {
  for (const auto& step : flatten(t)) dims = step_dims(step, dims);
  return dims;
}

namespace {

// A run of flips and rotations folded into one symmetry of the frame, so each
// output coordinate is a single subtraction from an input coordinate. Point
// (x, y) of the run's first frame lands at (fx ? ea - a : a, fy ? eb - b : b)
// with (a, b) = swap ? (y, x) : (x, y) and ea, eb their extents.
struct Orientation {
  bool swap = false;
  bool fx = false;
  bool fy = false;

  void apply(const GeometricTransform& t) {
    if (std::holds_alternative<HFlip>(t.op)) {
      fx = !fx;
    } else if (std::holds_alternative<VFlip>(t.op)) {
      fy = !fy;
    } else {
      for (int i = 0; i < std::get<Rot90>(t.op).quarter_turns(); ++i) {
        // (X, Y) -> (Y, W - X)
        const bool old_fx = fx;
        swap = !swap;
        fx = fy;
        fy = !old_fx;
      }
    }
  }

  BoundingBox map(const BoundingBox& b, ImageDims dims) const {
    const double ea = swap ? dims.height : dims.width;
    const double eb = swap ? dims.width : dims.height;
    const double a0 = swap ? b.y_min : b.x_min, a1 = swap ? b.y_max : b.x_max;
    const double b0 = swap ? b.x_min : b.y_min, b1 = swap ? b.x_max : b.y_max;
    return BoundingBox{fx ? ea - a1 : a0, fy ? eb - b1 : b0, fx ? ea - a0 : a1, fy ? eb - b0 : b1};
  }
};

}  // namespace

std::optional<std::pair<BoundingBox, ImageDims>> transform_box(const GeometricTransform& t,
                                                               ImageDims dims,
                                                               const BoundingBox& b) {
  if (!inside(b, dims)) {
    std::ostringstream os;
    os << "box " << b << " is not inside image " << dims;
    throw ArgumentError(os.str());
  }
  BoundingBox cur = b;
  ImageDims run_start = dims;
  Orientation run;
  for (const auto& step : flatten(t)) {
    if (!std::holds_alternative<Crop>(step.op)) {
      run.apply(step);
      dims = step_dims(step, dims);
      continue;
    }
    cur = run.map(cur, run_start);
    run = Orientation{};
    auto next = step_box(step, dims, cur);
    if (!next) return std::nullopt;
    cur = *next;
    dims = step_dims(step, dims);
    run_start = dims;
  }
  return std::make_pair(run.map(cur, run_start), dims);
}

bool is_invertible(const GeometricTransform& t) noexcept {
  for (const auto& step : flatten(t)) {
    if (std::holds_alternative<Crop>(step.op)) return false;
  }
  return true;
}

GeometricTransform inverse(const GeometricTransform& t) {
  auto steps = flatten(t);
  std::vector<GeometricTransform> inv;
  inv.reserve(steps.size());
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    if (std::holds_alternative<Crop>(it->op)) {
      throw ArgumentError("a crop has no inverse");
    }
    if (const auto* rot = std::get_if<Rot90>(&it->op)) {
      inv.emplace_back(Rot90{(4 - rot->quarter_turns()) % 4});
    } else {
      inv.push_back(*it);
    }
  }
  return compose(std::move(inv));
}

}  // namespace omnipd
