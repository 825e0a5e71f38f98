#include "omnipd/fisheye.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "omnipd/errors.hpp"

namespace omnipd {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

FisheyeModel FisheyeModel::make(double focal, Vector2d principal_point, ImageDims dims, double fov) {
  if (!(focal > 0.0) || !std::isfinite(focal)) throw ArgumentError("fisheye focal must be > 0");
  if (!(fov > 0.0 && fov <= std::numbers::pi)) throw ArgumentError("fisheye fov must be in (0, pi]");
  ImageDims::make(dims.width, dims.height);
  const double limit = std::min(dims.width, dims.height) / 2.0;
  if (focal * fov / 2.0 > limit * (1.0 + 1e-12)) {
    throw ArgumentError("fisheye image circle (radius " + std::to_string(focal * fov / 2.0) +
                        ") does not fit the image");
  }
  if (!(principal_point.x() >= 0.0 && principal_point.x() <= dims.width &&
        principal_point.y() >= 0.0 && principal_point.y() <= dims.height)) {
    throw ArgumentError("fisheye principal point must be inside the image");
  }
  return FisheyeModel{focal, principal_point, dims, fov};
}

CameraPose CameraPose::from_euler(double roll, double pitch, double yaw, Vector3d translation) {
  const Matrix3d r = (Eigen::AngleAxisd(yaw, Vector3d::UnitZ()) *
                      Eigen::AngleAxisd(pitch, Vector3d::UnitY()) *
                      Eigen::AngleAxisd(roll, Vector3d::UnitX()))
                         .toRotationMatrix();
  return CameraPose{r, translation};
}

void validate(const CameraPose& pose) {
  const Matrix3d& r = pose.rotation;
  if (!r.allFinite() || !pose.translation.allFinite()) {
    throw ArgumentError("camera pose must be finite");
  }
  if ((r.transpose() * r - Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(r.determinant() - 1.0) > 1e-9) {
    throw ArgumentError("camera pose rotation must be orthonormal with determinant +1");
  }
}

std::optional<Vector2d> project(const FisheyeModel& model, const Vector3d& ray) {
  const double n = ray.norm();
  if (!(std::abs(n - 1.0) <= 1e-9)) {
    throw ArgumentError("project expects a unit ray, got norm " + std::to_string(n));
  }
  const double rho = std::hypot(ray.x(), ray.y());
  const double theta = std::atan2(rho, ray.z());
  if (theta > model.fov / 2.0) return std::nullopt;
  if (rho == 0.0) return model.principal_point;
  const double r = model.focal * theta;
  return Vector2d(model.principal_point.x() + r * ray.x() / rho,
                  model.principal_point.y() + r * ray.y() / rho);
}

std::optional<Vector3d> unproject(const FisheyeModel& model, const Vector2d& pixel) {
  if (!pixel.allFinite()) return std::nullopt;
  const double dx = pixel.x() - model.principal_point.x();
  const double dy = pixel.y() - model.principal_point.y();
  const double r = std::hypot(dx, dy);
  const double theta = r / model.focal;
  if (theta > model.fov / 2.0) return std::nullopt;
  if (r == 0.0) return Vector3d::UnitZ();
  const double s = std::sin(theta);
  return Vector3d(s * dx / r, s * dy / r, std::cos(theta));
}

std::optional<BoundingBox> remap_box(const PixelMap& mapper, const BoundingBox& box,
                                     int samples_per_edge, ImageDims dst) {
  if (samples_per_edge < 2) throw ArgumentError("remap_box needs at least 2 samples per edge");
  constexpr double kLandTolerance = 1e-6;
  const double w = dst.width;
  const double h = dst.height;

  double x0 = std::numeric_limits<double>::infinity();
  double y0 = x0;
  double x1 = -x0;
  double y1 = -x0;
  bool landed = false;
  auto visit = [&](double x, double y) {
    const auto p = mapper(Vector2d(x, y));
    if (!p || !p->allFinite()) return;
    if (p->x() < -kLandTolerance || p->x() > w + kLandTolerance || p->y() < -kLandTolerance ||
        p->y() > h + kLandTolerance) {
      return;
    }
    landed = true;
    x0 = std::min(x0, p->x());
    y0 = std::min(y0, p->y());
    x1 = std::max(x1, p->x());
    y1 = std::max(y1, p->y());
  };

  const int last = samples_per_edge - 1;
  for (int i = 0; i <= last; ++i) {
    const double t = static_cast<double>(i) / last;
    const double x = box.x_min + t * (box.x_max - box.x_min);
    const double y = box.y_min + t * (box.y_max - box.y_min);
    visit(x, box.y_min);
    visit(x, box.y_max);
    visit(box.x_min, y);
    visit(box.x_max, y);
  }
  if (!landed) return std::nullopt;
  return BoundingBox{std::clamp(x0, 0.0, w), std::clamp(y0, 0.0, h), std::clamp(x1, 0.0, w),
                     std::clamp(y1, 0.0, h)};
}

void FisheyeScene::validate() const {
  omnipd::validate(pose);
  if (!(source.fx > 0.0) || !(source.fy > 0.0)) {
    throw ArgumentError("source focal lengths must be > 0");
  }
  if (!(plane_depth > 0.0)) throw ArgumentError("plane depth must be > 0");
  if (!(pose.center().z() < plane_depth)) {
    throw ArgumentError("fisheye camera must be in front of the source plane");
  }
}

std::optional<Vector2d> FisheyeScene::fisheye_to_source(const Vector2d& pixel) const {
  const auto ray = unproject(model, pixel);
  if (!ray) return std::nullopt;
  const Vector3d dir = pose.rotation.transpose() * *ray;
  const Vector3d c = pose.center();
  if (!(dir.z() > 0.0)) return std::nullopt;
  const double s = (plane_depth - c.z()) / dir.z();
  const Vector3d p = c + s * dir;
  return Vector2d(source.fx * p.x() / p.z() + source.cx, source.fy * p.y() / p.z() + source.cy);
}

std::optional<Vector2d> FisheyeScene::source_to_fisheye(const Vector2d& pixel) const {
  const Vector3d p(plane_depth * (pixel.x() - source.cx) / source.fx,
                   plane_depth * (pixel.y() - source.cy) / source.fy, plane_depth);
  const Vector3d cam = pose.rotation * p + pose.translation;
  const double n = cam.norm();
  if (!(n > 0.0)) return std::nullopt;
  return project(model, cam / n);
}

void sample_bilinear(const Image& src, double x, double y, std::span<std::uint8_t> out) {
  const int channels = src.channels();
  if (!(x >= 0.0 && x <= src.width() && y >= 0.0 && y <= src.height())) {
    std::fill(out.begin(), out.begin() + channels, std::uint8_t{0});
    return;
  }
  const double fx = x - 0.5;
  const double fy = y - 0.5;
  const double flx = std::floor(fx);
  const double fly = std::floor(fy);
  const double ax = fx - flx;
  const double ay = fy - fly;
  const int x0 = std::clamp(static_cast<int>(flx), 0, src.width() - 1);
  const int y0 = std::clamp(static_cast<int>(fly), 0, src.height() - 1);
  const int x1 = std::clamp(static_cast<int>(flx) + 1, 0, src.width() - 1);
  const int y1 = std::clamp(static_cast<int>(fly) + 1, 0, src.height() - 1);
  for (int c = 0; c < channels; ++c) {
    const double v = (1.0 - ax) * (1.0 - ay) * src.at(x0, y0, c) + ax * (1.0 - ay) * src.at(x1, y0, c) +
                     (1.0 - ax) * ay * src.at(x0, y1, c) + ax * ay * src.at(x1, y1, c);
    out[static_cast<std::size_t>(c)] =
        static_cast<std::uint8_t>(std::nearbyint(std::clamp(v, 0.0, 255.0)));
  }
}

namespace {

template <typename InverseMap>
Image inverse_warp(const Image& src, ImageDims out_dims, InverseMap&& to_source) {
  Image dst(out_dims.width, out_dims.height, src.channels());
  const auto channels = static_cast<std::size_t>(src.channels());
  auto pixels = dst.pixels();
  for (int j = 0; j < out_dims.height; ++j) {
    for (int i = 0; i < out_dims.width; ++i) {
      const auto offset = (static_cast<std::size_t>(j) * out_dims.width + i) * channels;
      const auto px = pixels.subspan(offset, channels);
      if (const auto s = to_source(Vector2d(i + 0.5, j + 0.5))) {
        sample_bilinear(src, s->x(), s->y(), px);
      }
    }
  }
  return dst;
}

WarpResult remap_boxes(Image image, std::span<const BoundingBox> boxes, const PixelMap& forward,
                       int samples_per_edge) {
  WarpResult out;
  const ImageDims dims = image.dims();
  out.image = std::move(image);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (auto b = remap_box(forward, boxes[i], samples_per_edge, dims)) {
      out.boxes.push_back(*b);
      out.source_index.push_back(i);
    }
  }
  return out;
}

}  // namespace

WarpResult warp_to_fisheye(const Image& src, std::span<const BoundingBox> boxes,
                           const FisheyeScene& scene, int samples_per_edge) {
  scene.validate();
  Image dst = inverse_warp(src, scene.model.dims,
                           [&scene](const Vector2d& p) { return scene.fisheye_to_source(p); });
  return remap_boxes(std::move(dst), boxes,
                     [&scene](const Vector2d& p) { return scene.source_to_fisheye(p); },
                     samples_per_edge);
}

namespace {

bool collinear(const Vector2d& a, const Vector2d& b, const Vector2d& c) {
  const Vector2d u = b - a;
  const Vector2d v = c - a;
  const double cross = u.x() * v.y() - u.y() * v.x();
  const double scale = std::max({u.squaredNorm(), v.squaredNorm(), 1e-300});
  return std::abs(cross) <= 1e-10 * scale;
}

void check_quad(const std::array<Vector2d, 4>& q, const char* which) {
  for (const auto& p : q) {
    if (!p.allFinite()) throw ArgumentError(std::string(which) + " quad has a non-finite point");
  }
  for (int skip = 0; skip < 4; ++skip) {
    std::array<Vector2d, 3> t;
    int n = 0;
    for (int i = 0; i < 4; ++i) {
      if (i != skip) t[n++] = q[i];
    }
    if (collinear(t[0], t[1], t[2])) {
      throw ArgumentError(std::string(which) + " quad has three collinear points");
    }
  }
}

}  // namespace

Matrix3d homography(const QuadTransform& quad) {
  check_quad(quad.src, "source");
  check_quad(quad.dst, "destination");

  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = quad.src[i].x(), y = quad.src[i].y();
    const double u = quad.dst[i].x(), v = quad.dst[i].y();
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
  if (!lu.isInvertible()) throw ArgumentError("four-point correspondence is degenerate");
  const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
  Matrix3d m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  if (!m.allFinite() || std::abs(m.determinant()) < 1e-12) {
    throw ArgumentError("four-point homography is not invertible");
  }
  return m;
}

std::optional<Vector2d> apply_homography(const Matrix3d& h, const Vector2d& p) {
  const Vector3d q = h * p.homogeneous();
  if (!(std::abs(q.z()) > 1e-15)) return std::nullopt;
  return Vector2d(q.x() / q.z(), q.y() / q.z());
}

WarpResult four_point_warp(const Image& image, std::span<const BoundingBox> boxes,
                           const QuadTransform& quad, std::optional<ImageDims> out_dims,
                           int samples_per_edge) {
  const Matrix3d forward = homography(quad);
  const Matrix3d backward = homography(quad.inverted());
  const ImageDims dims = out_dims.value_or(image.dims());
  Image dst = inverse_warp(image, dims,
                           [&backward](const Vector2d& p) { return apply_homography(backward, p); });
  return remap_boxes(std::move(dst), boxes,
                     [&forward](const Vector2d& p) { return apply_homography(forward, p); },
                     samples_per_edge);
}

}  // namespace omnipd
