#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "omnipd/geometry.hpp"
#include "omnipd/image.hpp"

namespace omnipd {

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// Identifies one reproducible random stream.
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

/// 64-bit FNV-1a of a string, used to derive per-image stream ids.
std::uint64_t stream_id_for(std::string_view key) noexcept;

/// Random source whose draws depend only on (seed, stream_id).
///
/// Uses mt19937_64 for raw bits (fully specified by the standard) and derives
/// every variate from those bits directly, since std:: distributions are not
/// portable across standard libraries.
class Rng {
public:
  explicit Rng(RngState state);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer on [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n);
  /// True with probability p. p <= 0 never draws true, p >= 1 always does; a
  /// value is consumed either way so the draw sequence does not depend on p.
  bool bernoulli(double p);
  /// Index drawn with the given weights.
  std::size_t categorical(std::span<const double> weights);

private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

struct ColorJitterParams {
  double brightness_delta = 32.0;
  std::pair<double, double> contrast_range{0.5, 1.5};
  std::pair<double, double> saturation_range{0.5, 1.5};
  double hue_delta = 18.0;  // degrees
  /// Probability of each of the four distortions, drawn independently.
  double p_each = 0.5;
};

struct CropParams {
  /// Minimum IoU with any box; nullopt means "keep the whole image".
  std::vector<std::optional<double>> min_iou_choices{0.1, 0.3, 0.5, 0.7, 0.9, std::nullopt};
  double min_scale = 0.3;
  double max_scale = 1.0;
  double max_aspect_ratio = 2.0;
  int attempts = 50;
};

struct AugmentPolicy {
  double p_crop = 1.0;
  double p_hflip = 0.5;
  double p_vflip = 0.5;
  std::array<double, 4> rot90_probs{0.25, 0.25, 0.25, 0.25};
  double p_color = 0.5;
  double p_gray = 0.1;
  ColorJitterParams color_jitter;
  CropParams crop;

  /// Policy that draws nothing: every chain is the identity.
  static AugmentPolicy identity();
};

/// Throws ArgumentError when a probability or range is out of bounds.
void validate(const AugmentPolicy& policy);

nlohmann::json to_json(const AugmentPolicy& policy);
/// Missing fields keep their defaults. Throws SchemaError on bad types or values.
AugmentPolicy policy_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Chains
// ---------------------------------------------------------------------------

/// Concrete photometric distortion; unset members are skipped.
struct ColorJitter {
  std::optional<double> brightness;  // additive delta
  std::optional<double> contrast;    // factor about the per-channel mean
  std::optional<double> saturation;  // factor on HSV saturation
  std::optional<double> hue;         // degrees added to HSV hue

  bool is_identity() const noexcept { return !brightness && !contrast && !saturation && !hue; }
  friend bool operator==(const ColorJitter&, const ColorJitter&) = default;
};

struct AugmentChain {
  GeometricTransform geometry;  // Sequence in draw order: crop, hflip, vflip, rot90
  ColorJitter color;
  bool gray = false;

  bool is_identity() const;
  friend bool operator==(const AugmentChain&, const AugmentChain&) = default;
};

nlohmann::json to_json(const AugmentChain& chain);

/// Draws a chain in the fixed order crop, hflip, vflip, rot90, color, gray.
///
/// The crop needs the frame and its boxes: candidate windows are rejected
/// until one overlaps at least one box by the drawn minimum IoU.
AugmentChain sample_chain(const AugmentPolicy& policy, Rng& rng, ImageDims dims,
                          std::span<const BoundingBox> boxes);
AugmentChain sample_chain(const AugmentPolicy& policy, RngState state, ImageDims dims,
                          std::span<const BoundingBox> boxes);

ColorJitter sample_color_jitter(const ColorJitterParams& params, Rng& rng);

/// Applies a concrete distortion to an RGB image. Results are rounded half
/// to even and clamped to [0, 255].
Image apply_color_jitter(const Image& image, const ColorJitter& jitter);

/// Samples a distortion from `params` and applies it.
Image color_jitter(const Image& image, const ColorJitterParams& params, Rng& rng);

/// Luma replicated to all three channels (dispatches to the SIMD kernels).
Image rgb_to_gray(const Image& image);

struct AugmentedSample {
  Image image;
  std::vector<BoundingBox> boxes;
  /// For each output box, the index of the input box it came from.
  std::vector<std::size_t> source_index;
};

/// Applies `chain` to pixels and boxes. Boxes clipped away by a crop are
/// dropped, preserving order. Throws ArgumentError when a box does not fit the image.
AugmentedSample augment_sample(const Image& image, std::span<const BoundingBox> boxes,
                               const AugmentChain& chain);

}  // namespace omnipd
