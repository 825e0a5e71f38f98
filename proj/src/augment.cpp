#include "omnipd/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "omnipd/errors.hpp"
#include "omnipd/kernels.hpp"

namespace omnipd {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

std::uint64_t stream_id_for(std::string_view key) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {
std::mt19937_64 make_engine(RngState s) {
  std::seed_seq seq{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32),
                    static_cast<std::uint32_t>(s.stream_id),
                    static_cast<std::uint32_t>(s.stream_id >> 32)};
  return std::mt19937_64(seq);
}
}  // namespace

Rng::Rng(RngState state) : engine_(make_engine(state)) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ArgumentError("Rng::below requires n > 0");
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return r % n;
  }
}

bool Rng::bernoulli(double p) { return uniform() < p; }

std::size_t Rng::categorical(std::span<const double> weights) {
  if (weights.empty()) throw ArgumentError("Rng::categorical needs at least one weight");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double u = uniform() * total;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    cum += weights[i];
    last_positive = i;
    if (u < cum) return i;
  }
  return last_positive;
}

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

AugmentPolicy AugmentPolicy::identity() {
  AugmentPolicy p;
  p.p_crop = 0.0;
  p.p_hflip = 0.0;
  p.p_vflip = 0.0;
  p.rot90_probs = {1.0, 0.0, 0.0, 0.0};
  p.p_color = 0.0;
  p.p_gray = 0.0;
  return p;
}

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ArgumentError(std::string("policy: ") + name + " must be in [0, 1]");
  }
}

void check_range(const std::pair<double, double>& r, const char* name) {
  if (!(r.first >= 0.0 && r.first <= r.second && std::isfinite(r.second))) {
    throw ArgumentError(std::string("policy: ") + name + " must satisfy 0 <= lo <= hi");
  }
}

}  // namespace

void validate(const AugmentPolicy& p) {
  check_probability(p.p_crop, "p_crop");
  check_probability(p.p_hflip, "p_hflip");
  check_probability(p.p_vflip, "p_vflip");
  check_probability(p.p_color, "p_color");
  check_probability(p.p_gray, "p_gray");
  for (double q : p.rot90_probs) check_probability(q, "rot90_probs");
  const double sum = std::accumulate(p.rot90_probs.begin(), p.rot90_probs.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("policy: rot90_probs must sum to 1");

  const auto& c = p.color_jitter;
  check_probability(c.p_each, "color_jitter.p_each");
  if (!(c.brightness_delta >= 0.0) || !(c.hue_delta >= 0.0) || !std::isfinite(c.brightness_delta) ||
      !std::isfinite(c.hue_delta)) {
    throw ArgumentError("policy: color deltas must be finite and >= 0");
  }
  check_range(c.contrast_range, "contrast_range");
  check_range(c.saturation_range, "saturation_range");

  const auto& k = p.crop;
  if (k.min_iou_choices.empty()) throw ArgumentError("policy: crop.min_iou_choices is empty");
  for (const auto& m : k.min_iou_choices) {
    if (m) check_probability(*m, "crop.min_iou_choices");
  }
  if (!(k.min_scale > 0.0 && k.min_scale <= k.max_scale && k.max_scale <= 1.0)) {
    throw ArgumentError("policy: crop scales must satisfy 0 < min_scale <= max_scale <= 1");
  }
  if (!(k.max_aspect_ratio >= 1.0) || !std::isfinite(k.max_aspect_ratio)) {
    throw ArgumentError("policy: crop.max_aspect_ratio must be >= 1");
  }
  if (k.attempts < 1) throw ArgumentError("policy: crop.attempts must be >= 1");
}

json to_json(const AugmentPolicy& p) {
  json choices = json::array();
  for (const auto& m : p.crop.min_iou_choices) choices.push_back(m ? json(*m) : json(nullptr));
  const auto& c = p.color_jitter;
  return {
      {"p_crop", p.p_crop},
      {"p_hflip", p.p_hflip},
      {"p_vflip", p.p_vflip},
      {"rot90_probs", p.rot90_probs},
      {"p_color", p.p_color},
      {"p_gray", p.p_gray},
      {"color_jitter",
       {{"brightness_delta", c.brightness_delta},
        {"contrast_range", {c.contrast_range.first, c.contrast_range.second}},
        {"saturation_range", {c.saturation_range.first, c.saturation_range.second}},
        {"hue_delta", c.hue_delta},
        {"p_each", c.p_each}}},
      {"crop",
       {{"min_iou_choices", std::move(choices)},
        {"min_scale", p.crop.min_scale},
        {"max_scale", p.crop.max_scale},
        {"max_aspect_ratio", p.crop.max_aspect_ratio},
        {"attempts", p.crop.attempts}}},
  };
}

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(std::string("policy field '") + key + "' has the wrong type");
  }
}

void read_pair(const json& j, const char* key, std::pair<double, double>& dst) {
  if (!j.contains(key)) return;
  std::vector<double> v;
  read_opt(j, key, v);
  if (v.size() != 2) throw SchemaError(std::string("policy field '") + key + "' needs 2 values");
  dst = {v[0], v[1]};
}

}  // namespace

AugmentPolicy policy_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("policy must be a JSON object");
  AugmentPolicy p;
  read_opt(j, "p_crop", p.p_crop);
  read_opt(j, "p_hflip", p.p_hflip);
  read_opt(j, "p_vflip", p.p_vflip);
  if (j.contains("rot90_probs")) {
    std::vector<double> v;
    read_opt(j, "rot90_probs", v);
    if (v.size() != 4) throw SchemaError("policy field 'rot90_probs' needs 4 values");
    std::copy(v.begin(), v.end(), p.rot90_probs.begin());
  }
  read_opt(j, "p_color", p.p_color);
  read_opt(j, "p_gray", p.p_gray);
  if (j.contains("color_jitter")) {
    const auto& c = j.at("color_jitter");
    if (!c.is_object()) throw SchemaError("policy field 'color_jitter' must be an object");
    read_opt(c, "brightness_delta", p.color_jitter.brightness_delta);
    read_pair(c, "contrast_range", p.color_jitter.contrast_range);
    read_pair(c, "saturation_range", p.color_jitter.saturation_range);
    read_opt(c, "hue_delta", p.color_jitter.hue_delta);
    read_opt(c, "p_each", p.color_jitter.p_each);
  }
  if (j.contains("crop")) {
    const auto& k = j.at("crop");
    if (!k.is_object()) throw SchemaError("policy field 'crop' must be an object");
    if (k.contains("min_iou_choices")) {
      const auto& arr = k.at("min_iou_choices");
      if (!arr.is_array()) throw SchemaError("policy field 'min_iou_choices' must be an array");
      p.crop.min_iou_choices.clear();
      for (const auto& v : arr) {
        if (v.is_null()) {
          p.crop.min_iou_choices.emplace_back(std::nullopt);
        } else if (v.is_number()) {
          p.crop.min_iou_choices.emplace_back(v.get<double>());
        } else {
          throw SchemaError("min_iou_choices entries must be numbers or null");
        }
      }
    }
    read_opt(k, "min_scale", p.crop.min_scale);
    read_opt(k, "max_scale", p.crop.max_scale);
    read_opt(k, "max_aspect_ratio", p.crop.max_aspect_ratio);
    read_opt(k, "attempts", p.crop.attempts);
  }
  try {
    validate(p);
  } catch (const ArgumentError& e) {
    throw SchemaError(e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

bool AugmentChain::is_identity() const {
  return flatten(geometry).empty() && color.is_identity() && !gray;
}

json to_json(const AugmentChain& chain) {
  json geometry = json::array();
  for (const auto& step : flatten(chain.geometry)) {
    if (std::holds_alternative<HFlip>(step.op)) {
      geometry.push_back("hflip");
    } else if (std::holds_alternative<VFlip>(step.op)) {
      geometry.push_back("vflip");
    } else if (const auto* rot = std::get_if<Rot90>(&step.op)) {
      geometry.push_back({{"rot90", rot->quarter_turns()}});
    } else {
      const auto& r = std::get<Crop>(step.op).rect;
      geometry.push_back({{"crop", {r.x_min, r.y_min, r.x_max, r.y_max}}});
    }
  }
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"geometry", std::move(geometry)},
          {"color",
           {{"brightness", opt(chain.color.brightness)},
            {"contrast", opt(chain.color.contrast)},
            {"saturation", opt(chain.color.saturation)},
            {"hue", opt(chain.color.hue)}}},
          {"gray", chain.gray}};
}

namespace {

std::optional<Crop> sample_crop(const CropParams& params, Rng& rng, ImageDims dims,
                                std::span<const BoundingBox> boxes) {
  const auto& choice = params.min_iou_choices[rng.below(params.min_iou_choices.size())];
  if (!choice) return std::nullopt;
  const double min_iou = *choice;

  for (int attempt = 0; attempt < params.attempts; ++attempt) {
    const double sw = rng.uniform(params.min_scale, params.max_scale);
    const double sh = rng.uniform(params.min_scale, params.max_scale);
    const int w = std::clamp(static_cast<int>(std::lround(sw * dims.width)), 1, dims.width);
    const int h = std::clamp(static_cast<int>(std::lround(sh * dims.height)), 1, dims.height);
    const double aspect = static_cast<double>(w) / h;
    if (aspect > params.max_aspect_ratio || aspect < 1.0 / params.max_aspect_ratio) continue;
    const auto left = static_cast<double>(rng.below(static_cast<std::uint64_t>(dims.width - w + 1)));
    const auto top = static_cast<double>(rng.below(static_cast<std::uint64_t>(dims.height - h + 1)));
    const BoundingBox rect{left, top, left + w, top + h};

    // A window qualifies when it overlaps at least one box enough.
    const bool ok = boxes.empty() || std::any_of(boxes.begin(), boxes.end(), [&](const auto& b) {
                      return iou(rect, b) >= min_iou;
                    });
    if (ok) return Crop{rect};
  }
  return std::nullopt;
}

}  // namespace

ColorJitter sample_color_jitter(const ColorJitterParams& params, Rng& rng) {
  ColorJitter out;
  if (rng.bernoulli(params.p_each)) {
    out.brightness = rng.uniform(-params.brightness_delta, params.brightness_delta);
  }
  if (rng.bernoulli(params.p_each)) {
    out.contrast = rng.uniform(params.contrast_range.first, params.contrast_range.second);
  }
  if (rng.bernoulli(params.p_each)) {
    out.saturation = rng.uniform(params.saturation_range.first, params.saturation_range.second);
  }
  if (rng.bernoulli(params.p_each)) {
    out.hue = rng.uniform(-params.hue_delta, params.hue_delta);
  }
  return out;
}

AugmentChain sample_chain(const AugmentPolicy& policy, Rng& rng, ImageDims dims,
                          std::span<const BoundingBox> boxes) {
  validate(policy);
  std::vector<GeometricTransform> steps;
  if (rng.bernoulli(policy.p_crop)) {
    if (auto crop = sample_crop(policy.crop, rng, dims, boxes)) steps.emplace_back(*crop);
  }
  if (rng.bernoulli(policy.p_hflip)) steps.emplace_back(HFlip{});
  if (rng.bernoulli(policy.p_vflip)) steps.emplace_back(VFlip{});
  const auto k = static_cast<int>(rng.categorical(policy.rot90_probs));
  if (k != 0) steps.emplace_back(Rot90{k});

  AugmentChain chain;
  chain.geometry = compose(std::move(steps));
  if (rng.bernoulli(policy.p_color)) chain.color = sample_color_jitter(policy.color_jitter, rng);
  chain.gray = rng.bernoulli(policy.p_gray);
  return chain;
}

AugmentChain sample_chain(const AugmentPolicy& policy, RngState state, ImageDims dims,
                          std::span<const BoundingBox> boxes) {
  Rng rng(state);
  return sample_chain(policy, rng, dims, boxes);
}

// ---------------------------------------------------------------------------
// Photometric ops
// ---------------------------------------------------------------------------

namespace {

void require_rgb(const Image& image, const char* op) {
  if (image.channels() != 3) {
    throw ArgumentError(std::string(op) + " needs a 3-channel image, got " +
                        std::to_string(image.channels()));
  }
}

double clamp255(double v) { return std::clamp(v, 0.0, 255.0); }

struct Hsv {
  double h, s, v;  // h in [0, 360), s in [0, 1], v in [0, 255]
};

Hsv to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double c = mx - mn;
  double h = 0.0;
  if (c > 0.0) {
    if (mx == r) {
      h = 60.0 * std::fmod((g - b) / c, 6.0);
    } else if (mx == g) {
      h = 60.0 * ((b - r) / c + 2.0);
    } else {
      h = 60.0 * ((r - g) / c + 4.0);
    }
    if (h < 0.0) h += 360.0;
  }
  return Hsv{h, mx > 0.0 ? c / mx : 0.0, mx};
}

void from_hsv(const Hsv& hsv, double& r, double& g, double& b) {
  const double c = hsv.v * hsv.s;
  const double hp = hsv.h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  const double m = hsv.v - c;
  double r1 = 0, g1 = 0, b1 = 0;
  if (hp < 1) {
    r1 = c, g1 = x;
  } else if (hp < 2) {
    r1 = x, g1 = c;
  } else if (hp < 3) {
    g1 = c, b1 = x;
  } else if (hp < 4) {
    g1 = x, b1 = c;
  } else if (hp < 5) {
    r1 = x, b1 = c;
  } else {
    r1 = c, b1 = x;
  }
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

}  // namespace

Image apply_color_jitter(const Image& image, const ColorJitter& jitter) {
  if (jitter.is_identity()) return image;
  require_rgb(image, "color_jitter");

  const auto src = image.pixels();
  std::vector<double> px(src.begin(), src.end());

  if (jitter.brightness) {
    for (auto& v : px) v = clamp255(v + *jitter.brightness);
  }
  if (jitter.contrast) {
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < px.size(); ++i) mean[i % 3] += px[i];
    const double n = static_cast<double>(px.size() / 3);
    for (auto& m : mean) m /= n;
    for (std::size_t i = 0; i < px.size(); ++i) {
      px[i] = clamp255((px[i] - mean[i % 3]) * *jitter.contrast + mean[i % 3]);
    }
  }
  if (jitter.saturation || jitter.hue) {
    for (std::size_t i = 0; i < px.size(); i += 3) {
      Hsv hsv = to_hsv(px[i], px[i + 1], px[i + 2]);
      if (jitter.saturation) hsv.s = std::clamp(hsv.s * *jitter.saturation, 0.0, 1.0);
      if (jitter.hue) {
        hsv.h = std::fmod(hsv.h + *jitter.hue, 360.0);
        if (hsv.h < 0.0) hsv.h += 360.0;
      }
      from_hsv(hsv, px[i], px[i + 1], px[i + 2]);
    }
  }

  Image out = image;
  auto dst = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    dst[i] = static_cast<std::uint8_t>(std::nearbyint(clamp255(px[i])));
  }
  return out;
}

Image color_jitter(const Image& image, const ColorJitterParams& params, Rng& rng) {
  return apply_color_jitter(image, sample_color_jitter(params, rng));
}

Image rgb_to_gray(const Image& image) {
  require_rgb(image, "rgb_to_gray");
  Image out(image.width(), image.height(), 3);
  kernels::active().rgb_to_gray(image.pixels(), out.pixels());
  return out;
}

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

AugmentedSample augment_sample(const Image& image, std::span<const BoundingBox> boxes,
                               const AugmentChain& chain) {
  AugmentedSample out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    // transform_box rejects boxes that do not fit the image.
    if (auto moved = transform_box(chain.geometry, image.dims(), boxes[i])) {
      out.boxes.push_back(moved->first);
      out.source_index.push_back(i);
    }
  }
  out.image = transform_image(image, chain.geometry);
  if (!chain.color.is_identity()) out.image = apply_color_jitter(out.image, chain.color);
  if (chain.gray) out.image = rgb_to_gray(out.image);
  return out;
}

}  // namespace omnipd
