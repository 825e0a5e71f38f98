#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "omnipd/image.hpp"

namespace omnipd {

struct TimingStats {
  std::size_t n_samples = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;  // nearest rank
  double std_ms = 0.0;  // population standard deviation
  double overhead_ms = 0.0;

  /// Frames per second at the mean latency plus overhead.
  double fps() const;
};

inline constexpr int kDefaultWarmup = 10;

/// Summary of per-sample durations. Throws ArgumentError when empty or negative.
TimingStats summarize(std::span<const double> durations_ms, double overhead_ms = 0.0);

/// Times `stage` once per image on a steady clock, one call at a time, and
/// summarizes all but the first `warmup` calls. Throws ArgumentError when
/// `images` is empty or warmup is not below its size.
TimingStats measure(const std::function<void(const Image&)>& stage, std::span<const Image> images,
                    int warmup = kDefaultWarmup, double overhead_ms = 0.0);

/// 1000 / (per_image_ms + overhead_ms). Throws ArgumentError unless
/// per_image_ms > 0 and overhead_ms >= 0.
double throughput(double per_image_ms, double overhead_ms);

nlohmann::json to_json(const TimingStats& stats);

}  // namespace omnipd
