#include "omnipd/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "omnipd/errors.hpp"

namespace omnipd {

double TimingStats::fps() const { return throughput(mean_ms, overhead_ms); }

TimingStats summarize(std::span<const double> durations_ms, double overhead_ms) {
  if (durations_ms.empty()) throw ArgumentError("no timing samples");
  if (!(overhead_ms >= 0.0)) throw ArgumentError("overhead must be >= 0");
  std::vector<double> sorted(durations_ms.begin(), durations_ms.end());
  if (std::any_of(sorted.begin(), sorted.end(), [](double d) { return !(d >= 0.0); })) {
    throw ArgumentError("timing samples must be >= 0");
  }
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  TimingStats s;
  s.n_samples = n;
  s.overhead_ms = overhead_ms;
  s.mean_ms = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  s.median_ms = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95_ms = sorted[std::max<std::size_t>(rank, 1) - 1];
  double sq = 0.0;
  for (double d : sorted) sq += (d - s.mean_ms) * (d - s.mean_ms);
  s.std_ms = std::sqrt(sq / static_cast<double>(n));
  return s;
}

TimingStats measure(const std::function<void(const Image&)>& stage, std::span<const Image> images,
                    int warmup, double overhead_ms) {
  if (images.empty()) throw ArgumentError("measure needs at least one image");
  if (warmup < 0 || static_cast<std::size_t>(warmup) >= images.size()) {
    throw ArgumentError("warmup must be in [0, number of images)");
  }
  using clock = std::chrono::steady_clock;
  std::vector<double> durations;
  durations.reserve(images.size() - static_cast<std::size_t>(warmup));
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto start = clock::now();
    stage(images[i]);
    const auto stop = clock::now();
    if (i >= static_cast<std::size_t>(warmup)) {
      durations.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
  }
  return summarize(durations, overhead_ms);
}

double throughput(double per_image_ms, double overhead_ms) {
  if (!(per_image_ms > 0.0) || !std::isfinite(per_image_ms)) {
    throw ArgumentError("per-image time must be > 0");
  }
  if (!(overhead_ms >= 0.0) || !std::isfinite(overhead_ms)) {
    throw ArgumentError("overhead must be >= 0");
  }
  return 1000.0 / (per_image_ms + overhead_ms);
}

nlohmann::json to_json(const TimingStats& s) {
  return {{"n_samples", s.n_samples}, {"mean_ms", s.mean_ms}, {"median_ms", s.median_ms},
          {"p95_ms", s.p95_ms},       {"std_ms", s.std_ms},   {"overhead_ms", s.overhead_ms},
          {"fps", s.mean_ms > 0.0 ? nlohmann::json(s.fps()) : nlohmann::json(nullptr)}};
}

}  // namespace omnipd
