#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "omnipd/datasets.hpp"
#include "omnipd/geometry.hpp"

namespace omnipd {

struct Detection {
  std::string image_id;
  double score = 0.0;
  BoundingBox box;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Throws SchemaError unless score is finite in [0, 1] and the box is valid.
void validate(const Detection& det);

struct GroundTruthBox {
  BoundingBox box;
  bool difficult = false;
};

using GroundTruth = std::map<std::string, std::vector<GroundTruthBox>, std::less<>>;

/// Ground truth of a dataset, keyed by image_id. Throws SchemaError on duplicate ids.
GroundTruth ground_truth_from(std::span<const AnnotatedImage> images);

enum class MatchLabel { TP, FP, Ignored };

struct MatchedDetection {
  std::size_t detection_index = 0;  // into the input list
  double score = 0.0;
  MatchLabel label = MatchLabel::FP;
  std::optional<std::size_t> matched_gt_index;  // within its image
};

struct MatchResult {
  /// Detections in processing order: descending score, ties by input order.
  std::vector<MatchedDetection> detections;
  /// Non-difficult ground truth left unmatched, per image.
  std::map<std::string, std::size_t, std::less<>> unmatched_gt;
  /// Non-difficult ground-truth boxes in total.
  std::size_t n_gt = 0;
  std::vector<std::string> diagnostics;

  std::size_t count(MatchLabel label) const noexcept;
};

/// Greedy VOC matching.
///
/// Each detection, in descending score order, takes the unmatched
/// non-difficult ground-truth box of its image with the highest IoU at or
/// above `iou_threshold` (ties to the lower index). Without one, a difficult
/// box at or above the threshold makes it Ignored; otherwise it is an FP.
/// Detections on unknown images are FPs and listed in `diagnostics`.
/// Throws ArgumentError unless iou_threshold is in (0, 1].
MatchResult match_detections(std::span<const Detection> dets, const GroundTruth& gts,
                             double iou_threshold);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;

  friend bool operator==(const PrPoint&, const PrPoint&) = default;
};

/// Cumulative precision/recall after each non-ignored detection. Recall is 0
/// throughout when n_gt is 0.
std::vector<PrPoint> pr_curve(const MatchResult& match, std::size_t n_gt);

enum class ApMode { AllPoints, Voc07ElevenPoint };

std::string_view to_string(ApMode mode) noexcept;
/// Accepts "all_points" and "voc07" / "voc07_11pt".
ApMode parse_ap_mode(std::string_view text);

/// Area under the precision envelope (AllPoints) or the mean envelope
/// precision at recall 0, 0.1, ..., 1 (Voc07ElevenPoint).
double average_precision(std::span<const PrPoint> points, ApMode mode);

struct EvalCounts {
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
  std::size_t n_tp = 0;
  std::size_t n_fp = 0;
  std::size_t n_ignored = 0;
};

struct EvalReport {
  std::vector<PrPoint> pr_points;
  double ap = 0.0;  // in `mode`
  double ap_all_points = 0.0;
  double ap_voc07 = 0.0;
  EvalCounts counts;
  ApMode mode = ApMode::AllPoints;
  double iou_threshold = 0.5;
  std::vector<std::string> diagnostics;
};

EvalReport evaluate(std::span<const Detection> dets, const GroundTruth& gts, double iou_threshold,
                    ApMode mode = ApMode::AllPoints);

/// Arithmetic mean. Throws ArgumentError for an empty map.
double mean_ap(const std::map<std::string, double, std::less<>>& per_class);

struct EpochResult {
  int epoch = 0;
  double map = 0.0;

  friend bool operator==(const EpochResult&, const EpochResult&) = default;
};

using EpochSeries = std::vector<EpochResult>;

/// Entry with the highest mAP, ties to the smaller epoch. Throws
/// ArgumentError when empty or an epoch repeats.
EpochResult best_epoch(std::span<const EpochResult> series);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

nlohmann::json to_json(const Detection& det);
Detection detection_from_json(const nlohmann::json& j);

/// JSON-lines detections. Throws ParseError / SchemaError with the line number.
std::vector<Detection> parse_detections(std::string_view jsonl);
std::vector<Detection> read_detections(const std::filesystem::path& path);
std::string format_detections(std::span<const Detection> dets);

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);
/// recall,precision rows with a header line.
std::string pr_curve_csv(std::span<const PrPoint> points);

}  // namespace omnipd
