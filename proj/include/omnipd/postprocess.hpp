#pragma once

#include <span>
#include <vector>

#include "omnipd/eval.hpp"

namespace omnipd {

/// Greedy non-maximum suppression for the detections of one image.
///
/// Drops detections scoring below `score_threshold`, then repeatedly keeps
/// the highest-scoring survivor and removes every remaining detection whose
/// IoU with it is strictly greater than `iou_threshold`. Score ties keep
/// input order. Output is sorted by descending score.
/// Throws ArgumentError unless iou_threshold is in (0, 1] and score_threshold in [0, 1].
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold,
                           double score_threshold);

/// Applies nms per image_id. Images appear in order of first appearance.
std::vector<Detection> nms_per_image(std::span<const Detection> dets, double iou_threshold,
                                     double score_threshold);

}  // namespace omnipd
