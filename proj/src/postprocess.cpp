#include "omnipd/postprocess.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "omnipd/errors.hpp"
#include "omnipd/kernels.hpp"

namespace omnipd {

namespace {
void check_thresholds(double iou_threshold, double score_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ArgumentError("nms iou threshold must be in (0, 1]");
  }
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw ArgumentError("nms score threshold must be in [0, 1]");
  }
}
}  // namespace

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold,
                           double score_threshold) {
  check_thresholds(iou_threshold, score_threshold);

  std::vector<std::size_t> order;
  order.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].score >= score_threshold) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&dets](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  kernels::BoxColumns columns;
  columns.reserve(order.size());
  for (auto i : order) columns.push_back(dets[i].box);

  const auto& kernel = kernels::active();
  std::vector<bool> suppressed(order.size(), false);
  std::vector<double> overlaps(order.size());
  std::vector<Detection> kept;

  for (std::size_t i = 0; i < order.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(dets[order[i]]);
    const std::size_t rest = order.size() - i - 1;
    if (rest == 0) break;
    const auto out = std::span<double>(overlaps).first(rest);
    kernel.iou_one_to_many(dets[order[i]].box, columns.view(i + 1), out);
    for (std::size_t j = 0; j < rest; ++j) {
      if (out[j] > iou_threshold) suppressed[i + 1 + j] = true;
    }
  }
  return kept;
}

std::vector<Detection> nms_per_image(std::span<const Detection> dets, double iou_threshold,
                                     double score_threshold) {
  check_thresholds(iou_threshold, score_threshold);
  std::vector<std::string> image_order;
  std::map<std::string, std::vector<Detection>, std::less<>> groups;
  for (const auto& d : dets) {
    auto [it, inserted] = groups.try_emplace(d.image_id);
    if (inserted) image_order.push_back(d.image_id);
    it->second.push_back(d);
  }
  std::vector<Detection> out;
  for (const auto& id : image_order) {
    auto kept = nms(groups.at(id), iou_threshold, score_threshold);
    out.insert(out.end(), std::make_move_iterator(kept.begin()), std::make_move_iterator(kept.end()));
  }
  return out;
}

}  // namespace omnipd
