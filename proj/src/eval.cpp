#include "omnipd/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

#include "omnipd/errors.hpp"
#include "omnipd/io.hpp"
#include "omnipd/kernels.hpp"

namespace omnipd {

using nlohmann::json;

void validate(const Detection& det) {
  if (!std::isfinite(det.score) || det.score < 0.0 || det.score > 1.0) {
    throw SchemaError("detection on '" + det.image_id + "' has score outside [0, 1]");
  }
  if (!det.box.valid()) {
    throw SchemaError("detection on '" + det.image_id + "' has an invalid box");
  }
}

GroundTruth ground_truth_from(std::span<const AnnotatedImage> images) {
  GroundTruth gt;
  for (const auto& im : images) {
    auto [it, inserted] = gt.try_emplace(im.image_id);
    if (!inserted) throw SchemaError("duplicate image_id '" + im.image_id + "' in ground truth");
    for (std::size_t i = 0; i < im.boxes.size(); ++i) {
      it->second.push_back(GroundTruthBox{im.boxes[i], i < im.difficult.size() && im.difficult[i]});
    }
  }
  return gt;
}

std::size_t MatchResult::count(MatchLabel label) const noexcept {
  return static_cast<std::size_t>(std::count_if(detections.begin(), detections.end(),
                                                [label](const auto& d) { return d.label == label; }));
}

namespace {

struct ImageState {
  kernels::BoxColumns boxes;
  std::vector<bool> difficult;
  std::vector<bool> matched;
};

}  // namespace

MatchResult match_detections(std::span<const Detection> dets, const GroundTruth& gts,
                             double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ArgumentError("iou threshold must be in (0, 1]");
  }
  MatchResult result;

  std::map<std::string_view, ImageState> state;
  for (const auto& [id, boxes] : gts) {
    ImageState s;
    s.boxes.reserve(boxes.size());
    for (const auto& g : boxes) {
      s.boxes.push_back(g.box);
      s.difficult.push_back(g.difficult);
      if (!g.difficult) ++result.n_gt;
    }
    s.matched.assign(boxes.size(), false);
    state.emplace(id, std::move(s));
  }

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&dets](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  const auto& kernel = kernels::active();
  std::vector<double> overlaps;
  std::set<std::string> unknown;
  result.detections.reserve(dets.size());

  for (std::size_t idx : order) {
    const Detection& det = dets[idx];
    MatchedDetection md{idx, det.score, MatchLabel::FP, std::nullopt};
    const auto it = state.find(det.image_id);
    if (it == state.end()) {
      unknown.insert(det.image_id);
      result.detections.push_back(md);
      continue;
    }
    ImageState& s = it->second;
    overlaps.resize(s.boxes.size());
    kernel.iou_one_to_many(det.box, s.boxes.view(), overlaps);

    std::optional<std::size_t> best;
    bool hits_difficult = false;
    for (std::size_t g = 0; g < overlaps.size(); ++g) {
      if (!(overlaps[g] >= iou_threshold)) continue;
      if (s.difficult[g]) {
        hits_difficult = true;
      } else if (!s.matched[g] && (!best || overlaps[g] > overlaps[*best])) {
        best = g;
      }
    }
    if (best) {
      s.matched[*best] = true;
      md.label = MatchLabel::TP;
      md.matched_gt_index = best;
    } else if (hits_difficult) {
      md.label = MatchLabel::Ignored;
    }
    result.detections.push_back(md);
  }

  for (const auto& [id, s] : state) {
    std::size_t open = 0;
    for (std::size_t g = 0; g < s.matched.size(); ++g) {
      if (!s.difficult[g] && !s.matched[g]) ++open;
    }
    result.unmatched_gt.emplace(std::string(id), open);
  }
  for (const auto& id : unknown) {
    result.diagnostics.push_back("detections reference unknown image_id '" + id +
                                 "'; counted as false positives");
  }
  return result;
}

std::vector<PrPoint> pr_curve(const MatchResult& match, std::size_t n_gt) {
  std::vector<PrPoint> points;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto& d : match.detections) {
    if (d.label == MatchLabel::Ignored) continue;
    (d.label == MatchLabel::TP ? tp : fp) += 1;
    const double recall = n_gt > 0 ? static_cast<double>(tp) / static_cast<double>(n_gt) : 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    points.push_back(PrPoint{recall, precision});
  }
  return points;
}

std::string_view to_string(ApMode mode) noexcept {
  return mode == ApMode::AllPoints ? "all_points" : "voc07_11pt";
}

ApMode parse_ap_mode(std::string_view text) {
  if (text == "all_points") return ApMode::AllPoints;
  if (text == "voc07" || text == "voc07_11pt") return ApMode::Voc07ElevenPoint;
  throw ArgumentError("unknown AP mode '" + std::string(text) + "' (all_points|voc07)");
}

double average_precision(std::span<const PrPoint> points, ApMode mode) {
  if (points.empty()) return 0.0;

  if (mode == ApMode::Voc07ElevenPoint) {
    double sum = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double t = i / 10.0;
      double best = 0.0;
      for (const auto& p : points) {
        if (p.recall >= t) best = std::max(best, p.precision);
      }
      sum += best;
    }
    return sum / 11.0;
  }

  // Sentinels at recall 0 and 1, then the running max from the right.
  std::vector<double> recall{0.0};
  std::vector<double> precision{0.0};
  for (const auto& p : points) {
    recall.push_back(p.recall);
    precision.push_back(p.precision);
  }
  recall.push_back(1.0);
  precision.push_back(0.0);
  for (std::size_t i = precision.size() - 1; i-- > 0;) {
    precision[i] = std::max(precision[i], precision[i + 1]);
  }
  double ap = 0.0;
  for (std::size_t i = 1; i < recall.size(); ++i) {
    if (recall[i] != recall[i - 1]) ap += (recall[i] - recall[i - 1]) * precision[i];
  }
  return ap;
}

EvalReport evaluate(std::span<const Detection> dets, const GroundTruth& gts, double iou_threshold,
                    ApMode mode) {
  const MatchResult match = match_detections(dets, gts, iou_threshold);
  EvalReport report;
  report.pr_points = pr_curve(match, match.n_gt);
  report.ap_all_points = average_precision(report.pr_points, ApMode::AllPoints);
  report.ap_voc07 = average_precision(report.pr_points, ApMode::Voc07ElevenPoint);
  report.ap = mode == ApMode::AllPoints ? report.ap_all_points : report.ap_voc07;
  report.mode = mode;
  report.iou_threshold = iou_threshold;
  report.counts = EvalCounts{match.n_gt, dets.size(), match.count(MatchLabel::TP),
                             match.count(MatchLabel::FP), match.count(MatchLabel::Ignored)};
  report.diagnostics = match.diagnostics;
  return report;
}

double mean_ap(const std::map<std::string, double, std::less<>>& per_class) {
  if (per_class.empty()) throw ArgumentError("mean_ap needs at least one class");
  double sum = 0.0;
  for (const auto& [name, ap] : per_class) sum += ap;
  return sum / static_cast<double>(per_class.size());
}

EpochResult best_epoch(std::span<const EpochResult> series) {
  if (series.empty()) throw ArgumentError("best_epoch needs a non-empty series");
  std::set<int> seen;
  for (const auto& e : series) {
    if (!seen.insert(e.epoch).second) {
      throw ArgumentError("epoch " + std::to_string(e.epoch) + " appears twice");
    }
  }
  EpochResult best = series.front();
  for (const auto& e : series.subspan(1)) {
    if (e.map > best.map || (e.map == best.map && e.epoch < best.epoch)) best = e;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

json to_json(const Detection& det) {
  return {{"image_id", det.image_id},
          {"score", det.score},
          {"box", {det.box.x_min, det.box.y_min, det.box.x_max, det.box.y_max}}};
}

Detection detection_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("detection must be a JSON object");
  Detection d;
  try {
    d.image_id = j.at("image_id").get<std::string>();
    d.score = j.at("score").get<double>();
    const auto box = j.at("box").get<std::vector<double>>();
    if (box.size() != 4) throw SchemaError("detection box must have 4 coordinates");
    d.box = BoundingBox{box[0], box[1], box[2], box[3]};
  } catch (const json::exception& e) {
    throw SchemaError(std::string("detection record: ") + e.what());
  }
  validate(d);
  return d;
}

std::vector<Detection> parse_detections(std::string_view jsonl) {
  std::vector<Detection> out;
  long line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    const auto end = std::min(jsonl.find('\n', pos), jsonl.size());
    const auto line = jsonl.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    try {
      out.push_back(detection_from_json(j));
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  try {
    return parse_detections(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

std::string format_detections(std::span<const Detection> dets) {
  std::string out;
  for (const auto& d : dets) {
    out += to_json(d).dump();
    out += '\n';
  }
  return out;
}

json to_json(const EvalReport& r) {
  json pr = json::array();
  for (const auto& p : r.pr_points) pr.push_back({p.recall, p.precision});
  return {{"mode", to_string(r.mode)},
          {"iou_threshold", r.iou_threshold},
          {"ap", r.ap},
          {"ap_all_points", r.ap_all_points},
          {"ap_voc07_11pt", r.ap_voc07},
          {"counts",
           {{"n_gt", r.counts.n_gt},
            {"n_det", r.counts.n_det},
            {"n_tp", r.counts.n_tp},
            {"n_fp", r.counts.n_fp},
            {"n_ignored", r.counts.n_ignored}}},
          {"pr_points", std::move(pr)},
          {"diagnostics", r.diagnostics}};
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  try {
    r.mode = parse_ap_mode(j.at("mode").get<std::string>());
    r.iou_threshold = j.at("iou_threshold").get<double>();
    r.ap = j.at("ap").get<double>();
    r.ap_all_points = j.at("ap_all_points").get<double>();
    r.ap_voc07 = j.at("ap_voc07_11pt").get<double>();
    const auto& c = j.at("counts");
    r.counts = EvalCounts{c.at("n_gt").get<std::size_t>(), c.at("n_det").get<std::size_t>(),
                          c.at("n_tp").get<std::size_t>(), c.at("n_fp").get<std::size_t>(),
                          c.value("n_ignored", std::size_t{0})};
    for (const auto& p : j.at("pr_points")) {
      r.pr_points.push_back(PrPoint{p.at(0).get<double>(), p.at(1).get<double>()});
    }
    if (j.contains("diagnostics")) r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("eval report: ") + e.what());
  } catch (const ArgumentError& e) {
    throw SchemaError(std::string("eval report: ") + e.what());
  }
  return r;
}

namespace {
void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}
}  // namespace

std::string pr_curve_csv(std::span<const PrPoint> points) {
  std::string out = "recall,precision\n";
  for (const auto& p : points) {
    append_number(out, p.recall);
    out += ',';
    append_number(out, p.precision);
    out += '\n';
  }
  return out;
}

}  // namespace omnipd
