#include <gtest/gtest.h>

#include "omnipd/errors.hpp"
#include "omnipd/eval.hpp"
#include "support/oracles.hpp"

using namespace omnipd;

namespace {

std::vector<MatchLabel> labels(const MatchResult& m) {
  std::vector<MatchLabel> out;
  for (const auto& d : m.detections) out.push_back(d.label);
  return out;
}

MatchResult from_labels(const std::vector<MatchLabel>& ls) {
  MatchResult m;
  double score = 1.0;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    m.detections.push_back(MatchedDetection{i, score, ls[i], std::nullopt});
    score -= 0.01;
  }
  return m;
}

constexpr auto TP = MatchLabel::TP;
constexpr auto FP = MatchLabel::FP;

BoundingBox shifted(const BoundingBox& b, double dx) { return BoundingBox{b.x_min + dx, b.y_min, b.x_max + dx, b.y_max}; }

struct Case {
  std::vector<Detection> dets;
  GroundTruth gt;
};

Case random_case(oracle::Gen& g, int max_dets, int max_gt) {
  Case c;
  const int n_img = g.integer(1, 2);
  std::vector<BoundingBox> all_gt;
  for (int i = 0; i < n_img; ++i) {
    auto& v = c.gt["img" + std::to_string(i)];
    const int n = g.integer(0, max_gt);
    for (int k = 0; k < n; ++k) {
      // Small integer grid so ties and threshold hits happen.
      const auto b = g.int_box(8, 8);
      v.push_back({area(b) > 0 ? b : BoundingBox{0, 0, 2, 2}, g.coin(0.2)});
    }
  }
  const int n_det = g.integer(0, max_dets);
  for (int k = 0; k < n_det; ++k) {
    const std::string id = "img" + std::to_string(g.integer(0, n_img));  // may be unknown
    const auto b = g.int_box(8, 8);
    const double score = g.integer(0, 4) / 4.0;  // frequent score ties
    c.dets.push_back(Detection{id, score, area(b) > 0 ? b : BoundingBox{1, 1, 3, 3}});
  }
  return c;
}

}  // namespace

TEST(Match, SingleTruePositive) {
  GroundTruth gt{{"a", {{BoundingBox{0, 0, 10, 10}, false}}}};
  const std::vector<Detection> d{{"a", 0.9, BoundingBox{0, 0, 10, 6}}};  // IoU 0.6
  const auto m = match_detections(d, gt, 0.5);
  EXPECT_EQ(labels(m), (std::vector<MatchLabel>{TP}));
  EXPECT_EQ(m.unmatched_gt.at("a"), 0u);
  EXPECT_EQ(m.detections[0].matched_gt_index, 0u);
}

TEST(Match, DuplicateIsPenalized) {
  GroundTruth gt{{"a", {{BoundingBox{0, 0, 10, 10}, false}}}};
  const std::vector<Detection> d{{"a", 0.8, BoundingBox{0, 0, 10, 9}}, {"a", 0.9, BoundingBox{0, 0, 10, 8}}};
  const auto m = match_detections(d, gt, 0.5);
  EXPECT_EQ(labels(m), (std::vector<MatchLabel>{TP, FP}));
  EXPECT_EQ(m.detections[0].detection_index, 1u);
}

TEST(Match, NoDetections) {
  GroundTruth gt{{"a", {{BoundingBox{0, 0, 1, 1}, false}, {BoundingBox{2, 2, 3, 3}, false}, {BoundingBox{4, 4, 5, 5}, false}}}};
  const auto m = match_detections({}, gt, 0.5);
  EXPECT_TRUE(m.detections.empty());
  EXPECT_EQ(m.unmatched_gt.at("a"), 3u);
  EXPECT_EQ(m.n_gt, 3u);
}

TEST(Match, DifficultGroundTruthIsIgnored) {
  GroundTruth gt{{"a", {{BoundingBox{0, 0, 10, 10}, true}}}};
  const std::vector<Detection> d{{"a", 0.9, BoundingBox{0, 0, 10, 10}}};
  const auto m = match_detections(d, gt, 0.5);
  EXPECT_EQ(m.detections[0].label, MatchLabel::Ignored);
  EXPECT_EQ(m.n_gt, 0u);
}

TEST(Match, UnknownImageIsFalsePositiveWithDiagnostic) {
  GroundTruth gt{{"a", {}}};
  const std::vector<Detection> d{{"zzz", 0.9, BoundingBox{0, 0, 10, 10}}};
  const auto m = match_detections(d, gt, 0.5);
  EXPECT_EQ(labels(m), (std::vector<MatchLabel>{FP}));
  ASSERT_EQ(m.diagnostics.size(), 1u);
  EXPECT_NE(m.diagnostics[0].find("zzz"), std::string::npos);
}

TEST(Match, ThresholdIsInclusiveAndValidated) {
  GroundTruth gt{{"a", {{BoundingBox{0, 0, 10, 10}, false}}}};
  const std::vector<Detection> d{{"a", 0.9, BoundingBox{0, 0, 10, 5}}};  // IoU exactly 0.5
  EXPECT_EQ(match_detections(d, gt, 0.5).detections[0].label, TP);
  EXPECT_THROW(match_detections(d, gt, 0.0), ArgumentError);
  EXPECT_THROW(match_detections(d, gt, 1.5), ArgumentError);
}

TEST(Match, AgreesWithProtocolOracle) {
  oracle::Gen g(71);
  for (int trial = 0; trial < 3000; ++trial) {
    const auto c = random_case(g, 6, 4);
    const auto m = match_detections(c.dets, c.gt, 0.5);
    const auto o = oracle::run_protocol(c.dets, c.gt, 0.5);
    ASSERT_EQ(m.detections.size(), o.labels.size());
    for (std::size_t i = 0; i < o.labels.size(); ++i) {
      ASSERT_EQ(static_cast<int>(m.detections[i].label), static_cast<int>(o.labels[i])) << "trial " << trial;
    }
    EXPECT_EQ(m.n_gt, o.n_gt);
    EXPECT_LE(m.count(TP), m.n_gt);
  }
}

TEST(Match, EachGroundTruthMatchedOnce) {
  oracle::Gen g(72);
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = random_case(g, 20, 6);
    const auto m = match_detections(c.dets, c.gt, 0.3);
    std::set<std::pair<std::string, std::size_t>> used;
    for (const auto& d : m.detections) {
      if (d.label != TP) continue;
      ASSERT_TRUE(d.matched_gt_index);
      EXPECT_TRUE(used.insert({c.dets[d.detection_index].image_id, *d.matched_gt_index}).second);
    }
  }
}

TEST(PrCurve, Examples) {
  EXPECT_EQ(pr_curve(from_labels({TP}), 1), (std::vector<PrPoint>{{1.0, 1.0}}));
  EXPECT_EQ(pr_curve(from_labels({TP, FP}), 1), (std::vector<PrPoint>{{1.0, 1.0}, {1.0, 0.5}}));
  const auto p = pr_curve(from_labels({TP, FP, TP}), 2);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p[0], (PrPoint{0.5, 1.0}));
  EXPECT_EQ(p[1], (PrPoint{0.5, 0.5}));
  EXPECT_EQ(p[2].recall, 1.0);
  EXPECT_NEAR(p[2].precision, 0.6667, 1e-4);
  for (const auto& q : pr_curve(from_labels({FP, FP}), 0)) EXPECT_EQ(q.recall, 0.0);
}

TEST(AveragePrecision, Examples) {
  const auto perfect = pr_curve(from_labels({TP}), 1);
  EXPECT_EQ(average_precision(perfect, ApMode::AllPoints), 1.0);
  EXPECT_NEAR(average_precision(perfect, ApMode::Voc07ElevenPoint), 1.0, 1e-15);
  EXPECT_NEAR(average_precision(pr_curve(from_labels({TP, FP, TP}), 2), ApMode::AllPoints), 0.5 + 0.5 * 2.0 / 3.0, 1e-12);
  EXPECT_EQ(average_precision({}, ApMode::AllPoints), 0.0);
  EXPECT_EQ(average_precision({}, ApMode::Voc07ElevenPoint), 0.0);
}

TEST(AveragePrecision, AgreesWithProtocolOracle) {
  oracle::Gen g(73);
  for (int trial = 0; trial < 3000; ++trial) {
    const auto c = random_case(g, 6, 4);
    const auto r = evaluate(c.dets, c.gt, 0.5);
    const auto o = oracle::run_protocol(c.dets, c.gt, 0.5);
    EXPECT_NEAR(r.ap_all_points, o.ap_all, 1e-12);
    EXPECT_NEAR(r.ap_voc07, o.ap_11, 1e-12);
    EXPECT_GE(r.ap, 0.0);
    EXPECT_LE(r.ap, 1.0);
    for (std::size_t i = 1; i < r.pr_points.size(); ++i) EXPECT_GE(r.pr_points[i].recall, r.pr_points[i - 1].recall);
  }
}

TEST(AveragePrecision, OnlyScoreOrderMatters) {
  oracle::Gen g(74);
  for (int trial = 0; trial < 300; ++trial) {
    auto c = random_case(g, 10, 5);
    const auto before = evaluate(c.dets, c.gt, 0.5);
    for (auto& d : c.dets) d.score = 0.1 + 0.8 * d.score * d.score;  // strictly increasing on [0, 1]
    const auto after = evaluate(c.dets, c.gt, 0.5);
    EXPECT_EQ(before.ap_all_points, after.ap_all_points);
    EXPECT_EQ(before.ap_voc07, after.ap_voc07);
  }
}

TEST(AveragePrecision, FixingAFalsePositiveNeverHurts) {
  oracle::Gen g(75);
  for (int trial = 0; trial < 300; ++trial) {
    GroundTruth gt;
    std::vector<Detection> dets;
    for (int k = 0; k < 4; ++k) gt["a"].push_back({BoundingBox{k * 20.0, 0, k * 20.0 + 10, 10}, false});
    for (int k = 0; k < 4; ++k) {
      const bool hit = g.coin();
      dets.push_back(Detection{"a", g.real(0, 1), shifted(gt["a"][std::size_t(k)].box, hit ? 0.0 : 9.0)});
    }
    const auto before = evaluate(dets, gt, 0.5);
    for (std::size_t k = 0; k < dets.size(); ++k) {
      if (dets[k].box == gt["a"][k].box) continue;
      auto fixed = dets;
      fixed[k].box = gt["a"][k].box;
      EXPECT_GE(evaluate(fixed, gt, 0.5).ap_all_points, before.ap_all_points - 1e-15);
      break;
    }
  }
}

TEST(AveragePrecision, OneOnlyWhenAllFoundFirst) {
  GroundTruth gt{{"a", {{BoundingBox{0, 0, 10, 10}, false}, {BoundingBox{20, 0, 30, 10}, false}}}};
  std::vector<Detection> d{{"a", 0.9, BoundingBox{0, 0, 10, 10}}, {"a", 0.8, BoundingBox{20, 0, 30, 10}},
                           {"a", 0.1, BoundingBox{50, 50, 60, 60}}};
  EXPECT_EQ(evaluate(d, gt, 0.5).ap_all_points, 1.0);
  d[2].score = 0.85;
  EXPECT_LT(evaluate(d, gt, 0.5).ap_all_points, 1.0);
}

TEST(Evaluate, CountsAndMode) {
  GroundTruth gt{{"a", {{BoundingBox{0, 0, 10, 10}, false}, {BoundingBox{40, 40, 50, 50}, true}}}};
  const std::vector<Detection> d{{"a", 0.9, BoundingBox{0, 0, 10, 10}}, {"a", 0.8, BoundingBox{40, 40, 50, 50}},
                                 {"a", 0.7, BoundingBox{70, 70, 80, 80}}};
  const auto r = evaluate(d, gt, 0.5, ApMode::Voc07ElevenPoint);
  EXPECT_EQ(r.counts.n_gt, 1u);
  EXPECT_EQ(r.counts.n_det, 3u);
  EXPECT_EQ(r.counts.n_tp, 1u);
  EXPECT_EQ(r.counts.n_fp, 1u);
  EXPECT_EQ(r.counts.n_ignored, 1u);
  EXPECT_EQ(r.mode, ApMode::Voc07ElevenPoint);
  EXPECT_EQ(r.ap, r.ap_voc07);
}

TEST(MeanAp, Examples) {
  EXPECT_EQ(mean_ap({{"person", 0.832}}), 0.832);
  EXPECT_EQ(mean_ap({{"a", 0.4}, {"b", 0.6}}), 0.5);
  EXPECT_THROW(mean_ap({}), ArgumentError);
}

TEST(BestEpoch, Examples) {
  EXPECT_EQ(best_epoch(std::vector<EpochResult>{{26, 67.3}, {40, 60.1}}), (EpochResult{26, 67.3}));
  EXPECT_EQ(best_epoch(std::vector<EpochResult>{{21, 86.3}, {30, 80.0}}), (EpochResult{21, 86.3}));
  EXPECT_EQ(best_epoch(std::vector<EpochResult>{{6, 0.5}, {5, 0.5}}), (EpochResult{5, 0.5}));
  EXPECT_THROW(best_epoch(std::vector<EpochResult>{}), ArgumentError);
  EXPECT_THROW(best_epoch(std::vector<EpochResult>{{1, 0.1}, {1, 0.2}}), ArgumentError);
}

TEST(EvalIo, DetectionsRoundTrip) {
  oracle::Gen g(76);
  std::vector<Detection> dets;
  for (int i = 0; i < 40; ++i) dets.push_back(Detection{"im" + std::to_string(i % 3), g.real(0, 1), g.real_box(640, 480, 0)});
  EXPECT_EQ(parse_detections(format_detections(dets)), dets);
}

TEST(EvalIo, BadDetectionsNameLine) {
  try {
    parse_detections("{\"image_id\":\"a\",\"score\":0.5,\"box\":[0,0,1,1]}\n{\"image_id\":\"a\",\"score\":2,\"box\":[0,0,1,1]}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_detections("[1,2\n"), ParseError);
}

TEST(EvalIo, ReportRoundTrip) {
  GroundTruth gt{{"a", {{BoundingBox{0, 0, 10, 10}, false}}}};
  const std::vector<Detection> d{{"a", 0.9, BoundingBox{0, 0, 10, 10}}, {"a", 0.3, BoundingBox{1, 1, 4, 4}}};
  const auto r = evaluate(d, gt, 0.5);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("mode"), "all_points");
  EXPECT_EQ(j.at("ap"), 1.0);
  const auto back = eval_report_from_json(j);
  EXPECT_EQ(back.ap, r.ap);
  EXPECT_EQ(back.pr_points, r.pr_points);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(pr_curve_csv(r.pr_points), "recall,precision\n1,1\n1,0.5\n");
}
