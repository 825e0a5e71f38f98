#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "omnipd/datasets.hpp"
#include "omnipd/errors.hpp"
#include "support/oracles.hpp"

using namespace omnipd;

namespace {

std::string voc_xml(const std::string& objects, const std::string& size = "<size><width>500</width><height>375</height><depth>3</depth></size>") {
  return "<annotation>\n<folder>VOC2007</folder>\n<filename>000005.jpg</filename>\n" + size + "\n" + objects +
         "</annotation>\n";
}

std::string object(const std::string& name, int x0, int y0, int x1, int y1, int difficult = 0) {
  return "<object><name>" + name + "</name><difficult>" + std::to_string(difficult) + "</difficult><bndbox><xmin>" +
         std::to_string(x0) + "</xmin><ymin>" + std::to_string(y0) + "</ymin><xmax>" + std::to_string(x1) +
         "</xmax><ymax>" + std::to_string(y1) + "</ymax></bndbox></object>\n";
}

AnnotatedImage frame(SourceName src, int i, int n_boxes, std::optional<std::int64_t> seq = std::nullopt) {
  AnnotatedImage im;
  im.image_id = std::string(to_string(src)) + "_" + std::to_string(i);
  im.file_path = im.image_id + ".png";
  im.dims = ImageDims{64, 48};
  for (int b = 0; b < n_boxes; ++b) {
    im.boxes.push_back(BoundingBox{1.0 + b, 2, 10.0 + b, 20});
    im.difficult.push_back(false);
  }
  im.source = SourceTag{src};
  im.sequence_index = seq;
  return im;
}

std::vector<AnnotatedImage> frames(SourceName src, int n, bool sequence = false, int empty_every = 0) {
  std::vector<AnnotatedImage> out;
  for (int i = 0; i < n; ++i) {
    const bool empty = empty_every > 0 && i % empty_every == 0;
    out.push_back(frame(src, i, empty ? 0 : 1, sequence ? std::optional<std::int64_t>(i) : std::nullopt));
  }
  return out;
}

}  // namespace

TEST(Voc, ParsesPersonBoxWithShiftedMins) {
  const auto im = parse_voc_annotation(voc_xml(object("person", 48, 240, 195, 371)), "person");
  EXPECT_EQ(im.image_id, "000005");
  EXPECT_EQ(im.file_path, "000005.jpg");
  EXPECT_EQ(im.dims, (ImageDims{500, 375}));
  ASSERT_EQ(im.boxes.size(), 1u);
  EXPECT_EQ(im.boxes[0], (BoundingBox{47, 239, 195, 371}));
  EXPECT_EQ(im.difficult, std::vector<bool>{false});
}

TEST(Voc, FiltersOtherClasses) {
  const auto im = parse_voc_annotation(
      voc_xml(object("dog", 1, 1, 50, 50) + object("person", 10, 10, 20, 30, 1)), "person");
  ASSERT_EQ(im.boxes.size(), 1u);
  EXPECT_EQ(im.boxes[0], (BoundingBox{9, 9, 20, 30}));
  EXPECT_EQ(im.difficult, std::vector<bool>{true});
}

TEST(Voc, NoPersonGivesEmptyList) {
  const auto im = parse_voc_annotation(voc_xml(object("car", 1, 1, 5, 5)), "person");
  EXPECT_TRUE(im.boxes.empty());
}

TEST(Voc, FullWidthBoxCoversFrame) {
  const auto im = parse_voc_annotation(voc_xml(object("person", 1, 1, 500, 375)), "person");
  EXPECT_EQ(im.boxes[0], (BoundingBox{0, 0, 500, 375}));
}

TEST(Voc, MalformedXmlReportsLine) {
  const std::string bad = "<annotation>\n<size><width>5</width>\n<height>5</height></size>\n<object>\n</annotation>\n";
  try {
    parse_voc_annotation(bad, "person");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.line(), 0);
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos);
  }
}

TEST(Voc, MissingSizeIsSchemaError) {
  EXPECT_THROW(parse_voc_annotation("<annotation><filename>a.jpg</filename></annotation>", "person"),
               SchemaError);
}

TEST(Voc, InvertedBoxNamesObjectIndex) {
  try {
    parse_voc_annotation(voc_xml(object("dog", 1, 1, 5, 5) + object("person", 30, 10, 20, 40)), "person");
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("object 1"), std::string::npos) << e.what();
  }
}

TEST(Datasets, FilterClass) {
  std::vector<AnnotatedImage> ims{frame(SourceName::VOC07, 0, 2), frame(SourceName::VOC07, 1, 0),
                                  frame(SourceName::VOC07, 2, 1)};
  EXPECT_EQ(filter_class(ims, true).size(), 2u);
  EXPECT_EQ(filter_class(ims, false).size(), 3u);
  EXPECT_TRUE(filter_class({}, true).empty());
}

TEST(Datasets, DownsampleExamples) {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  EXPECT_EQ(downsample_sequence(v, 5).size(), 20u);
  std::vector<int> w(101);
  std::iota(w.begin(), w.end(), 0);
  const auto d = downsample_sequence(w, 10);
  ASSERT_EQ(d.size(), 11u);
  EXPECT_EQ(d.back(), 100);
  EXPECT_EQ(downsample_sequence(w, 1), w);
  EXPECT_THROW(downsample_sequence(w, 0), ArgumentError);
}

TEST(Datasets, DownsampleLengthIsCeiling) {
  for (int n = 0; n < 60; ++n)
    for (int f = 1; f < 12; ++f) {
      std::vector<int> v(static_cast<std::size_t>(n));
      EXPECT_EQ(downsample_sequence(v, f).size(), static_cast<std::size_t>((n + f - 1) / f));
    }
}

TEST(Datasets, SourceViews) {
  EXPECT_EQ(SourceTag{SourceName::VOC07}.view(), View::Perspective);
  EXPECT_EQ(SourceTag{SourceName::VOC12train}.view(), View::Perspective);
  for (auto s : {SourceName::HDA_Cam02, SourceName::PIROPO_train, SourceName::Bomni, SourceName::DST}) {
    EXPECT_EQ(SourceTag{s}.view(), View::Omnidirectional);
  }
  EXPECT_THROW(parse_source_name("COCO"), LookupError);
}

TEST(Manifest, TrainVocTotal) {
  SourceMap src{{SourceTag{SourceName::VOC07}, frames(SourceName::VOC07, 4192)},
                {SourceTag{SourceName::VOC12train}, frames(SourceName::VOC12train, 9583)}};
  const auto split = assemble_split(bundled_manifest("train_voc"), src);
  EXPECT_EQ(split.images.size(), 13775u);
  EXPECT_EQ(split.stats.total, 13775);
  EXPECT_TRUE(split.stats.mismatches.empty());
}

TEST(Manifest, TestDbTotal) {
  SourceMap src{{SourceTag{SourceName::Bomni}, frames(SourceName::Bomni, 10340, true)},
                {SourceTag{SourceName::DST}, frames(SourceName::DST, 701)}};
  const auto stats = manifest_stats(bundled_manifest("test_db"), src);
  EXPECT_EQ(stats.total, 1735);
  EXPECT_TRUE(stats.mismatches.empty());
}

TEST(Manifest, TrainHpReportsDiscrepancy) {
  SourceMap src{{SourceTag{SourceName::HDA_Cam02}, frames(SourceName::HDA_Cam02, 1500, true, 10)},
                {SourceTag{SourceName::PIROPO_train}, frames(SourceName::PIROPO_train, 7229 * 5, true)}};
  // 1500 frames with every tenth empty leaves 1350; pad to 1388.
  for (int i = 0; i < 38; ++i) src[SourceTag{SourceName::HDA_Cam02}].push_back(frame(SourceName::HDA_Cam02, 2000 + i, 1, 2000 + i));
  const auto stats = manifest_stats(bundled_manifest("train_hp"), src);
  EXPECT_EQ(stats.counts[0].count, 1388);
  EXPECT_EQ(stats.counts[1].count, 7229);
  EXPECT_EQ(stats.total, 8617);
  ASSERT_EQ(stats.mismatches.size(), 1u);
  EXPECT_EQ(stats.mismatches[0].scope, "total");
  EXPECT_EQ(stats.mismatches[0].expected, 8567);
  EXPECT_EQ(stats.mismatches[0].actual, 8617);
}

TEST(Manifest, TotalEqualsSumOfCounts) {
  oracle::Gen g(31);
  for (int trial = 0; trial < 50; ++trial) {
    DatasetManifest m{"custom", {}, std::nullopt};
    SourceMap src;
    for (auto s : {SourceName::VOC07, SourceName::HDA_Cam02, SourceName::DST}) {
      if (g.coin()) continue;
      m.entries.push_back(ManifestEntry{SourceTag{s}, g.integer(1, 7), std::nullopt, g.coin()});
      src[SourceTag{s}] = frames(s, g.integer(0, 200), g.coin(), g.integer(0, 4));
    }
    const auto split = assemble_split(m, src);
    std::int64_t sum = 0;
    for (const auto& c : split.stats.counts) sum += c.count;
    EXPECT_EQ(split.stats.total, sum);
    EXPECT_EQ(static_cast<std::int64_t>(split.images.size()), sum);
    EXPECT_EQ(manifest_stats(m, src).total, sum);
  }
}

TEST(Manifest, SingleSourceFactorOne) {
  DatasetManifest m{"one", {ManifestEntry{SourceTag{SourceName::DST}, 1, std::nullopt, false}}, std::nullopt};
  SourceMap src{{SourceTag{SourceName::DST}, frames(SourceName::DST, 37)}};
  EXPECT_EQ(manifest_stats(m, src).total, 37);
}

TEST(Manifest, EmptyManifest) {
  const auto split = assemble_split(DatasetManifest{"empty", {}, std::nullopt}, {});
  EXPECT_TRUE(split.images.empty());
  EXPECT_TRUE(split.stats.counts.empty());
  EXPECT_EQ(split.stats.total, 0);
}

TEST(Manifest, MissingSourceIsAssemblyError) {
  try {
    assemble_split(bundled_manifest("test_db"), {});
    FAIL();
  } catch (const AssemblyError& e) {
    EXPECT_NE(std::string(e.what()).find("Bomni"), std::string::npos);
  }
}

TEST(Manifest, DuplicateSourceIsRejected) {
  DatasetManifest m{"dup",
                    {ManifestEntry{SourceTag{SourceName::DST}}, ManifestEntry{SourceTag{SourceName::DST}}},
                    std::nullopt};
  EXPECT_THROW(validate(m), SchemaError);
}

TEST(Manifest, DownsamplesEachSequenceSeparately) {
  // Two runs of 7 frames: each keeps indices 0, 3, 6.
  std::vector<AnnotatedImage> v;
  for (int run = 0; run < 2; ++run)
    for (int i = 0; i < 7; ++i) v.push_back(frame(SourceName::PIROPO_train, run * 7 + i, 1, i));
  DatasetManifest m{"seq", {ManifestEntry{SourceTag{SourceName::PIROPO_train}, 3, std::nullopt, false}}, std::nullopt};
  const auto split = assemble_split(m, {{SourceTag{SourceName::PIROPO_train}, v}});
  ASSERT_EQ(split.images.size(), 6u);
  EXPECT_EQ(split.images[3].image_id, "PIROPO_train_7");
}

TEST(Manifest, BundledFilesMatchBuiltIns) {
  for (const auto& name : bundled_split_names()) {
    const auto path = std::filesystem::path(OMNIPD_DATA_DIR) / "manifests" / (name + ".json");
    EXPECT_EQ(to_json(read_manifest(path)), to_json(bundled_manifest(name))) << name;
  }
  EXPECT_THROW(bundled_manifest("train_coco"), LookupError);
}

TEST(Recipes, TableRows) {
  auto r = recipe_lookup(Model::MoSSD, "train_voc", false);
  EXPECT_EQ(r.base_learning_rate, 0.002);
  EXPECT_EQ(r.epochs, 40);
  r = recipe_lookup(Model::ResSSD, "train_hpv07", false);
  EXPECT_EQ(r.base_learning_rate, 0.0005);
  EXPECT_EQ(r.epochs, 30);
  r = recipe_lookup(Model::RFCN, "train_hpv07", false);
  EXPECT_EQ(r.base_learning_rate, 0.00008);
  EXPECT_EQ(r.epochs, 40);
  EXPECT_EQ(recipe_table().size(), 9u);
  EXPECT_THROW(recipe_lookup(Model::RFCN, "train_voc", false), LookupError);
  EXPECT_EQ(parse_model("R-FCN"), Model::RFCN);
  EXPECT_THROW(parse_model("yolo"), LookupError);
}

TEST(Recipes, CosineSchedule) {
  EXPECT_EQ(cosine_lr(0, 40, 0.002), 0.002);
  EXPECT_NEAR(cosine_lr(20, 40, 0.002), 0.001, 1e-15);
  EXPECT_NEAR(cosine_lr(40, 40, 0.002), 0.0, 1e-18);
  double prev = 1.0;
  for (int s = 0; s <= 100; ++s) {
    const double v = cosine_lr(s, 100, 1.0);
    EXPECT_LE(v, prev);
    prev = v;
  }
  EXPECT_THROW(cosine_lr(41, 40, 0.002), ArgumentError);
  EXPECT_THROW(cosine_lr(-1, 40, 0.002), ArgumentError);
  EXPECT_THROW(cosine_lr(0, 0, 0.002), ArgumentError);
}

TEST(Serialization, RecordsRoundTrip) {
  oracle::Gen g(41);
  std::vector<AnnotatedImage> ims;
  for (int i = 0; i < 50; ++i) {
    AnnotatedImage im = frame(SourceName::Bomni, i, 0, g.coin() ? std::optional<std::int64_t>(i) : std::nullopt);
    im.dims = ImageDims{640, 640};
    for (int b = 0; b < g.integer(0, 5); ++b) {
      im.boxes.push_back(g.real_box(640, 640, 0.0));
      im.difficult.push_back(g.coin());
    }
    ims.push_back(im);
  }
  const auto text = format_dataset(ims);
  EXPECT_EQ(parse_dataset(text), ims);
  EXPECT_EQ(format_dataset(parse_dataset(text)), text);
}

TEST(Serialization, BadRecordNamesLine) {
  const std::string good = format_dataset(std::vector<AnnotatedImage>{frame(SourceName::DST, 0, 1)});
  try {
    parse_dataset(good + "{\"image_id\": 3}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  try {
    parse_dataset(good + "\n{not json\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(Serialization, BoxOutsideImageIsRejected) {
  auto im = frame(SourceName::DST, 0, 1);
  im.boxes[0].x_max = 65;
  EXPECT_THROW(validate(im), SchemaError);
}
