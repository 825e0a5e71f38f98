#include "omnipd/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "omnipd/augment.hpp"
#include "omnipd/bench.hpp"
#include "omnipd/datasets.hpp"
#include "omnipd/errors.hpp"
#include "omnipd/eval.hpp"
#include "omnipd/fisheye.hpp"
#include "omnipd/io.hpp"
#include "omnipd/kernels.hpp"
#include "omnipd/postprocess.hpp"

#ifndef OMNIPD_VERSION
#define OMNIPD_VERSION "dev"
#endif

namespace omnipd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

std::string dump(const json& j) { return j.dump(2) + "\n"; }

fs::path resolve(const fs::path& base_file, const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute()) return p;
  return base_file.parent_path() / p;
}

std::string relative_to(const fs::path& target, const fs::path& file_in_dir) {
  const auto dir = fs::absolute(file_in_dir).parent_path().lexically_normal();
  return fs::absolute(target).lexically_normal().lexically_relative(dir).generic_string();
}

std::string safe_file_stem(const std::string& id) {
  std::string out = id;
  for (auto& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return out.empty() ? "_" : out;
}

void write_png_atomic(const fs::path& path, const Image& image) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  write_png(tmp, image);
  fs::rename(tmp, path);
}

class OutputNames {
public:
  explicit OutputNames(fs::path dir) : dir_(std::move(dir)) {}

  fs::path png_for(const std::string& image_id) {
    const auto stem = safe_file_stem(image_id);
    if (!used_.insert(stem).second) {
      throw ArgumentError("image ids collide after sanitizing: '" + image_id + "'");
    }
    return dir_ / (stem + ".png");
  }

private:
  fs::path dir_;
  std::set<std::string> used_;
};

Image load_image_for(const AnnotatedImage& record, const fs::path& dataset_path) {
  const auto path = resolve(dataset_path, record.file_path);
  Image image = read_png(path);
  if (image.dims() != record.dims) {
    std::ostringstream os;
    os << "image '" << path.string() << "' is " << image.dims() << " but its record says "
       << record.dims;
    throw SchemaError(os.str());
  }
  return image;
}

std::vector<bool> pick(const std::vector<bool>& flags, const std::vector<std::size_t>& index) {
  std::vector<bool> out;
  out.reserve(index.size());
  for (auto i : index) out.push_back(i < flags.size() && flags[i]);
  return out;
}

std::pair<std::string, std::string> split_assignment(const std::string& text, const char* flag) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw ArgumentError(std::string(flag) + " expects NAME=PATH, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ArgumentError(std::string(flag) + ": '" + item + "' is not a number");
    }
  }
  if (out.size() != expected) {
    throw ArgumentError(std::string(flag) + " expects " + std::to_string(expected) + " numbers");
  }
  return out;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestOptions {
  std::string voc_dir;
  std::string source = "VOC07";
  std::string class_name = "person";
  bool keep_empty = false;
  std::string image_root;
  std::string manifest;
  std::string split;
  std::vector<std::string> sources;
  std::string out;
  std::string stats;
};

int run_ingest(const IngestOptions& o, std::ostream& out, std::ostream& err) {
  if (!o.voc_dir.empty()) {
    const SourceTag tag{parse_source_name(o.source)};
    std::vector<fs::path> files;
    if (!fs::is_directory(o.voc_dir)) throw IoError("'" + o.voc_dir + "' is not a directory");
    for (const auto& entry : fs::directory_iterator(o.voc_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".xml") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<AnnotatedImage> images;
    for (const auto& f : files) {
      try {
        auto im = parse_voc_annotation(read_text(f), o.class_name, tag);
        if (im.image_id.empty()) im.image_id = f.stem().string();
        if (!o.image_root.empty()) im.file_path = (fs::path(o.image_root) / im.file_path).generic_string();
        images.push_back(std::move(im));
      } catch (const ParseError& e) {
        throw ParseError(f.string() + ": " + e.what());
      } catch (const SchemaError& e) {
        throw SchemaError(f.string() + ": " + e.what());
      }
    }
    images = filter_class(std::move(images), !o.keep_empty);
    if (o.out.empty()) {
      out << format_dataset(images);
    } else {
      write_atomic(o.out, format_dataset(images));
      out << dump({{"source", o.source}, {"files", files.size()}, {"images", images.size()}});
    }
    return 0;
  }

  if (o.manifest.empty() == o.split.empty()) {
    throw ArgumentError("ingest needs --voc-dir, or exactly one of --manifest / --split");
  }
  const DatasetManifest manifest =
      o.manifest.empty() ? bundled_manifest(o.split) : read_manifest(o.manifest);

  SourceMap sources;
  for (const auto& s : o.sources) {
    const auto [name, path] = split_assignment(s, "--source");
    sources[SourceTag{parse_source_name(name)}] = read_dataset(path);
  }

  json stats_json;
  if (o.out.empty()) {
    const auto stats = manifest_stats(manifest, sources);
    stats_json = to_json(stats);
    for (const auto& m : stats.mismatches) err << "warning: " << m.message() << "\n";
  } else {
    const auto split = assemble_split(manifest, sources);
    stats_json = to_json(split.stats);
    for (const auto& m : split.stats.mismatches) err << "warning: " << m.message() << "\n";
    write_atomic(o.out, format_dataset(split.images));
  }
  if (!o.stats.empty()) write_atomic(o.stats, dump(stats_json));
  out << dump(stats_json);
  return 0;
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

struct AugmentOptions {
  std::string data;
  std::string out;
  std::string image_dir;
  std::string policy;
  std::string chains;
  std::uint64_t seed = kDefaultSeed;
};

int run_augment(const AugmentOptions& o, std::ostream& out) {
  const AugmentPolicy policy =
      o.policy.empty() ? AugmentPolicy{} : policy_from_json(json::parse(read_text(o.policy)));
  const auto records = read_dataset(o.data);
  const fs::path image_dir = o.image_dir.empty() ? fs::path(o.out).parent_path() / "images"
                                                 : fs::path(o.image_dir);
  OutputNames names(image_dir);

  std::vector<AnnotatedImage> result;
  std::string chain_lines;
  std::size_t dropped = 0;
  for (const auto& rec : records) {
    const Image image = load_image_for(rec, o.data);
    const RngState state{o.seed, stream_id_for(rec.image_id)};
    const AugmentChain chain = sample_chain(policy, state, image.dims(), rec.boxes);
    const AugmentedSample sample = augment_sample(image, rec.boxes, chain);

    const auto png = names.png_for(rec.image_id);
    write_png_atomic(png, sample.image);

    AnnotatedImage next = rec;
    next.file_path = relative_to(png, o.out);
    next.dims = sample.image.dims();
    next.boxes = sample.boxes;
    next.difficult = pick(rec.difficult, sample.source_index);
    dropped += rec.boxes.size() - sample.boxes.size();
    result.push_back(std::move(next));

    json line = to_json(chain);
    line["image_id"] = rec.image_id;
    chain_lines += line.dump() + "\n";
  }
  write_atomic(o.out, format_dataset(result));
  if (!o.chains.empty()) write_atomic(o.chains, chain_lines);
  out << dump({{"images", result.size()}, {"boxes_dropped", dropped}, {"seed", o.seed}});
  return 0;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOptions {
  std::string data;
  std::string out;
  std::string image_dir;
  std::string mode = "fisheye";
  double focal = 0.0;
  double fov_deg = 180.0;
  double cx = -1.0;
  double cy = -1.0;
  int width = 640;
  int height = 640;
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
  double cam_height = 1.0;
  double src_focal = 0.0;
  std::string quad_dst;
  int samples_per_edge = kDefaultSamplesPerEdge;
};

int run_synth(const SynthOptions& o, std::ostream& out) {
  if (o.mode != "fisheye" && o.mode != "quad") {
    throw ArgumentError("--mode must be fisheye or quad");
  }
  const auto records = read_dataset(o.data);
  const fs::path image_dir = o.image_dir.empty() ? fs::path(o.out).parent_path() / "images"
                                                 : fs::path(o.image_dir);
  OutputNames names(image_dir);
  std::vector<double> quad_fractions;
  if (o.mode == "quad") {
    if (o.quad_dst.empty()) throw ArgumentError("--mode quad needs --quad-dst");
    quad_fractions = parse_numbers(o.quad_dst, 8, "--quad-dst");
  }

  std::vector<AnnotatedImage> result;
  std::size_t dropped = 0;
  for (const auto& rec : records) {
    const Image image = load_image_for(rec, o.data);
    WarpResult warped;
    if (o.mode == "fisheye") {
      const ImageDims dims = ImageDims::make(o.width, o.height);
      const double fov = o.fov_deg * std::numbers::pi / 180.0;
      const double focal = o.focal > 0.0 ? o.focal : std::min(dims.width, dims.height) / fov;
      const Eigen::Vector2d pp(o.cx >= 0.0 ? o.cx : dims.width / 2.0,
                               o.cy >= 0.0 ? o.cy : dims.height / 2.0);
      FisheyeScene scene;
      const double sf = o.src_focal > 0.0 ? o.src_focal : image.width() / 2.0;
      scene.source = PinholeIntrinsics{sf, sf, image.width() / 2.0, image.height() / 2.0};
      scene.model = FisheyeModel::make(focal, pp, dims, fov);
      const double deg = std::numbers::pi / 180.0;
      auto pose = CameraPose::from_euler(o.roll * deg, o.pitch * deg, o.yaw * deg);
      const Eigen::Vector3d center(0.0, 0.0, scene.plane_depth - o.cam_height);
      pose.translation = -pose.rotation * center;
      scene.pose = pose;
      warped = warp_to_fisheye(image, rec.boxes, scene, o.samples_per_edge);
    } else {
      const double w = image.width();
      const double h = image.height();
      QuadTransform quad;
      quad.src = {Eigen::Vector2d(0, 0), Eigen::Vector2d(w, 0), Eigen::Vector2d(w, h),
                  Eigen::Vector2d(0, h)};
      for (int i = 0; i < 4; ++i) {
        quad.dst[i] = Eigen::Vector2d(quad_fractions[2 * i] * w, quad_fractions[2 * i + 1] * h);
      }
      warped = four_point_warp(image, rec.boxes, quad, std::nullopt, o.samples_per_edge);
    }

    const auto png = names.png_for(rec.image_id);
    write_png_atomic(png, warped.image);
    AnnotatedImage next = rec;
    next.file_path = relative_to(png, o.out);
    next.dims = warped.image.dims();
    next.boxes = warped.boxes;
    next.difficult = pick(rec.difficult, warped.source_index);
    dropped += rec.boxes.size() - warped.boxes.size();
    result.push_back(std::move(next));
  }
  write_atomic(o.out, format_dataset(result));
  out << dump({{"images", result.size()}, {"boxes_dropped", dropped}, {"mode", o.mode}});
  return 0;
}

// ---------------------------------------------------------------------------
// nms / eval
// ---------------------------------------------------------------------------

struct NmsOptions {
  std::string in;
  std::string out;
  double iou = 0.5;
  double score = 0.0;
};

int run_nms(const NmsOptions& o, std::ostream& out) {
  const auto dets = read_detections(o.in);
  const auto kept = nms_per_image(dets, o.iou, o.score);
  if (o.out.empty()) {
    out << format_detections(kept);
  } else {
    write_atomic(o.out, format_detections(kept));
    out << dump({{"input", dets.size()}, {"kept", kept.size()}});
  }
  return 0;
}

struct EvalOptions {
  std::string gt;
  std::string det;
  double iou = 0.5;
  std::string mode = "all_points";
  std::string out;
  std::string csv;
};

int run_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  const ApMode mode = parse_ap_mode(o.mode);
  const auto gt = ground_truth_from(read_dataset(o.gt));
  const auto dets = read_detections(o.det);
  const EvalReport report = evaluate(dets, gt, o.iou, mode);
  for (const auto& d : report.diagnostics) err << "warning: " << d << "\n";
  const std::string text = dump(to_json(report));
  if (!o.out.empty()) write_atomic(o.out, text);
  if (!o.csv.empty()) write_atomic(o.csv, pr_curve_csv(report.pr_points));
  out << text;
  return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchOptions {
  std::string stage = "augment";
  int warmup = kDefaultWarmup;
  int repeat = 1;
  int images = 50;
  int size = 640;
  double overhead = 0.0;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
};

Image synthetic_image(int size, Rng& rng) {
  Image im(size, size, 3);
  for (auto& p : im.pixels()) p = static_cast<std::uint8_t>(rng.below(256));
  return im;
}

std::vector<Detection> synthetic_detections(const std::string& image_id, int size, int n, Rng& rng) {
  std::vector<Detection> dets;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(0, size * 0.8);
    const double y = rng.uniform(0, size * 0.8);
    const double w = rng.uniform(8, size * 0.2);
    const double h = rng.uniform(8, size * 0.2);
    dets.push_back(Detection{image_id, rng.uniform(), BoundingBox{x, y, x + w, y + h}});
  }
  return dets;
}

int run_bench(const BenchOptions& o, std::ostream& out) {
  if (o.images < 1 || o.repeat < 1 || o.size < 8) {
    throw ArgumentError("bench needs --images >= 1, --repeat >= 1 and --size >= 8");
  }
  Rng rng(RngState{o.seed, stream_id_for("bench")});
  std::vector<Image> inputs;
  const int distinct = std::min(o.images, 8);
  std::vector<Image> pool;
  for (int i = 0; i < distinct; ++i) pool.push_back(synthetic_image(o.size, rng));
  for (int r = 0; r < o.repeat; ++r)
    for (int i = 0; i < o.images; ++i) inputs.push_back(pool[static_cast<std::size_t>(i % distinct)]);

  const std::vector<BoundingBox> boxes{BoundingBox{o.size * 0.2, o.size * 0.2, o.size * 0.5, o.size * 0.6},
                                       BoundingBox{o.size * 0.6, o.size * 0.1, o.size * 0.9, o.size * 0.5}};
  std::function<void(const Image&)> stage;
  std::uint64_t counter = 0;
  const AugmentPolicy policy;
  FisheyeScene scene;
  std::vector<Detection> dets;
  GroundTruth gt;

  if (o.stage == "augment") {
    stage = [&](const Image& im) {
      const auto chain = sample_chain(policy, RngState{o.seed, counter++}, im.dims(), boxes);
      (void)augment_sample(im, boxes, chain);
    };
  } else if (o.stage == "fisheye") {
    scene.source = PinholeIntrinsics{o.size / 2.0, o.size / 2.0, o.size / 2.0, o.size / 2.0};
    scene.model = FisheyeModel::make(o.size / std::numbers::pi, Eigen::Vector2d(o.size / 2.0, o.size / 2.0),
                                     ImageDims{o.size, o.size}, std::numbers::pi);
    scene.pose = CameraPose::from_euler(0.2, 0.1, 0.0);
    stage = [&](const Image& im) { (void)warp_to_fisheye(im, boxes, scene); };
  } else if (o.stage == "nms" || o.stage == "eval") {
    dets = synthetic_detections("bench", o.size, 200, rng);
    gt["bench"] = {};
    for (const auto& d : synthetic_detections("bench", o.size, 20, rng)) gt["bench"].push_back({d.box, false});
    if (o.stage == "nms") {
      stage = [&](const Image&) { (void)nms(dets, 0.5, 0.0); };
    } else {
      stage = [&](const Image&) { (void)evaluate(dets, gt, 0.5); };
    }
  } else {
    throw ArgumentError("unknown bench stage '" + o.stage + "' (augment|fisheye|nms|eval)");
  }

  const TimingStats stats = measure(stage, inputs, o.warmup, o.overhead);
  const json result{{"stage", o.stage},
                    {"isa", kernels::to_string(kernels::active().isa)},
                    {"image_size", o.size},
                    {"warmup", o.warmup},
                    {"stats", to_json(stats)}};
  if (!o.out.empty()) write_atomic(o.out, dump(result));
  out << dump(result);
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportOptions {
  std::vector<std::string> epochs;
  std::string series;
  bool recipes = false;
  std::string recipe;
  std::string out;
};

int run_report(const ReportOptions& o, std::ostream& out) {
  json result = json::object();
  if (o.recipes) {
    json rows = json::array();
    for (const auto& r : recipe_table()) rows.push_back(to_json(r));
    result["recipes"] = std::move(rows);
  }
  if (!o.recipe.empty()) {
    std::vector<std::string> parts;
    std::stringstream ss(o.recipe);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.size() < 2 || parts.size() > 3 || (parts.size() == 3 && parts[2] != "locked")) {
      throw ArgumentError("--recipe expects MODEL:DATASET[:locked]");
    }
    const auto r = recipe_lookup(parse_model(parts[0]), parts[1], parts.size() == 3);
    json schedule = json::array();
    for (int e = 0; e <= r.epochs; ++e) schedule.push_back(cosine_lr(e, r.epochs, r.base_learning_rate));
    json j = to_json(r);
    j["lr_per_epoch"] = std::move(schedule);
    result["recipe"] = std::move(j);
  }

  EpochSeries series;
  std::optional<std::string> mode;
  for (const auto& e : o.epochs) {
    const auto [epoch_text, path] = split_assignment(e, "--epoch");
    int epoch = 0;
    try {
      std::size_t used = 0;
      epoch = std::stoi(epoch_text, &used);
      if (used != epoch_text.size()) throw std::invalid_argument(epoch_text);
    } catch (const std::exception&) {
      throw ArgumentError("--epoch: '" + epoch_text + "' is not an integer");
    }
    json j;
    try {
      j = json::parse(read_text(path));
    } catch (const json::parse_error& err) {
      throw ParseError(path + ": " + err.what());
    }
    const auto report = eval_report_from_json(j);
    const std::string m(to_string(report.mode));
    if (mode && *mode != m) throw ArgumentError("reports mix AP modes");
    mode = m;
    series.push_back(EpochResult{epoch, report.ap});
  }
  if (!o.series.empty()) {
    json j;
    try {
      j = json::parse(read_text(o.series));
      for (const auto& row : j) series.push_back(EpochResult{row.at("epoch").get<int>(), row.at("map").get<double>()});
    } catch (const json::exception& err) {
      throw SchemaError(o.series + ": " + err.what());
    }
  }
  if (!series.empty()) {
    std::sort(series.begin(), series.end(),
              [](const auto& a, const auto& b) { return a.epoch < b.epoch; });
    const auto best = best_epoch(series);
    json rows = json::array();
    for (const auto& s : series) rows.push_back({{"epoch", s.epoch}, {"map", s.map}});
    result["series"] = std::move(rows);
    result["best"] = {{"epoch", best.epoch}, {"map", best.map}};
    if (mode) result["mode"] = *mode;
  }
  if (result.empty()) throw ArgumentError("report needs --epoch, --series, --recipes or --recipe");
  if (!o.out.empty()) write_atomic(o.out, dump(result));
  out << dump(result);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Data, augmentation and evaluation toolkit for top-view omnidirectional person detection",
               "omnipd"};
  app.set_version_flag("--version", OMNIPD_VERSION);
  app.require_subcommand(1);
  std::string isa = "auto";
  app.add_option("--isa", isa, "Kernel variant: auto, scalar or avx2")->capture_default_str();

  IngestOptions ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Convert VOC XML or assemble a split from a manifest");
  ingest_cmd->add_option("--voc-dir", ingest.voc_dir, "Directory of VOC XML annotations to convert");
  ingest_cmd->add_option("--source-tag", ingest.source, "Source tag for converted records")->capture_default_str();
  ingest_cmd->add_option("--class", ingest.class_name, "Class to keep")->capture_default_str();
  ingest_cmd->add_flag("--keep-empty", ingest.keep_empty, "Keep images without boxes of the class");
  ingest_cmd->add_option("--image-root", ingest.image_root, "Prefix for file_path of converted records");
  ingest_cmd->add_option("--manifest", ingest.manifest, "Manifest JSON file");
  ingest_cmd->add_option("--split", ingest.split, "Bundled split: train_voc, train_hp, train_hpv07, test_db");
  ingest_cmd->add_option("--source", ingest.sources, "NAME=dataset.jsonl (repeatable)");
  ingest_cmd->add_option("--out", ingest.out, "Output dataset (JSON lines)");
  ingest_cmd->add_option("--stats", ingest.stats, "Write per-source counts as JSON");

  AugmentOptions augment;
  auto* augment_cmd = app.add_subcommand("augment", "Apply the augmentation policy to a dataset");
  augment_cmd->add_option("--data", augment.data, "Input dataset (JSON lines)")->required();
  augment_cmd->add_option("--out", augment.out, "Output dataset (JSON lines)")->required();
  augment_cmd->add_option("--image-dir", augment.image_dir, "Where augmented PNGs go (default: images/ next to --out)");
  augment_cmd->add_option("--policy", augment.policy, "Policy JSON (default: built-in policy)");
  augment_cmd->add_option("--chains", augment.chains, "Also write the drawn chains (JSON lines)");
  augment_cmd->add_option("--seed", augment.seed, "Random seed")->capture_default_str();

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Synthesize fisheye or four-point-warped images");
  synth_cmd->add_option("--data", synth.data, "Input dataset (JSON lines)")->required();
  synth_cmd->add_option("--out", synth.out, "Output dataset (JSON lines)")->required();
  synth_cmd->add_option("--image-dir", synth.image_dir, "Where warped PNGs go (default: images/ next to --out)");
  synth_cmd->add_option("--mode", synth.mode, "fisheye or quad")->capture_default_str();
  synth_cmd->add_option("--focal", synth.focal, "Fisheye focal length, pixels per radian (default: fill the image)");
  synth_cmd->add_option("--fov", synth.fov_deg, "Fisheye field of view, degrees")->capture_default_str();
  synth_cmd->add_option("--cx", synth.cx, "Fisheye principal point x (default: centre)");
  synth_cmd->add_option("--cy", synth.cy, "Fisheye principal point y (default: centre)");
  synth_cmd->add_option("--width", synth.width, "Output width")->capture_default_str();
  synth_cmd->add_option("--height", synth.height, "Output height")->capture_default_str();
  synth_cmd->add_option("--roll", synth.roll, "Camera roll, degrees")->capture_default_str();
  synth_cmd->add_option("--pitch", synth.pitch, "Camera pitch, degrees")->capture_default_str();
  synth_cmd->add_option("--yaw", synth.yaw, "Camera yaw, degrees")->capture_default_str();
  synth_cmd->add_option("--cam-height", synth.cam_height,
                        "Camera distance to the source image plane (plane depth is 1)")
      ->capture_default_str();
  synth_cmd->add_option("--src-focal", synth.src_focal, "Source pinhole focal, pixels (default: width / 2)");
  synth_cmd->add_option("--quad-dst", synth.quad_dst,
                        "Quad mode: destinations of the image corners TL,TR,BR,BL as 8 width/height fractions");
  synth_cmd->add_option("--samples-per-edge", synth.samples_per_edge, "Box remapping samples per edge")
      ->capture_default_str();

  NmsOptions nms_opts;
  auto* nms_cmd = app.add_subcommand("nms", "Greedy non-maximum suppression per image");
  nms_cmd->add_option("--in", nms_opts.in, "Detections (JSON lines)")->required();
  nms_cmd->add_option("--out", nms_opts.out, "Output detections (default: stdout)");
  nms_cmd->add_option("--iou", nms_opts.iou, "Suppress when IoU is above this")->capture_default_str();
  nms_cmd->add_option("--score", nms_opts.score, "Drop detections scoring below this")->capture_default_str();

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Score detections against ground truth (VOC AP)");
  eval_cmd->add_option("--gt", eval_opts.gt, "Ground-truth dataset (JSON lines)")->required();
  eval_cmd->add_option("--det", eval_opts.det, "Detections (JSON lines)")->required();
  eval_cmd->add_option("--iou", eval_opts.iou, "Match threshold")->capture_default_str();
  eval_cmd->add_option("--mode", eval_opts.mode, "all_points or voc07")->capture_default_str();
  eval_cmd->add_option("--out", eval_opts.out, "Write the report JSON here as well");
  eval_cmd->add_option("--csv", eval_opts.csv, "Write the PR curve as CSV");

  BenchOptions bench_opts;
  auto* bench_cmd = app.add_subcommand("bench", "Per-image latency of a built-in stage");
  bench_cmd->add_option("--stage", bench_opts.stage, "augment, fisheye, nms or eval")->capture_default_str();
  bench_cmd->add_option("--warmup", bench_opts.warmup, "Untimed leading iterations")->capture_default_str();
  bench_cmd->add_option("--repeat", bench_opts.repeat, "Passes over the image list")->capture_default_str();
  bench_cmd->add_option("--images", bench_opts.images, "Images per pass")->capture_default_str();
  bench_cmd->add_option("--size", bench_opts.size, "Square image size")->capture_default_str();
  bench_cmd->add_option("--overhead", bench_opts.overhead, "Fixed pre/post-processing cost, ms")->capture_default_str();
  bench_cmd->add_option("--seed", bench_opts.seed, "Random seed")->capture_default_str();
  bench_cmd->add_option("--out", bench_opts.out, "Write stats JSON here as well");

  ReportOptions report_opts;
  auto* report_cmd = app.add_subcommand("report", "Best epoch over eval reports; training recipes");
  report_cmd->add_option("--epoch", report_opts.epochs, "EPOCH=report.json (repeatable)");
  report_cmd->add_option("--series", report_opts.series, "JSON array of {epoch, map}");
  report_cmd->add_flag("--recipes", report_opts.recipes, "Print the training recipe table");
  report_cmd->add_option("--recipe", report_opts.recipe, "MODEL:DATASET[:locked] with its cosine schedule");
  report_cmd->add_option("--out", report_opts.out, "Write the report JSON here as well");

  std::vector<std::string> argv_storage{"omnipd"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (isa == "scalar") {
      kernels::select(kernels::Isa::Scalar);
    } else if (isa == "avx2") {
      kernels::select(kernels::Isa::Avx2);
    } else if (isa != "auto") {
      err << "error: --isa must be auto, scalar or avx2\n";
      return 2;
    }

    if (*ingest_cmd) return run_ingest(ingest, out, err);
    if (*augment_cmd) return run_augment(augment, out);
    if (*synth_cmd) return run_synth(synth, out);
    if (*nms_cmd) return run_nms(nms_opts, out);
    if (*eval_cmd) return run_eval(eval_opts, out, err);
    if (*bench_cmd) return run_bench(bench_opts, out);
    if (*report_cmd) return run_report(report_opts, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace omnipd::cli
