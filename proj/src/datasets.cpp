#include "omnipd/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "omnipd/io.hpp"

namespace omnipd {

namespace pt = boost::property_tree;
using nlohmann::json;

namespace {

constexpr std::array<std::pair<SourceName, std::string_view>, 6> kSourceNames{{
    {SourceName::VOC07, "VOC07"},
    {SourceName::VOC12train, "VOC12train"},
    {SourceName::HDA_Cam02, "HDA_Cam02"},
    {SourceName::PIROPO_train, "PIROPO_train"},
    {SourceName::Bomni, "Bomni"},
    {SourceName::DST, "DST"},
}};

}  // namespace

View SourceTag::view() const noexcept {
  switch (name) {
    case SourceName::VOC07:
    case SourceName::VOC12train:
      return View::Perspective;
    default:
      return View::Omnidirectional;
  }
}

std::string_view to_string(SourceName name) noexcept {
  for (const auto& [n, s] : kSourceNames) {
    if (n == name) return s;
  }
  return "?";
}

std::string_view to_string(View view) noexcept {
  return view == View::Perspective ? "perspective" : "omnidirectional";
}

SourceName parse_source_name(std::string_view text) {
  for (const auto& [n, s] : kSourceNames) {
    if (s == text) return n;
  }
  throw LookupError("unknown source '" + std::string(text) + "'");
}

void validate(const AnnotatedImage& image) {
  if (image.dims.width <= 0 || image.dims.height <= 0) {
    throw SchemaError("image '" + image.image_id + "' has non-positive dims");
  }
  if (image.difficult.size() != image.boxes.size()) {
    throw SchemaError("image '" + image.image_id + "': difficult flags do not match boxes");
  }
  for (std::size_t i = 0; i < image.boxes.size(); ++i) {
    if (!inside(image.boxes[i], image.dims)) {
      std::ostringstream os;
      os << "image '" << image.image_id << "' box " << i << " " << image.boxes[i]
         << " is not inside " << image.dims;
      throw SchemaError(os.str());
    }
  }
  if (image.sequence_index && *image.sequence_index < 0) {
    throw SchemaError("image '" + image.image_id + "' has a negative sequence_index");
  }
}

// ---------------------------------------------------------------------------
// VOC XML
// ---------------------------------------------------------------------------

namespace {

double read_number(const pt::ptree& node, const std::string& key, const std::string& where) {
  const auto child = node.get_optional<std::string>(key);
  if (!child) throw SchemaError(where + ": missing <" + key + ">");
  try {
    std::size_t used = 0;
    const std::string text = *child;
    const double v = std::stod(text, &used);
    if (text.find_first_not_of(" \t\r\n", used) != std::string::npos || !std::isfinite(v)) {
      throw std::invalid_argument(text);
    }
    return v;
  } catch (const std::logic_error&) {
    throw SchemaError(where + ": <" + key + "> is not a number: '" + *child + "'");
  }
}

std::string file_stem(const std::string& filename) {
  return std::filesystem::path(filename).stem().string();
}

}  // namespace

AnnotatedImage parse_voc_annotation(std::string_view xml, std::string_view class_filter,
                                    SourceTag source) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("malformed XML: " + e.message(), static_cast<long>(e.line()));
  }

  const auto root = tree.get_child_optional("annotation");
  if (!root) throw SchemaError("missing <annotation> root element");
  const auto size = root->get_child_optional("size");
  if (!size) throw SchemaError("missing <size> element");

  const double w = read_number(*size, "width", "<size>");
  const double h = read_number(*size, "height", "<size>");
  if (w < 1 || h < 1 || std::floor(w) != w || std::floor(h) != h) {
    throw SchemaError("<size> must hold positive integer width and height");
  }

  AnnotatedImage out;
  out.file_path = root->get<std::string>("filename", "");
  out.image_id = file_stem(out.file_path);
  out.dims = ImageDims{static_cast<int>(w), static_cast<int>(h)};
  out.source = source;

  int object_index = -1;
  for (const auto& [tag, node] : *root) {
    if (tag != "object") continue;
    ++object_index;
    const std::string where = "object " + std::to_string(object_index);
    const auto name = node.get_optional<std::string>("name");
    if (!name) throw SchemaError(where + ": missing <name>");
    if (*name != class_filter) continue;

    const auto bndbox = node.get_child_optional("bndbox");
    if (!bndbox) throw SchemaError(where + ": missing <bndbox>");
    const double xmin = read_number(*bndbox, "xmin", where);
    const double ymin = read_number(*bndbox, "ymin", where);
    const double xmax = read_number(*bndbox, "xmax", where);
    const double ymax = read_number(*bndbox, "ymax", where);
    if (xmin > xmax || ymin > ymax) {
      throw SchemaError(where + ": bndbox has min > max");
    }
    const bool difficult = node.get<int>("difficult", 0) != 0;

    // Inclusive 1-based indices to continuous edges, clipped to the frame.
    BoundingBox b{std::clamp(xmin - 1.0, 0.0, w), std::clamp(ymin - 1.0, 0.0, h),
                  std::clamp(xmax, 0.0, w), std::clamp(ymax, 0.0, h)};
    out.boxes.push_back(b);
    out.difficult.push_back(difficult);
  }
  return out;
}

std::vector<AnnotatedImage> filter_class(std::vector<AnnotatedImage> images, bool keep_nonempty) {
  if (keep_nonempty) {
    std::erase_if(images, [](const AnnotatedImage& im) { return im.boxes.empty(); });
  }
  return images;
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

std::string CountMismatch::message() const {
  return "count mismatch for " + scope + ": expected " + std::to_string(expected) +
         ", computed " + std::to_string(actual);
}

void validate(const DatasetManifest& manifest) {
  std::vector<SourceTag> seen;
  for (const auto& e : manifest.entries) {
    if (std::find(seen.begin(), seen.end(), e.source) != seen.end()) {
      throw SchemaError("manifest '" + manifest.split_name + "' lists " +
                        std::string(to_string(e.source.name)) + " twice");
    }
    seen.push_back(e.source);
    if (e.downsample_factor < 1) {
      throw SchemaError("manifest '" + manifest.split_name + "': downsample_factor must be >= 1");
    }
    if (e.expected_count && *e.expected_count < 0) {
      throw SchemaError("manifest '" + manifest.split_name + "': negative expected_count");
    }
  }
}

namespace {

// Indices into `frames` that survive filtering and per-sequence downsampling.
std::vector<std::size_t> select_indices(const ManifestEntry& entry,
                                        std::span<const AnnotatedImage> frames) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (entry.exclude_empty && frames[i].boxes.empty()) continue;
    kept.push_back(i);
  }
  if (entry.downsample_factor == 1) return kept;

  std::vector<std::size_t> out;
  std::size_t run_start = 0;
  auto flush = [&](std::size_t end) {
    const auto run = std::span<const std::size_t>(kept).subspan(run_start, end - run_start);
    for (auto idx : downsample_sequence(run, entry.downsample_factor)) out.push_back(idx);
    run_start = end;
  };
  for (std::size_t k = 1; k < kept.size(); ++k) {
    const auto& prev = frames[kept[k - 1]].sequence_index;
    const auto& cur = frames[kept[k]].sequence_index;
    const bool continues = (!prev && !cur) || (prev && cur && *cur > *prev);
    if (!continues) flush(k);
  }
  flush(kept.size());
  return out;
}

const std::vector<AnnotatedImage>& lookup_source(const DatasetManifest& manifest,
                                                 const SourceMap& sources, SourceTag tag) {
  const auto it = sources.find(tag);
  if (it == sources.end()) {
    throw AssemblyError("manifest '" + manifest.split_name + "' needs source " +
                        std::string(to_string(tag.name)) + ", which was not provided");
  }
  return it->second;
}

void check_counts(const DatasetManifest& manifest, ManifestStats& stats) {
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (e.expected_count && *e.expected_count != stats.counts[i].count) {
      stats.mismatches.push_back(CountMismatch{std::string(to_string(e.source.name)),
                                               *e.expected_count, stats.counts[i].count});
    }
  }
  if (manifest.expected_total && *manifest.expected_total != stats.total) {
    stats.mismatches.push_back(CountMismatch{"total", *manifest.expected_total, stats.total});
  }
}

}  // namespace

AssembledSplit assemble_split(const DatasetManifest& manifest, const SourceMap& sources) {
  validate(manifest);
  AssembledSplit out;
  out.stats.split_name = manifest.split_name;
  for (const auto& entry : manifest.entries) {
    const auto& frames = lookup_source(manifest, sources, entry.source);
    const auto idx = select_indices(entry, frames);
    for (auto i : idx) out.images.push_back(frames[i]);
    out.stats.counts.push_back(SourceCount{entry.source, static_cast<std::int64_t>(idx.size())});
    out.stats.total += static_cast<std::int64_t>(idx.size());
  }
  check_counts(manifest, out.stats);
  return out;
}

ManifestStats manifest_stats(const DatasetManifest& manifest, const SourceMap& sources) {
  validate(manifest);
  ManifestStats stats;
  stats.split_name = manifest.split_name;
  for (const auto& entry : manifest.entries) {
    const auto n = static_cast<std::int64_t>(
        select_indices(entry, lookup_source(manifest, sources, entry.source)).size());
    stats.counts.push_back(SourceCount{entry.source, n});
    stats.total += n;
  }
  check_counts(manifest, stats);
  return stats;
}

std::vector<std::string> bundled_split_names() {
  return {"train_voc", "train_hp", "train_hpv07", "test_db"};
}

// Per-source sizes are after class filtering and downsampling. PIROPO's 7229
// and the split totals disagree by 50 images; both are kept so assembly
// reports the discrepancy.
DatasetManifest bundled_manifest(std::string_view split_name) {
  const ManifestEntry voc07{{SourceName::VOC07}, 1, 4192, true};
  const ManifestEntry voc12{{SourceName::VOC12train}, 1, 9583, true};
  const ManifestEntry hda{{SourceName::HDA_Cam02}, 1, 1388, true};
  const ManifestEntry piropo{{SourceName::PIROPO_train}, 5, 7229, false};
  const ManifestEntry bomni{{SourceName::Bomni}, 10, 1034, false};
  const ManifestEntry dst{{SourceName::DST}, 1, 400 + 301, false};

  if (split_name == "train_voc") return {"train_voc", {voc07, voc12}, 13775};
  if (split_name == "train_hp") return {"train_hp", {hda, piropo}, 8567};
  if (split_name == "train_hpv07") return {"train_hpv07", {voc07, hda, piropo}, 12759};
  if (split_name == "test_db") return {"test_db", {bomni, dst}, 1735};
  throw LookupError("no bundled manifest named '" + std::string(split_name) + "'");
}

// ---------------------------------------------------------------------------
// Recipes
// ---------------------------------------------------------------------------

std::string_view to_string(Model model) noexcept {
  switch (model) {
    case Model::MoSSD:
      return "moSSD";
    case Model::ResSSD:
      return "resSSD";
    case Model::RFCN:
      return "R-FCN";
  }
  return "?";
}

Model parse_model(std::string_view text) {
  for (Model m : {Model::MoSSD, Model::ResSSD, Model::RFCN}) {
    if (to_string(m) == text) return m;
  }
  throw LookupError("unknown model '" + std::string(text) + "'");
}

namespace {
const std::array<TrainingRecipe, 9> kRecipes{{
    {Model::MoSSD, "train_voc", 0.002, 40, false},
    {Model::MoSSD, "train_hp", 0.002, 40, false},
    {Model::MoSSD, "train_hpv07", 0.002, 25, false},
    {Model::MoSSD, "train_hpv07", 0.002, 35, true},
    {Model::ResSSD, "train_voc", 0.0005, 45, false},
    {Model::ResSSD, "train_hp", 0.0005, 45, false},
    {Model::ResSSD, "train_hpv07", 0.0005, 30, false},
    {Model::ResSSD, "train_hpv07", 0.0005, 30, true},
    {Model::RFCN, "train_hpv07", 0.00008, 40, false},
}};
}  // namespace

std::span<const TrainingRecipe> recipe_table() noexcept { return kRecipes; }

TrainingRecipe recipe_lookup(Model model, std::string_view dataset, bool fe_locked) {
  for (const auto& r : kRecipes) {
    if (r.model == model && r.dataset == dataset && r.feature_extractor_locked == fe_locked) {
      return r;
    }
  }
  throw LookupError("no training recipe for " + std::string(to_string(model)) + " + " +
                    std::string(dataset) + (fe_locked ? " (FE locked)" : ""));
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double base) {
  if (total_steps <= 0) throw ArgumentError("cosine_lr: total_steps must be > 0");
  if (step < 0 || step > total_steps) {
    throw ArgumentError("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                        std::to_string(total_steps) + "]");
  }
  if (!(base > 0.0)) throw ArgumentError("cosine_lr: base learning rate must be > 0");
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

json to_json(const AnnotatedImage& image) {
  json boxes = json::array();
  for (const auto& b : image.boxes) boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
  json difficult = json::array();
  for (bool d : image.difficult) difficult.push_back(d);
  json j;
  j["image_id"] = image.image_id;
  j["file_path"] = image.file_path;
  j["width"] = image.dims.width;
  j["height"] = image.dims.height;
  j["source"] = to_string(image.source.name);
  j["sequence_index"] = image.sequence_index ? json(*image.sequence_index) : json(nullptr);
  j["boxes"] = std::move(boxes);
  j["difficult"] = std::move(difficult);
  return j;
}

namespace {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

AnnotatedImage annotated_image_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("dataset record must be a JSON object");
  AnnotatedImage im;
  im.image_id = field<std::string>(j, "image_id");
  im.file_path = field<std::string>(j, "file_path");
  im.dims = ImageDims{field<int>(j, "width"), field<int>(j, "height")};
  try {
    im.source.name = parse_source_name(field<std::string>(j, "source"));
  } catch (const LookupError& e) {
    throw SchemaError(e.what());
  }
  if (j.contains("sequence_index") && !j["sequence_index"].is_null()) {
    im.sequence_index = field<std::int64_t>(j, "sequence_index");
  }
  for (const auto& b : field<std::vector<std::vector<double>>>(j, "boxes")) {
    if (b.size() != 4) throw SchemaError("box must have 4 coordinates");
    im.boxes.push_back(BoundingBox{b[0], b[1], b[2], b[3]});
  }
  if (j.contains("difficult")) {
    im.difficult = field<std::vector<bool>>(j, "difficult");
  } else {
    im.difficult.assign(im.boxes.size(), false);
  }
  validate(im);
  return im;
}

json to_json(const DatasetManifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    json je{{"source", to_string(e.source.name)},
            {"downsample_factor", e.downsample_factor},
            {"exclude_empty", e.exclude_empty}};
    if (e.expected_count) je["expected_count"] = *e.expected_count;
    entries.push_back(std::move(je));
  }
  json j{{"split_name", m.split_name}, {"entries", std::move(entries)}};
  if (m.expected_total) j["expected_total"] = *m.expected_total;
  return j;
}

DatasetManifest manifest_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("manifest must be a JSON object");
  DatasetManifest m;
  m.split_name = field<std::string>(j, "split_name");
  if (j.contains("expected_total")) m.expected_total = field<std::int64_t>(j, "expected_total");
  const auto entries = field<json>(j, "entries");
  if (!entries.is_array()) throw SchemaError("'entries' must be an array");
  for (const auto& je : entries) {
    ManifestEntry e;
    try {
      e.source.name = parse_source_name(field<std::string>(je, "source"));
    } catch (const LookupError& err) {
      throw SchemaError(err.what());
    }
    if (je.contains("downsample_factor")) e.downsample_factor = field<int>(je, "downsample_factor");
    if (je.contains("expected_count")) e.expected_count = field<std::int64_t>(je, "expected_count");
    if (je.contains("exclude_empty")) e.exclude_empty = field<bool>(je, "exclude_empty");
    m.entries.push_back(e);
  }
  validate(m);
  return m;
}

json to_json(const ManifestStats& stats) {
  json counts = json::array();
  for (const auto& c : stats.counts) {
    counts.push_back({{"source", to_string(c.source.name)},
                      {"view", to_string(c.source.view())},
                      {"count", c.count}});
  }
  json mismatches = json::array();
  for (const auto& m : stats.mismatches) {
    mismatches.push_back({{"scope", m.scope},
                          {"expected", m.expected},
                          {"computed", m.actual},
                          {"message", m.message()}});
  }
  return {{"split_name", stats.split_name},
          {"counts", std::move(counts)},
          {"total", stats.total},
          {"mismatches", std::move(mismatches)}};
}

json to_json(const TrainingRecipe& r) {
  return {{"model", to_string(r.model)},
          {"dataset", r.dataset},
          {"base_learning_rate", r.base_learning_rate},
          {"epochs", r.epochs},
          {"feature_extractor_locked", r.feature_extractor_locked}};
}

std::vector<AnnotatedImage> parse_dataset(std::string_view jsonl) {
  std::vector<AnnotatedImage> out;
  long line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    const auto end = std::min(jsonl.find('\n', pos), jsonl.size());
    const auto line = jsonl.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == jsonl.size()) break;
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    try {
      out.push_back(annotated_image_from_json(j));
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (end == jsonl.size()) break;
  }
  return out;
}

std::vector<AnnotatedImage> read_dataset(const std::filesystem::path& path) {
  try {
    return parse_dataset(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

std::string format_dataset(std::span<const AnnotatedImage> images) {
  std::string out;
  for (const auto& im : images) {
    out += to_json(im).dump();
    out += '\n';
  }
  return out;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": invalid JSON: " + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace omnipd
