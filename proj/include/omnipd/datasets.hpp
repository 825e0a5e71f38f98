#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "omnipd/errors.hpp"
#include "omnipd/geometry.hpp"

namespace omnipd {

enum class SourceName { VOC07, VOC12train, HDA_Cam02, PIROPO_train, Bomni, DST };
enum class View { Perspective, Omnidirectional };

struct SourceTag {
  SourceName name = SourceName::VOC07;

  /// Omnidirectional exactly for the ceiling-camera sources.
  View view() const noexcept;

  friend auto operator<=>(const SourceTag&, const SourceTag&) = default;
};

std::string_view to_string(SourceName name) noexcept;
std::string_view to_string(View view) noexcept;
/// Throws LookupError for unknown names.
SourceName parse_source_name(std::string_view text);

struct AnnotatedImage {
  std::string image_id;
  std::string file_path;
  ImageDims dims;
  std::vector<BoundingBox> boxes;
  /// Parallel to `boxes`; difficult objects are ignored by evaluation.
  std::vector<bool> difficult;
  SourceTag source;
  std::optional<std::int64_t> sequence_index;

  friend bool operator==(const AnnotatedImage&, const AnnotatedImage&) = default;
};

/// Throws SchemaError when a box leaves the image or `difficult` is not parallel to `boxes`.
void validate(const AnnotatedImage& image);

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

/// Parses a VOC-style XML annotation and keeps objects named `class_filter`.
///
/// VOC stores 1-based inclusive pixel indices; mins are shifted by -1 so the
/// result uses continuous edges (a VOC box 1..W covers [0, W]). Boxes are
/// clipped to the image. `image_id` defaults to the file stem of <filename>.
AnnotatedImage parse_voc_annotation(std::string_view xml, std::string_view class_filter,
                                    SourceTag source = {SourceName::VOC07});

/// Drops images without boxes when `keep_nonempty` is set.
std::vector<AnnotatedImage> filter_class(std::vector<AnnotatedImage> images, bool keep_nonempty);

/// Keeps positions 0, factor, 2*factor, ... Throws ArgumentError when factor < 1.
template <typename T>
std::vector<T> downsample_sequence(std::span<const T> frames, int factor) {
  if (factor < 1) throw ArgumentError("downsample factor must be >= 1, got " + std::to_string(factor));
  std::vector<T> out;
  out.reserve((frames.size() + factor - 1) / factor);
  for (std::size_t i = 0; i < frames.size(); i += static_cast<std::size_t>(factor)) {
    out.push_back(frames[i]);
  }
  return out;
}

template <typename T>
std::vector<T> downsample_sequence(const std::vector<T>& frames, int factor) {
  return downsample_sequence(std::span<const T>(frames), factor);
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

struct ManifestEntry {
  SourceTag source;
  int downsample_factor = 1;
  std::optional<std::int64_t> expected_count;
  /// Drop frames without boxes before downsampling.
  bool exclude_empty = false;
};

struct DatasetManifest {
  std::string split_name;
  std::vector<ManifestEntry> entries;
  /// Expected split size, checked against the assembled total.
  std::optional<std::int64_t> expected_total;
};

/// Throws SchemaError on duplicate sources or factors < 1.
void validate(const DatasetManifest& manifest);

struct SourceCount {
  SourceTag source;
  std::int64_t count = 0;
};

/// Count disagreement reported by assembly. `scope` is a source name or "total".
struct CountMismatch {
  std::string scope;
  std::int64_t expected = 0;
  std::int64_t actual = 0;

  std::string message() const;
};

struct ManifestStats {
  std::string split_name;
  std::vector<SourceCount> counts;
  std::int64_t total = 0;
  std::vector<CountMismatch> mismatches;
};

struct AssembledSplit {
  std::vector<AnnotatedImage> images;
  ManifestStats stats;
};

using SourceMap = std::map<SourceTag, std::vector<AnnotatedImage>>;

/// Concatenates each manifest source after filtering and per-sequence
/// downsampling. A sequence is a maximal run of frames whose sequence_index
/// strictly increases; frames without an index form a single run.
/// Count mismatches are collected, not thrown. Throws AssemblyError when a
/// manifest source is missing from `sources`.
AssembledSplit assemble_split(const DatasetManifest& manifest, const SourceMap& sources);

/// Same counts as assemble_split without copying any records.
ManifestStats manifest_stats(const DatasetManifest& manifest, const SourceMap& sources);

/// The four splits of the harmonized person dataset, with their published sizes.
DatasetManifest bundled_manifest(std::string_view split_name);
std::vector<std::string> bundled_split_names();

// ---------------------------------------------------------------------------
// Training recipes
// ---------------------------------------------------------------------------

enum class Model { MoSSD, ResSSD, RFCN };

std::string_view to_string(Model model) noexcept;
Model parse_model(std::string_view text);

struct TrainingRecipe {
  Model model = Model::MoSSD;
  std::string dataset;
  double base_learning_rate = 0.0;
  int epochs = 0;
  bool feature_extractor_locked = false;

  friend bool operator==(const TrainingRecipe&, const TrainingRecipe&) = default;
};

/// All bundled recipes in table order.
std::span<const TrainingRecipe> recipe_table() noexcept;

/// Throws LookupError when no recipe matches.
TrainingRecipe recipe_lookup(Model model, std::string_view dataset, bool fe_locked);

/// base * 0.5 * (1 + cos(pi * step / total_steps)). Throws ArgumentError
/// unless 0 <= step <= total_steps, total_steps > 0 and base > 0.
double cosine_lr(std::int64_t step, std::int64_t total_steps, double base);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

nlohmann::json to_json(const AnnotatedImage& image);
/// Throws SchemaError on missing or ill-typed fields.
AnnotatedImage annotated_image_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ManifestStats& stats);
nlohmann::json to_json(const TrainingRecipe& recipe);

/// One JSON record per line. Blank lines are skipped.
std::vector<AnnotatedImage> read_dataset(const std::filesystem::path& path);
std::vector<AnnotatedImage> parse_dataset(std::string_view jsonl);
std::string format_dataset(std::span<const AnnotatedImage> images);

DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace omnipd
