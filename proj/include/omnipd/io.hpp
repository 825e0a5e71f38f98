#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace omnipd {

/// Whole file as bytes. Throws IoError naming the path when it cannot be read.
std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`, so readers never
/// observe a partial file. Creates missing parent directories.
void write_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace omnipd
