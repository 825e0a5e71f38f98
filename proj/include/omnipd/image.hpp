#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "omnipd/geometry.hpp"

namespace omnipd {

/// 8-bit interleaved image, row-major, `channels` bytes per pixel.
class Image {
public:
  Image() = default;
  Image(int width, int height, int channels, std::uint8_t fill = 0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  ImageDims dims() const noexcept { return ImageDims{width_, height_}; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t& at(int x, int y, int c = 0) noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<std::uint8_t> pixels() noexcept { return data_; }
  std::span<const std::uint8_t> pixels() const noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Applies flips, quarter turns and crops to pixels. The pixel covering
/// [i, i+1) x [j, j+1) moves exactly where transform_box moves that square.
Image transform_image(const Image& image, const GeometricTransform& t);

/// Reads an 8-bit PNG as RGB (gray and alpha are expanded / stripped).
Image read_png(const std::filesystem::path& path);

/// Writes RGB or gray PNG with fixed compression settings and no timestamps,
/// so identical pixels always produce identical bytes.
void write_png(const std::filesystem::path& path, const Image& image);

/// 64-bit FNV-1a over dims, channel count and pixels.
std::uint64_t content_hash(const Image& image) noexcept;

}  // namespace omnipd
