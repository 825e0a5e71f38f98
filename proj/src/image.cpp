#include "omnipd/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "omnipd/errors.hpp"

namespace omnipd {

Image::Image(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
  if (width <= 0 || height <= 0 || channels <= 0) {
    throw ArgumentError("image must have positive width, height and channels");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

namespace {

Image hflip(const Image& src) {
  Image dst(src.width(), src.height(), src.channels());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < src.channels(); ++c) dst.at(src.width() - 1 - x, y, c) = src.at(x, y, c);
  return dst;
}

Image vflip(const Image& src) {
  Image dst(src.width(), src.height(), src.channels());
  const std::size_t row = static_cast<std::size_t>(src.width()) * src.channels();
  for (int y = 0; y < src.height(); ++y) {
    const auto in = src.pixels().subspan(static_cast<std::size_t>(y) * row, row);
    auto out = dst.pixels().subspan(static_cast<std::size_t>(src.height() - 1 - y) * row, row);
    std::copy(in.begin(), in.end(), out.begin());
  }
  return dst;
}

// Counter-clockwise quarter turn: pixel (x, y) lands at (y, W - 1 - x).
Image rot90_ccw(const Image& src) {
  Image dst(src.height(), src.width(), src.channels());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < src.channels(); ++c) dst.at(y, src.width() - 1 - x, c) = src.at(x, y, c);
  return dst;
}

Image crop(const Image& src, const BoundingBox& r) {
  const int x0 = static_cast<int>(r.x_min);
  const int y0 = static_cast<int>(r.y_min);
  Image dst(static_cast<int>(r.width()), static_cast<int>(r.height()), src.channels());
  for (int y = 0; y < dst.height(); ++y)
    for (int x = 0; x < dst.width(); ++x)
      for (int c = 0; c < src.channels(); ++c) dst.at(x, y, c) = src.at(x0 + x, y0 + y, c);
  return dst;
}

}  // namespace

Image transform_image(const Image& image, const GeometricTransform& t) {
  Image cur = image;
  for (const auto& step : flatten(t)) {
    // Validates crops against the current frame.
    transform_dims(step, cur.dims());
    if (std::holds_alternative<HFlip>(step.op)) {
      cur = hflip(cur);
    } else if (std::holds_alternative<VFlip>(step.op)) {
      cur = vflip(cur);
    } else if (const auto* rot = std::get_if<Rot90>(&step.op)) {
      for (int i = 0; i < rot->quarter_turns(); ++i) cur = rot90_ccw(cur);
    } else {
      cur = crop(cur, std::get<Crop>(step.op).rect);
    }
  }
  return cur;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

// libpng reports errors through longjmp; every object with a destructor is
// created before setjmp so nothing is skipped on the error path.
Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open image '" + path.string() + "'");

  std::string message;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  Image image;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("cannot decode '" + path.string() + "': " + message);
  }

  png_init_io(png, file.get());
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  image = Image(static_cast<int>(width), static_cast<int>(height), 3);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = &image.at(0, static_cast<int>(y));
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw ArgumentError("write_png supports 1 or 3 channels");
  }
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot create '" + path.string() + "'");

  std::string message;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("cannot encode '" + path.string() + "': " + message);
  }

  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8,
               image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height(); ++y) {
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(image.pixels().data() +
                                                       static_cast<std::size_t>(y) * image.width() * image.channels());
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw IoError("cannot write '" + path.string() + "'");
}

std::uint64_t content_hash(const Image& image) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 0x100000001b3ull;
  };
  for (int v : {image.width(), image.height(), image.channels()}) {
    for (int s = 0; s < 32; s += 8) mix(static_cast<std::uint8_t>((v >> s) & 0xFF));
  }
  for (auto p : image.pixels()) mix(p);
  return h;
}

}  // namespace omnipd
