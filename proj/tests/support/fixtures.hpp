#pragma once

// Small synthetic corpora and a CLI runner shared by the CLI tests and the
// acceptance suite.

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "omnipd/cli.hpp"
#include "omnipd/datasets.hpp"
#include "omnipd/eval.hpp"
#include "omnipd/image.hpp"
#include "support/oracles.hpp"

namespace fixture {

namespace fs = std::filesystem;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = omnipd::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

/// Writes `n` PNGs under dir/images and VOC XML files under dir/xml. Each
/// image has one to three people and a dog.
inline void write_voc_corpus(const fs::path& dir, int n, std::uint64_t seed) {
  oracle::Gen g(seed);
  fs::create_directories(dir / "images");
  for (int i = 0; i < n; ++i) {
    const int w = g.integer(40, 64);
    const int h = g.integer(32, 48);
    omnipd::Image im(w, h, 3);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) im.at(x, y, c) = static_cast<std::uint8_t>((x * 7 + y * 3 + c * 50 + i * 13) % 256);
    char name[32];
    std::snprintf(name, sizeof name, "img_%03d", i);
    omnipd::write_png(dir / "images" / (std::string(name) + ".png"), im);

    std::ostringstream xml;
    xml << "<annotation>\n  <filename>" << name << ".png</filename>\n  <size><width>" << w << "</width><height>" << h
        << "</height><depth>3</depth></size>\n";
    const int people = g.integer(1, 3);
    for (int k = 0; k <= people; ++k) {
      const int x0 = g.integer(1, w / 2), y0 = g.integer(1, h / 2);
      const int x1 = g.integer(x0 + 4, w), y1 = g.integer(y0 + 4, h);
      xml << "  <object><name>" << (k == people ? "dog" : "person") << "</name><difficult>" << (g.coin(0.1) ? 1 : 0)
          << "</difficult><bndbox><xmin>" << x0 << "</xmin><ymin>" << y0 << "</ymin><xmax>" << x1 << "</xmax><ymax>"
          << y1 << "</ymax></bndbox></object>\n";
    }
    xml << "</annotation>\n";
    spit(dir / "xml" / (std::string(name) + ".xml"), xml.str());
  }
}

/// Plausible detector output for a dataset: jittered copies of the ground
/// truth plus a few misses and stray boxes, fully determined by `seed`.
inline std::string fake_detections(const std::vector<omnipd::AnnotatedImage>& data, std::uint64_t seed) {
  oracle::Gen g(seed);
  std::vector<omnipd::Detection> dets;
  for (const auto& im : data) {
    for (const auto& b : im.boxes) {
      if (g.coin(0.15)) continue;
      const double dx = g.real(-2, 2), dy = g.real(-2, 2);
      omnipd::BoundingBox j{std::max(0.0, b.x_min + dx), std::max(0.0, b.y_min + dy),
                            std::min<double>(im.dims.width, b.x_max + dx), std::min<double>(im.dims.height, b.y_max + dy)};
      if (!(j.x_min <= j.x_max && j.y_min <= j.y_max)) j = b;
      dets.push_back({im.image_id, g.real(0.3, 1.0), j});
    }
    if (g.coin(0.5)) dets.push_back({im.image_id, g.real(0.0, 0.6), g.real_box(im.dims.width, im.dims.height, 1.0)});
  }
  return omnipd::format_detections(dets);
}

}  // namespace fixture
