#include <cstdint>

#include "tables.hpp"

namespace omnipd::kernels::detail {

void iou_one_to_many_scalar(const BoundingBox& query, BoxView boxes, std::span<double> out) {
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    out[i] = iou(query, BoundingBox{boxes.x_min[i], boxes.y_min[i], boxes.x_max[i], boxes.y_max[i]});
  }
}

// Integer form of the luma weights: 1000 Y = 299 R + 587 G + 114 B.
void rgb_to_gray_scalar(std::span<const std::uint8_t> in, std::span<std::uint8_t> out) {
  const std::size_t n = in.size() / 3;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t r = in[3 * i];
    const std::uint32_t g = in[3 * i + 1];
    const std::uint32_t b = in[3 * i + 2];
    const std::uint32_t scaled = 299 * r + 587 * g + 114 * b;
    std::uint32_t q = scaled / 1000;
    const std::uint32_t rem = scaled % 1000;
    if (rem > 500 || (rem == 500 && (q & 1u))) ++q;
    const auto y = static_cast<std::uint8_t>(q);
    out[3 * i] = y;
    out[3 * i + 1] = y;
    out[3 * i + 2] = y;
  }
}

}  // namespace omnipd::kernels::detail
