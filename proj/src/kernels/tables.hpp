#pragma once

#include "omnipd/kernels.hpp"

namespace omnipd::kernels::detail {

void iou_one_to_many_scalar(const BoundingBox& query, BoxView boxes, std::span<double> out);
void rgb_to_gray_scalar(std::span<const std::uint8_t> in, std::span<std::uint8_t> out);

#if defined(OMNIPD_BUILD_AVX2)
void iou_one_to_many_avx2(const BoundingBox& query, BoxView boxes, std::span<double> out);
void rgb_to_gray_avx2(std::span<const std::uint8_t> in, std::span<std::uint8_t> out);
#endif

}  // namespace omnipd::kernels::detail
