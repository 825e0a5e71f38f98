#include <immintrin.h>

#include <cstdint>

#include "tables.hpp"

namespace omnipd::kernels::detail {

// Lane-wise transcription of omnipd::iou. max_pd/min_pd select the first
// operand exactly when the scalar ternaries do, so results match bit-for-bit.
void iou_one_to_many_avx2(const BoundingBox& query, BoxView boxes, std::span<double> out) {
  const std::size_t n = boxes.size();
  const __m256d qx0 = _mm256_set1_pd(query.x_min);
  const __m256d qy0 = _mm256_set1_pd(query.y_min);
  const __m256d qx1 = _mm256_set1_pd(query.x_max);
  const __m256d qy1 = _mm256_set1_pd(query.y_max);
  const __m256d qarea = _mm256_set1_pd((query.x_max - query.x_min) * (query.y_max - query.y_min));
  const __m256d zero = _mm256_setzero_pd();

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d bx0 = _mm256_loadu_pd(boxes.x_min.data() + i);
    const __m256d by0 = _mm256_loadu_pd(boxes.y_min.data() + i);
    const __m256d bx1 = _mm256_loadu_pd(boxes.x_max.data() + i);
    const __m256d by1 = _mm256_loadu_pd(boxes.y_max.data() + i);

    const __m256d ix0 = _mm256_max_pd(qx0, bx0);
    const __m256d iy0 = _mm256_max_pd(qy0, by0);
    const __m256d ix1 = _mm256_min_pd(qx1, bx1);
    const __m256d iy1 = _mm256_min_pd(qy1, by1);
    const __m256d iw = _mm256_max_pd(_mm256_sub_pd(ix1, ix0), zero);
    const __m256d ih = _mm256_max_pd(_mm256_sub_pd(iy1, iy0), zero);
    const __m256d inter = _mm256_mul_pd(iw, ih);
    const __m256d barea = _mm256_mul_pd(_mm256_sub_pd(bx1, bx0), _mm256_sub_pd(by1, by0));
    const __m256d uni = _mm256_sub_pd(_mm256_add_pd(qarea, barea), inter);
    const __m256d positive = _mm256_cmp_pd(uni, zero, _CMP_GT_OQ);
    const __m256d ratio = _mm256_div_pd(inter, uni);
    _mm256_storeu_pd(out.data() + i, _mm256_and_pd(ratio, positive));
  }
  for (; i < n; ++i) {
    out[i] = iou(query, BoundingBox{boxes.x_min[i], boxes.y_min[i], boxes.x_max[i], boxes.y_max[i]});
  }
}

// Eight pixels per step. The weighted sum is below 2^24 so it converts to
// float exactly; the correctly rounded quotient by 1000 never crosses a
// half-integer it should not, and cvtps uses round-half-even.
void rgb_to_gray_avx2(std::span<const std::uint8_t> in, std::span<std::uint8_t> out) {
  const std::size_t n = in.size() / 3;
  const __m256i offsets = _mm256_setr_epi32(0, 3, 6, 9, 12, 15, 18, 21);
  const __m256i byte_mask = _mm256_set1_epi32(0xFF);
  const __m256i wr = _mm256_set1_epi32(299);
  const __m256i wg = _mm256_set1_epi32(587);
  const __m256i wb = _mm256_set1_epi32(114);
  const __m256 thousand = _mm256_set1_ps(1000.0f);

  std::size_t i = 0;
  // Each gather reads four bytes; stop early enough that the last read of a
  // block stays inside the buffer.
  for (; i + 9 <= n; i += 8) {
    const auto* base = reinterpret_cast<const int*>(in.data() + 3 * i);
    const __m256i r = _mm256_and_si256(_mm256_i32gather_epi32(base, offsets, 1), byte_mask);
    const __m256i g = _mm256_and_si256(
        _mm256_i32gather_epi32(reinterpret_cast<const int*>(in.data() + 3 * i + 1), offsets, 1),
        byte_mask);
    const __m256i b = _mm256_and_si256(
        _mm256_i32gather_epi32(reinterpret_cast<const int*>(in.data() + 3 * i + 2), offsets, 1),
        byte_mask);
    const __m256i scaled = _mm256_add_epi32(
        _mm256_add_epi32(_mm256_mullo_epi32(r, wr), _mm256_mullo_epi32(g, wg)),
        _mm256_mullo_epi32(b, wb));
    const __m256 quotient = _mm256_div_ps(_mm256_cvtepi32_ps(scaled), thousand);
    alignas(32) std::int32_t y[8];
    _mm256_store_si256(reinterpret_cast<__m256i*>(y), _mm256_cvtps_epi32(quotient));
    std::uint8_t* dst = out.data() + 3 * i;
    for (int j = 0; j < 8; ++j) {
      const auto v = static_cast<std::uint8_t>(y[j]);
      dst[3 * j] = v;
      dst[3 * j + 1] = v;
      dst[3 * j + 2] = v;
    }
  }
  if (i < n) {
    rgb_to_gray_scalar(in.subspan(3 * i, 3 * (n - i)), out.subspan(3 * i, 3 * (n - i)));
  }
}

}  // namespace omnipd::kernels::detail
