#pragma once

// Data-parallel inner loops with a scalar reference and SIMD variants.
//
// Every variant must produce results bit-identical to the scalar table; the
// equivalence tests in tests/test_kernels.cpp enforce that. The active table
// is chosen once at startup from the CPU's capabilities.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "omnipd/geometry.hpp"

namespace omnipd::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa) noexcept;

/// Read-only structure-of-arrays view over boxes.
struct BoxView {
  std::span<const double> x_min;
  std::span<const double> y_min;
  std::span<const double> x_max;
  std::span<const double> y_max;

  std::size_t size() const noexcept { return x_min.size(); }
};

/// Owning structure-of-arrays box storage.
class BoxColumns {
public:
  BoxColumns() = default;
  explicit BoxColumns(std::span<const BoundingBox> boxes);

  void push_back(const BoundingBox& b);
  void reserve(std::size_t n);
  std::size_t size() const noexcept { return x_min_.size(); }
  BoxView view() const noexcept;
  BoxView view(std::size_t offset) const noexcept;

private:
  std::vector<double> x_min_, y_min_, x_max_, y_max_;
};

struct KernelTable {
  Isa isa;
  /// out[i] = iou(query, boxes[i]) for every i.
  void (*iou_one_to_many)(const BoundingBox& query, BoxView boxes, std::span<double> out);
  /// Interleaved RGB in, interleaved RGB out with every channel set to
  /// round_half_even(0.299 R + 0.587 G + 0.114 B). `in` and `out` may alias.
  void (*rgb_to_gray)(std::span<const std::uint8_t> in, std::span<std::uint8_t> out);
};

const KernelTable& scalar_table() noexcept;

/// Nullptr when the AVX2 variant was not built or the CPU lacks AVX2.
const KernelTable* avx2_table() noexcept;

/// Table used by the library. Defaults to the widest supported ISA.
const KernelTable& active() noexcept;

/// Overrides the active table. Throws ArgumentError if the ISA is unavailable.
void select(Isa isa);

/// Every table usable on this machine, scalar first.
std::vector<const KernelTable*> available() noexcept;

}  // namespace omnipd::kernels
