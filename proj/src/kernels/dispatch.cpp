#include <atomic>

#include "omnipd/errors.hpp"
#include "tables.hpp"

namespace omnipd::kernels {

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

BoxColumns::BoxColumns(std::span<const BoundingBox> boxes) {
  reserve(boxes.size());
  for (const auto& b : boxes) push_back(b);
}

void BoxColumns::push_back(const BoundingBox& b) {
  x_min_.push_back(b.x_min);
  y_min_.push_back(b.y_min);
  x_max_.push_back(b.x_max);
  y_max_.push_back(b.y_max);
}

void BoxColumns::reserve(std::size_t n) {
  x_min_.reserve(n);
  y_min_.reserve(n);
  x_max_.reserve(n);
  y_max_.reserve(n);
}

BoxView BoxColumns::view() const noexcept { return view(0); }

BoxView BoxColumns::view(std::size_t offset) const noexcept {
  return BoxView{std::span<const double>(x_min_).subspan(offset),
                 std::span<const double>(y_min_).subspan(offset),
                 std::span<const double>(x_max_).subspan(offset),
                 std::span<const double>(y_max_).subspan(offset)};
}

namespace {

constexpr KernelTable kScalar{Isa::Scalar, &detail::iou_one_to_many_scalar,
                              &detail::rgb_to_gray_scalar};

#if defined(OMNIPD_BUILD_AVX2)
constexpr KernelTable kAvx2{Isa::Avx2, &detail::iou_one_to_many_avx2, &detail::rgb_to_gray_avx2};

bool cpu_has_avx2() noexcept {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
}
#endif

const KernelTable* detect() noexcept {
  if (const auto* t = avx2_table()) return t;
  return &kScalar;
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

const KernelTable* avx2_table() noexcept {
#if defined(OMNIPD_BUILD_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_acquire); }

void select(Isa isa) {
  const KernelTable* t = isa == Isa::Scalar ? &kScalar : avx2_table();
  if (!t) throw ArgumentError("kernel ISA '" + std::string(to_string(isa)) + "' is not available");
  current().store(t, std::memory_order_release);
}

std::vector<const KernelTable*> available() noexcept {
  std::vector<const KernelTable*> out{&kScalar};
  if (const auto* t = avx2_table()) out.push_back(t);
  return out;
}

}  // namespace omnipd::kernels
