// SPDX-License-Identifier: Apache-2.0
#include <arm_neon.h>

#include <array>
#include <algorithm>

#include "geoannot/kernels.hpp"

namespace geoannot::kernels::detail {
namespace {

inline float reduce(float32x4_t acc0, float32x4_t acc1) {
  const float32x4_t s = vaddq_f32(acc0, acc1);  // l0+l4 .. l3+l7
  const float32x2_t t = vadd_f32(vget_low_f32(s), vget_high_f32(s));
  return vget_lane_f32(t, 0) + vget_lane_f32(t, 1);
}

inline float dot_neon(const float* a, const float* b, std::size_t n) {
  float32x4_t acc0 = vdupq_n_f32(0.0f);
  float32x4_t acc1 = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
  }
  if (i < n) {
    std::array<float, 8> ta{};
    std::array<float, 8> tb{};
    std::copy(a + i, a + n, ta.begin());
    std::copy(b + i, b + n, tb.begin());
    acc0 = vfmaq_f32(acc0, vld1q_f32(ta.data()), vld1q_f32(tb.data()));
    acc1 = vfmaq_f32(acc1, vld1q_f32(ta.data() + 4), vld1q_f32(tb.data() + 4));
  }
  return reduce(acc0, acc1);
}

ScoredIndex best_dot_neon(const float* query, const float* rows,
                          std::size_t row_count, std::size_t n) {
  ScoredIndex best{dot_neon(query, rows, n), 0};
  for (std::size_t r = 1; r < row_count; ++r) {
    const float s = dot_neon(query, rows + r * n, n);
    if (s > best.score) best = {s, r};
  }
  return best;
}

void dot_rows_neon(const float* query, const float* rows, std::size_t row_count,
                   std::size_t n, float* out) {
  for (std::size_t r = 0; r < row_count; ++r) {
    out[r] = dot_neon(query, rows + r * n, n);
  }
}

void divide_neon(float* v, std::size_t n, float divisor) {
  const float32x4_t d = vdupq_n_f32(divisor);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(v + i, vdivq_f32(vld1q_f32(v + i), d));
  for (; i < n; ++i) v[i] /= divisor;
}

void lerp_neon(const float* a, const float* b, float t, float* out,
               std::size_t n) {
  const float32x4_t vt = vdupq_n_f32(t);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t va = vld1q_f32(a + i);
    const float32x4_t vb = vld1q_f32(b + i);
    float32x4_t v = vfmaq_f32(va, vt, vsubq_f32(vb, va));
    v = vminq_f32(vmaxq_f32(v, vminq_f32(va, vb)), vmaxq_f32(va, vb));
    vst1q_f32(out + i, v);
  }
  if (i < n) kScalarTable.lerp(a + i, b + i, t, out + i, n - i);
}

}  // namespace

// argmax has no profitable NEON form at these sizes; reuse the reference.
const KernelTable kNeonTable{dot_neon,   best_dot_neon,
                             dot_rows_neon, kScalarTable.argmax,
                             divide_neon, lerp_neon};

}  // namespace geoannot::kernels::detail
