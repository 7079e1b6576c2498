// SPDX-License-Identifier: Apache-2.0
// Built with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <cstdint>

#include "geoannot/kernels.hpp"

namespace geoannot::kernels::detail {
namespace {

inline __m256i tail_mask(std::size_t remaining) {
  alignas(32) static const std::int32_t kMask[16] = {-1, -1, -1, -1, -1, -1,
                                                     -1, -1, 0,  0,  0,  0,
                                                     0,  0,  0,  0};
  return _mm256_loadu_si256(
      reinterpret_cast<const __m256i*>(kMask + 8 - remaining));
}

inline float reduce(__m256 acc) {
  const __m128 lo = _mm256_castps256_ps128(acc);
  const __m128 hi = _mm256_extractf128_ps(acc, 1);
  const __m128 s = _mm_add_ps(lo, hi);         // l0+l4, l1+l5, l2+l6, l3+l7
  const __m128 t = _mm_add_ps(s, _mm_movehl_ps(s, s));  // s0+s2, s1+s3
  const __m128 u = _mm_add_ss(t, _mm_shuffle_ps(t, t, 0x1));
  return _mm_cvtss_f32(u);
}

inline float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
  }
  if (i < n) {
    const __m256i m = tail_mask(n - i);
    acc = _mm256_fmadd_ps(_mm256_maskload_ps(a + i, m),
                          _mm256_maskload_ps(b + i, m), acc);
  }
  return reduce(acc);
}

ScoredIndex best_dot_avx2(const float* query, const float* rows,
                          std::size_t row_count, std::size_t n) {
  ScoredIndex best{dot_avx2(query, rows, n), 0};
  for (std::size_t r = 1; r < row_count; ++r) {
    const float s = dot_avx2(query, rows + r * n, n);
    if (s > best.score) best = {s, r};
  }
  return best;
}

void dot_rows_avx2(const float* query, const float* rows, std::size_t row_count,
                   std::size_t n, float* out) {
  for (std::size_t r = 0; r < row_count; ++r) {
    out[r] = dot_avx2(query, rows + r * n, n);
  }
}

ScoredIndex argmax_avx2(const float* values, std::size_t n) {
  float best = values[0];
  std::size_t i = 0;
  if (n >= 8) {
    __m256 vmax = _mm256_loadu_ps(values);
    for (i = 8; i + 8 <= n; i += 8) {
      vmax = _mm256_max_ps(vmax, _mm256_loadu_ps(values + i));
    }
    alignas(32) float lanes[8];
    _mm256_store_ps(lanes, vmax);
    for (float v : lanes) best = v > best ? v : best;
  }
  for (; i < n; ++i) best = values[i] > best ? values[i] : best;
  const __m256 target = _mm256_set1_ps(best);
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    const int mask = _mm256_movemask_ps(
        _mm256_cmp_ps(_mm256_loadu_ps(values + j), target, _CMP_EQ_OQ));
    if (mask != 0) {
      return {best, j + static_cast<std::size_t>(__builtin_ctz(mask))};
    }
  }
  for (; j < n; ++j) {
    if (values[j] == best) return {best, j};
  }
  return {best, 0};
}

void divide_avx2(float* v, std::size_t n, float divisor) {
  const __m256 d = _mm256_set1_ps(divisor);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(v + i, _mm256_div_ps(_mm256_loadu_ps(v + i), d));
  }
  for (; i < n; ++i) v[i] /= divisor;
}

void lerp_avx2(const float* a, const float* b, float t, float* out,
               std::size_t n) {
  const __m256 vt = _mm256_set1_ps(t);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    const __m256 lo = _mm256_min_ps(va, vb);
    const __m256 hi = _mm256_max_ps(va, vb);
    __m256 v = _mm256_fmadd_ps(vt, _mm256_sub_ps(vb, va), va);
    v = _mm256_min_ps(_mm256_max_ps(v, lo), hi);
    _mm256_storeu_ps(out + i, v);
  }
  if (i < n) kScalarTable.lerp(a + i, b + i, t, out + i, n - i);
}

}  // namespace

const KernelTable kAvx2Table{dot_avx2,    best_dot_avx2, dot_rows_avx2,
                             argmax_avx2, divide_avx2,   lerp_avx2};

}  // namespace geoannot::kernels::detail
