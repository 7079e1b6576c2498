// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <cmath>

#include "geoannot/kernels.hpp"

namespace geoannot::kernels::detail {
namespace {

constexpr std::size_t kLanes = 8;

inline float reduce_lanes(const std::array<float, kLanes>& l) {
  const float s0 = l[0] + l[4];
  const float s1 = l[1] + l[5];
  const float s2 = l[2] + l[6];
  const float s3 = l[3] + l[7];
  return (s0 + s2) + (s1 + s3);
}

float dot_scalar(const float* a, const float* b, std::size_t n) {
  std::array<float, kLanes> acc{};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      acc[l] = std::fma(a[i + l], b[i + l], acc[l]);
    }
  }
  if (i < n) {
    // zero padded tail, same as the masked loads of the vector paths
    std::array<float, kLanes> ta{};
    std::array<float, kLanes> tb{};
    std::copy(a + i, a + n, ta.begin());
    std::copy(b + i, b + n, tb.begin());
    for (std::size_t l = 0; l < kLanes; ++l) {
      acc[l] = std::fma(ta[l], tb[l], acc[l]);
    }
  }
  return reduce_lanes(acc);
}

ScoredIndex best_dot_scalar(const float* query, const float* rows,
                            std::size_t row_count, std::size_t n) {
  ScoredIndex best{dot_scalar(query, rows, n), 0};
  for (std::size_t r = 1; r < row_count; ++r) {
    const float s = dot_scalar(query, rows + r * n, n);
    if (s > best.score) best = {s, r};
  }
  return best;
}

void dot_rows_scalar(const float* query, const float* rows,
                     std::size_t row_count, std::size_t n, float* out) {
  for (std::size_t r = 0; r < row_count; ++r) {
    out[r] = dot_scalar(query, rows + r * n, n);
  }
}

ScoredIndex argmax_scalar(const float* values, std::size_t n) {
  ScoredIndex best{values[0], 0};
  for (std::size_t i = 1; i < n; ++i) {
    if (values[i] > best.score) best = {values[i], i};
  }
  return best;
}

void divide_scalar(float* v, std::size_t n, float divisor) {
  for (std::size_t i = 0; i < n; ++i) v[i] /= divisor;
}

void lerp_scalar(const float* a, const float* b, float t, float* out,
                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    // operand order mirrors _mm256_min_ps/_mm256_max_ps so signed zeros match
    const float lo = a[i] < b[i] ? a[i] : b[i];
    const float hi = a[i] > b[i] ? a[i] : b[i];
    float v = std::fma(t, b[i] - a[i], a[i]);
    v = v > lo ? v : lo;
    out[i] = v < hi ? v : hi;
  }
}

}  // namespace

const KernelTable kScalarTable{dot_scalar,    best_dot_scalar, dot_rows_scalar,
                               argmax_scalar, divide_scalar,   lerp_scalar};

}  // namespace geoannot::kernels::detail
