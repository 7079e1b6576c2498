// SPDX-License-Identifier: Apache-2.0
#pragma once

// Numeric inner loops shared by the feature-map and correspondence code.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, AVX2+FMA and NEON variants. The variant is picked once at
// startup from the CPU features (override with GEOANNOT_SIMD=scalar|avx2|neon).
//
// All variants accumulate dot products in the same order: eight interleaved
// FMA lanes (element i goes to lane i % 8, the tail is zero padded), followed
// by a fixed pairwise reduction of the lanes. The scalar reference emulates
// that order with std::fma, so results are bit-identical across backends.

#include <cstddef>
#include <span>
#include <string_view>

namespace geoannot::kernels {

enum class Backend { Scalar, Avx2, Neon };

std::string_view backend_name(Backend b);

// Best compiled-in backend the running CPU supports.
Backend detect_backend();

// Backend in use for the dispatched entry points below.
Backend active_backend();

// Returns false if the backend is not available on this build/CPU.
bool set_backend(Backend b);

bool backend_available(Backend b);

struct ScoredIndex {
  float score;
  std::size_t index;
};

// Kernel table; one instance per backend.
struct KernelTable {
  float (*dot)(const float* a, const float* b, std::size_t n);
  // Scans `rows` contiguous vectors of length n; returns the highest dot
  // product with `query`, lowest row index on ties.
  ScoredIndex (*best_dot)(const float* query, const float* rows,
                          std::size_t row_count, std::size_t n);
  // out[r] = dot(query, rows[r]) for every row.
  void (*dot_rows)(const float* query, const float* rows, std::size_t row_count,
                   std::size_t n, float* out);
  // Max element, lowest index on ties. n >= 1.
  ScoredIndex (*argmax)(const float* values, std::size_t n);
  // v[i] /= divisor
  void (*divide)(float* v, std::size_t n, float divisor);
  // out[i] = clamp(a[i] + t * (b[i] - a[i]), min(a,b), max(a,b))
  void (*lerp)(const float* a, const float* b, float t, float* out,
               std::size_t n);
};

const KernelTable& table(Backend b);
const KernelTable& active();

// Convenience wrappers over the active backend.
float dot(std::span<const float> a, std::span<const float> b);
ScoredIndex best_dot(std::span<const float> query, std::span<const float> rows,
                     std::size_t n);
ScoredIndex argmax(std::span<const float> values);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(GEOANNOT_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(GEOANNOT_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace geoannot::kernels
