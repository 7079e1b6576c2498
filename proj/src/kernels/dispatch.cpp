// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "geoannot/kernels.hpp"

namespace geoannot::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(GEOANNOT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  const char* forced = std::getenv("GEOANNOT_SIMD");
  if (forced != nullptr) {
    const std::string name(forced);
    if (name == "scalar") return Backend::Scalar;
    if (name == "avx2" && backend_available(Backend::Avx2)) return Backend::Avx2;
    if (name == "neon" && backend_available(Backend::Neon)) return Backend::Neon;
  }
  return detect_backend();
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
  }
  return "unknown";
}

bool backend_available(Backend b) {
  switch (b) {
    case Backend::Scalar: return true;
    case Backend::Avx2: return cpu_has_avx2();
    case Backend::Neon:
#if defined(GEOANNOT_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend detect_backend() {
  if (backend_available(Backend::Avx2)) return Backend::Avx2;
  if (backend_available(Backend::Neon)) return Backend::Neon;
  return Backend::Scalar;
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

bool set_backend(Backend b) {
  if (!backend_available(b)) return false;
  current().store(b, std::memory_order_relaxed);
  return true;
}

const KernelTable& table(Backend b) {
  switch (b) {
    case Backend::Scalar: return detail::kScalarTable;
#if defined(GEOANNOT_HAVE_AVX2)
    case Backend::Avx2: return detail::kAvx2Table;
#endif
#if defined(GEOANNOT_HAVE_NEON)
    case Backend::Neon: return detail::kNeonTable;
#endif
    default: break;
  }
  throw std::invalid_argument("kernel backend not compiled in: " +
                              std::string(backend_name(b)));
}

const KernelTable& active() { return table(active_backend()); }

float dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  return active().dot(a.data(), b.data(), a.size());
}

ScoredIndex best_dot(std::span<const float> query, std::span<const float> rows,
                     std::size_t n) {
  if (query.size() != n || n == 0 || rows.empty() || rows.size() % n != 0) {
    throw std::invalid_argument("best_dot: shape mismatch");
  }
  return active().best_dot(query.data(), rows.data(), rows.size() / n, n);
}

ScoredIndex argmax(std::span<const float> values) {
  if (values.empty()) throw std::invalid_argument("argmax: empty input");
  return active().argmax(values.data(), values.size());
}

}  // namespace geoannot::kernels
