// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "geoannot/kernels.hpp"

using namespace geoannot::kernels;

namespace {

std::vector<Backend> simd_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::Avx2, Backend::Neon}) {
    if (backend_available(b)) out.push_back(b);
  }
  return out;
}

std::vector<float> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

bool same_bits(float a, float b) {
  return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b);
}

// Eight interleaved lanes, each an fma chain, reduced pairwise.
float lane_dot(const std::vector<float>& a, const std::vector<float>& b) {
  float lane[8] = {};
  for (std::size_t i = 0; i < a.size(); ++i) lane[i % 8] = std::fma(a[i], b[i], lane[i % 8]);
  return ((lane[0] + lane[4]) + (lane[2] + lane[6])) + ((lane[1] + lane[5]) + (lane[3] + lane[7]));
}

}  // namespace

TEST_CASE("scalar dot follows the documented lane order") {
  std::mt19937_64 rng(1);
  for (std::size_t n = 1; n <= 70; ++n) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    CHECK(same_bits(table(Backend::Scalar).dot(a.data(), b.data(), n), lane_dot(a, b)));
  }
}

TEST_CASE("scalar dot of small integers is exact") {
  const std::vector<float> a = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  const std::vector<float> b = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  CHECK(table(Backend::Scalar).dot(a.data(), b.data(), a.size()) == 66.0f);
}

TEST_CASE("argmax returns the lowest index among ties") {
  const std::vector<float> v = {0.5f, 2.0f, -1.0f, 2.0f, 2.0f};
  for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
    if (!backend_available(b)) continue;
    const auto r = table(b).argmax(v.data(), v.size());
    CHECK(r.index == 1);
    CHECK(r.score == 2.0f);
  }
}

TEST_CASE("best_dot picks the lowest row on ties") {
  const std::vector<float> q = {1.0f, 0.0f};
  const std::vector<float> rows = {0.0f, 1.0f, 1.0f, 0.0f, 1.0f, 0.0f};
  for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
    if (!backend_available(b)) continue;
    const auto r = table(b).best_dot(q.data(), rows.data(), 3, 2);
    CHECK(r.index == 1);
    CHECK(r.score == 1.0f);
  }
}

TEST_CASE("SIMD variants are bit-identical to the scalar reference") {
  const auto backends = simd_backends();
  if (backends.empty()) {
    MESSAGE("no SIMD backend on this CPU; equivalence not exercised");
    return;
  }
  std::mt19937_64 rng(42);
  const KernelTable& ref = table(Backend::Scalar);
  for (Backend b : backends) {
    const KernelTable& k = table(b);
    for (std::size_t n = 1; n <= 67; ++n) {
      const auto a = random_vec(rng, n);
      const auto c = random_vec(rng, n);
      CHECK(same_bits(k.dot(a.data(), c.data(), n), ref.dot(a.data(), c.data(), n)));

      const std::size_t rows = 1 + n % 13;
      const auto m = random_vec(rng, rows * n);
      std::vector<float> o1(rows), o2(rows);
      k.dot_rows(a.data(), m.data(), rows, n, o1.data());
      ref.dot_rows(a.data(), m.data(), rows, n, o2.data());
      for (std::size_t r = 0; r < rows; ++r) CHECK(same_bits(o1[r], o2[r]));
      const auto b1 = k.best_dot(a.data(), m.data(), rows, n);
      const auto b2 = ref.best_dot(a.data(), m.data(), rows, n);
      CHECK(b1.index == b2.index);
      CHECK(same_bits(b1.score, b2.score));

      auto v = random_vec(rng, n);
      if (n > 3) v[n / 2] = v[n - 1];  // plant a tie
      const auto a1 = k.argmax(v.data(), n);
      const auto a2 = ref.argmax(v.data(), n);
      CHECK(a1.index == a2.index);
      CHECK(same_bits(a1.score, a2.score));

      auto d1 = a;
      auto d2 = a;
      k.divide(d1.data(), n, 3.7f);
      ref.divide(d2.data(), n, 3.7f);
      CHECK(std::memcmp(d1.data(), d2.data(), n * sizeof(float)) == 0);

      std::vector<float> l1(n), l2(n);
      for (float t : {0.0f, 0.25f, 0.6180339f, 1.0f}) {
        k.lerp(a.data(), c.data(), t, l1.data(), n);
        ref.lerp(a.data(), c.data(), t, l2.data(), n);
        CHECK(std::memcmp(l1.data(), l2.data(), n * sizeof(float)) == 0);
      }
    }
  }
}

TEST_CASE("lerp stays within its endpoints") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> t(0.0f, 1.0f);
  for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
    if (!backend_available(b)) continue;
    for (int iter = 0; iter < 200; ++iter) {
      const auto a = random_vec(rng, 19);
      const auto c = random_vec(rng, 19);
      std::vector<float> o(19);
      table(b).lerp(a.data(), c.data(), t(rng), o.data(), 19);
      for (std::size_t i = 0; i < 19; ++i) {
        CHECK(o[i] >= std::min(a[i], c[i]));
        CHECK(o[i] <= std::max(a[i], c[i]));
      }
    }
  }
}

TEST_CASE("backend selection") {
  CHECK(backend_available(Backend::Scalar));
  const Backend before = active_backend();
  CHECK(set_backend(Backend::Scalar));
  CHECK(active_backend() == Backend::Scalar);
  CHECK(backend_name(Backend::Scalar) == "scalar");
  set_backend(before);
}
