// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "geoannot/featmap.hpp"
#include "geoannot/kernels.hpp"
#include "support.hpp"

using namespace geoannot;
using Kind = FeatureMapError::Kind;

namespace {

Kind decode_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_gbfm(bytes);
  } catch (const FeatureMapError& e) {
    return e.kind();
  }
  FAIL("decode accepted malformed input");
  return Kind::Io;
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

TEST_CASE("GBFM header layout is little endian") {
  FeatureMap m(2, 1, 3, {1, 2, 3, 4, 5, 6});
  const auto bytes = encode_gbfm(m);
  REQUIRE(bytes.size() == kGbfmHeaderBytes + 6 * 4);
  CHECK(std::memcmp(bytes.data(), "GBFM", 4) == 0);
  const std::vector<std::uint8_t> header(bytes.begin() + 4, bytes.begin() + 20);
  CHECK(header == std::vector<std::uint8_t>{1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 3, 0, 0, 0});
  float first;
  std::memcpy(&first, bytes.data() + 20, 4);
  CHECK(first == 1.0f);
}

TEST_CASE("GBFM round trip through a file is bit-exact") {
  testsupport::TempDir dir("featmap");
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto m = testsupport::random_map(rng, 1 + i % 5, 1 + i % 7, 1 + i % 4, -1e6f, 1e6f);
    const auto p = dir / ("m" + std::to_string(i) + ".gbfm");
    save_feature_map(m, p);
    CHECK(load_feature_map(p) == m);
  }
}

TEST_CASE("malformed GBFM input is rejected by kind") {
  FeatureMap m(1, 2, 2, {1, 2, 3, 4});
  const auto good = encode_gbfm(m);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(decode_kind(bad_magic) == Kind::BadMagic);

  auto bad_version = good;
  put_u32(bad_version, 4, 2);
  CHECK(decode_kind(bad_version) == Kind::BadVersion);

  auto truncated = good;
  truncated.pop_back();
  CHECK(decode_kind(truncated) == Kind::PayloadMismatch);

  auto trailing = good;
  trailing.push_back(0);
  CHECK(decode_kind(trailing) == Kind::PayloadMismatch);

  CHECK(decode_kind(std::vector<std::uint8_t>(good.begin(), good.begin() + 10)) ==
        Kind::PayloadMismatch);

  auto zero_c = good;
  put_u32(zero_c, 8, 0);
  CHECK(decode_kind(zero_c) == Kind::InvalidShape);

  auto nan = good;
  const float q = std::nanf("");
  std::memcpy(nan.data() + 20, &q, 4);
  CHECK(decode_kind(nan) == Kind::NonFinite);
}

TEST_CASE("missing file is reported as such") {
  try {
    load_feature_map("/nonexistent/map.gbfm");
    FAIL("expected an error");
  } catch (const FeatureMapError& e) {
    CHECK(e.kind() == Kind::MissingFile);
  }
}

TEST_CASE("constructor validates shape and values") {
  CHECK_THROWS_AS(FeatureMap(0, 1, 1, {}), FeatureMapError);
  CHECK_THROWS_AS(FeatureMap(1, 2, 2, {1, 2, 3}), FeatureMapError);
  CHECK_THROWS_AS(FeatureMap(1, 1, 1, {INFINITY}), FeatureMapError);
}

TEST_CASE("interpolation on corner-aligned grids") {
  SUBCASE("2x2 to 2x3 puts the midpoint in the middle column") {
    FeatureMap m(1, 2, 2, {0, 1, 0, 1});
    const auto r = interpolate(m, 2, 3);
    CHECK(r.at(0, 0, 0) == 0.0f);
    CHECK(r.at(0, 0, 1) == 0.5f);
    CHECK(r.at(0, 0, 2) == 1.0f);
    CHECK(r.at(0, 1, 1) == 0.5f);
  }
  SUBCASE("same size is an identity copy") {
    std::mt19937_64 rng(5);
    const auto m = testsupport::random_map(rng, 3, 4, 5);
    CHECK(interpolate(m, 4, 5) == m);
  }
  SUBCASE("corners are preserved and values stay within channel bounds") {
    std::mt19937_64 rng(6);
    const auto m = testsupport::random_map(rng, 2, 5, 7);
    const auto r = interpolate(m, 13, 4);
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(r.at(c, 0, 0) == m.at(c, 0, 0));
      CHECK(r.at(c, 12, 3) == m.at(c, 4, 6));
      CHECK(r.at(c, 0, 3) == m.at(c, 0, 6));
      const auto src = m.plane(c);
      const float lo = *std::min_element(src.begin(), src.end());
      const float hi = *std::max_element(src.begin(), src.end());
      for (float v : r.plane(c)) {
        CHECK(v >= lo);
        CHECK(v <= hi);
      }
    }
  }
  SUBCASE("linear ramps are reproduced") {
    std::vector<float> ramp(9);
    for (std::size_t i = 0; i < 9; ++i) ramp[i] = static_cast<float>(i % 3);
    FeatureMap m(1, 3, 3, ramp);
    const auto r = interpolate(m, 3, 5);
    for (std::size_t x = 0; x < 5; ++x) CHECK(r.at(0, 1, x) == doctest::Approx(0.5 * x));
  }
}

TEST_CASE("flatten_normalize uses row index y*W + x and unit rows") {
  // channel 0 holds x, channel 1 holds y
  std::vector<float> d;
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 4; ++x) d.push_back(static_cast<float>(x));
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 4; ++x) d.push_back(static_cast<float>(y));
  const auto f = flatten_normalize(FeatureMap(2, 3, 4, d));
  CHECK(f.rows() == 12);
  CHECK(f.index_of(3, 2) == 11);
  const auto r = f.row(f.index_of(3, 2));
  CHECK(r[0] == doctest::Approx(3.0 / std::sqrt(13.0)));
  CHECK(r[1] == doctest::Approx(2.0 / std::sqrt(13.0)));
  // the origin pixel is all zero and stays zero
  CHECK(f.row(0)[0] == 0.0f);
  CHECK(f.row(0)[1] == 0.0f);
  for (std::size_t i = 1; i < 12; ++i) {
    const auto row = f.row(i);
    CHECK(row[0] * row[0] + row[1] * row[1] == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("normalization survives extreme magnitudes") {
  FeatureMap m(2, 1, 2, {1e-30f, 3e30f, 1e-30f, 4e30f});
  const auto f = flatten_normalize(m);
  CHECK(f.row(0)[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(f.row(1)[0] == doctest::Approx(0.6));
  CHECK(f.row(1)[1] == doctest::Approx(0.8));
}

TEST_CASE("scalar and SIMD preparation agree bit for bit") {
  using geoannot::kernels::Backend;
  if (!kernels::backend_available(Backend::Avx2) && !kernels::backend_available(Backend::Neon)) {
    return;
  }
  std::mt19937_64 rng(8);
  const auto m = testsupport::random_map(rng, 11, 6, 9);
  const Backend simd = kernels::active_backend();
  const auto a = prepare(m, 17, 13);
  kernels::set_backend(Backend::Scalar);
  const auto b = prepare(m, 17, 13);
  kernels::set_backend(simd);
  REQUIRE(a.data().size() == b.data().size());
  CHECK(std::memcmp(a.data().data(), b.data().data(), a.data().size() * 4) == 0);
}
