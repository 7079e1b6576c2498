// SPDX-License-Identifier: Apache-2.0
#include "geoannot/featmap.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "geoannot/kernels.hpp"

namespace geoannot {
namespace {

using Kind = FeatureMapError::Kind;

void check_shape(std::size_t channels, std::size_t height, std::size_t width,
                 std::size_t length) {
  if (channels == 0) throw FeatureMapError(Kind::InvalidShape, "C must be ≥ 1");
  if (height == 0 || width == 0) {
    throw FeatureMapError(Kind::InvalidShape, "H and W must be ≥ 1");
  }
  if (length != channels * height * width) {
    throw FeatureMapError(Kind::InvalidShape,
                          "data length " + std::to_string(length) +
                              " does not match C*H*W = " +
                              std::to_string(channels * height * width));
  }
}

void check_finite(std::span<const float> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw FeatureMapError(Kind::NonFinite,
                            "non-finite value at element " + std::to_string(i));
    }
  }
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t narrow_dim(std::size_t v) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw FeatureMapError(Kind::InvalidShape, "dimension exceeds u32 range");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

FeatureMap::FeatureMap(std::size_t channels, std::size_t height,
                       std::size_t width, std::vector<float> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  check_shape(channels_, height_, width_, data_.size());
  check_finite(data_);
}

FlatFeatureMap::FlatFeatureMap(std::size_t height, std::size_t width,
                               std::size_t channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_shape(channels_, height_, width_, data_.size());
  check_finite(data_);
}

std::vector<std::uint8_t> encode_gbfm(const FeatureMap& map) {
  std::vector<std::uint8_t> out;
  out.reserve(kGbfmHeaderBytes + map.data().size() * 4);
  out.insert(out.end(), std::begin(kGbfmMagic), std::end(kGbfmMagic));
  put_u32(out, kGbfmVersion);
  put_u32(out, narrow_dim(map.channels()));
  put_u32(out, narrow_dim(map.height()));
  put_u32(out, narrow_dim(map.width()));
  for (float v : map.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureMap decode_gbfm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kGbfmHeaderBytes) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kGbfmMagic, 4) != 0) {
      throw FeatureMapError(Kind::BadMagic, "bad magic");
    }
    throw FeatureMapError(Kind::PayloadMismatch,
                          "payload length mismatch: truncated header");
  }
  if (std::memcmp(bytes.data(), kGbfmMagic, 4) != 0) {
    throw FeatureMapError(Kind::BadMagic, "bad magic");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kGbfmVersion) {
    throw FeatureMapError(Kind::BadVersion,
                          "unsupported version " + std::to_string(version));
  }
  const std::size_t c = get_u32(bytes.data() + 8);
  const std::size_t h = get_u32(bytes.data() + 12);
  const std::size_t w = get_u32(bytes.data() + 16);
  if (c == 0) throw FeatureMapError(Kind::InvalidShape, "C must be ≥ 1");
  if (h == 0 || w == 0) throw FeatureMapError(Kind::InvalidShape, "H and W must be ≥ 1");
  // c, h, w < 2^32 each; the product fits in 128 bits but not necessarily 64.
  const unsigned __int128 expected =
      static_cast<unsigned __int128>(c) * h * w * 4u;
  if (expected != bytes.size() - kGbfmHeaderBytes) {
    throw FeatureMapError(Kind::PayloadMismatch, "payload length mismatch");
  }
  const std::size_t count = c * h * w;
  std::vector<float> data(count);
  const std::uint8_t* p = bytes.data() + kGbfmHeaderBytes;
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  }
  return FeatureMap(c, h, w, std::move(data));
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw FeatureMapError(Kind::MissingFile, "missing file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FeatureMapError(Kind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw FeatureMapError(Kind::Io, "read failed: " + path.string());
  return decode_gbfm(bytes);
}

void save_feature_map(const FeatureMap& map, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_gbfm(map);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FeatureMapError(Kind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw FeatureMapError(Kind::Io, "write failed: " + path.string());
}

namespace {

struct AxisSample {
  std::size_t lo;
  std::size_t hi;
  float t;
};

std::vector<AxisSample> axis_samples(std::size_t src, std::size_t dst) {
  std::vector<AxisSample> out(dst);
  for (std::size_t i = 0; i < dst; ++i) {
    if (src == 1 || dst == 1) {
      out[i] = {0, 0, 0.0f};
      continue;
    }
    // exact rational position i * (src-1) / (dst-1)
    const std::size_t num = i * (src - 1);
    const std::size_t den = dst - 1;
    const std::size_t lo = num / den;
    const std::size_t rem = num % den;
    const std::size_t hi = lo + 1 < src ? lo + 1 : lo;
    out[i] = {lo, hi, static_cast<float>(static_cast<double>(rem) / den)};
  }
  return out;
}

}  // namespace

FeatureMap interpolate(const FeatureMap& map, std::size_t target_height,
                       std::size_t target_width) {
  if (target_height == 0 || target_width == 0) {
    throw FeatureMapError(Kind::InvalidShape, "target dimensions must be ≥ 1");
  }
  if (target_height == map.height() && target_width == map.width()) return map;

  const auto& k = kernels::active();
  const auto xs = axis_samples(map.width(), target_width);
  const auto ys = axis_samples(map.height(), target_height);
  const std::size_t out_plane = target_height * target_width;
  std::vector<float> out(map.channels() * out_plane);

  // Horizontal pass into an H_src x W_dst buffer, then vertical lerp of rows.
  std::vector<float> rows(map.height() * target_width);
  for (std::size_t c = 0; c < map.channels(); ++c) {
    const auto plane = map.plane(c);
    for (std::size_t y = 0; y < map.height(); ++y) {
      const float* src = plane.data() + y * map.width();
      float* dst = rows.data() + y * target_width;
      for (std::size_t x = 0; x < target_width; ++x) {
        const AxisSample& s = xs[x];
        k.lerp(src + s.lo, src + s.hi, s.t, dst + x, 1);
      }
    }
    float* out_c = out.data() + c * out_plane;
    for (std::size_t y = 0; y < target_height; ++y) {
      const AxisSample& s = ys[y];
      k.lerp(rows.data() + s.lo * target_width, rows.data() + s.hi * target_width,
             s.t, out_c + y * target_width, target_width);
    }
  }
  return FeatureMap(map.channels(), target_height, target_width, std::move(out));
}

FlatFeatureMap flatten_normalize(const FeatureMap& map) {
  const std::size_t c_count = map.channels();
  const std::size_t pixels = map.height() * map.width();
  std::vector<float> flat(pixels * c_count);
  const auto src = map.data();
  for (std::size_t c = 0; c < c_count; ++c) {
    const float* plane = src.data() + c * pixels;
    for (std::size_t p = 0; p < pixels; ++p) flat[p * c_count + c] = plane[p];
  }
  const auto& k = kernels::active();
  for (std::size_t p = 0; p < pixels; ++p) {
    float* row = flat.data() + p * c_count;
    // Scale by the max magnitude first so the squared sum cannot overflow or
    // underflow; the quotient is then normalized.
    float peak = 0.0f;
    for (std::size_t c = 0; c < c_count; ++c) peak = std::max(peak, std::fabs(row[c]));
    if (peak == 0.0f) continue;
    k.divide(row, c_count, peak);
    const float norm = std::sqrt(k.dot(row, row, c_count));
    k.divide(row, c_count, norm);
  }
  return FlatFeatureMap(map.height(), map.width(), c_count, std::move(flat));
}

FlatFeatureMap prepare(const FeatureMap& map, std::size_t height,
                       std::size_t width) {
  if (map.height() == height && map.width() == width) return flatten_normalize(map);
  return flatten_normalize(interpolate(map, height, width));
}

}  // namespace geoannot
