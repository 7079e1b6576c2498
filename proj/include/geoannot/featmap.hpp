// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense per-pixel descriptor maps, their GBFM file form, bilinear resampling
// and the flatten + L2-normalize step that precedes cosine matching.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "geoannot/error.hpp"

namespace geoannot {

class FeatureMapError : public Error {
 public:
  enum class Kind {
    MissingFile,
    Io,
    BadMagic,
    BadVersion,
    PayloadMismatch,
    NonFinite,
    InvalidShape,
  };

  FeatureMapError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// C x H x W float32 grid, channel-major then row-major.
class FeatureMap {
 public:
  // Validates the shape and that every value is finite.
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width,
             std::vector<float> data);

  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::span<const float> data() const noexcept { return data_; }

  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }
  std::span<const float> plane(std::size_t c) const {
    return std::span<const float>(data_).subspan(c * height_ * width_,
                                                 height_ * width_);
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t channels_;
  std::size_t height_;
  std::size_t width_;
  std::vector<float> data_;
};

// (H*W) x C matrix: one row per pixel (index = y * W + x), each row unit norm
// or exactly zero.
class FlatFeatureMap {
 public:
  FlatFeatureMap(std::size_t height, std::size_t width, std::size_t channels,
                 std::vector<float> data);

  std::size_t rows() const noexcept { return height_ * width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t source_height() const noexcept { return height_; }
  std::size_t source_width() const noexcept { return width_; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(data_).subspan(r * channels_, channels_);
  }
  std::size_t index_of(std::size_t x, std::size_t y) const noexcept {
    return y * width_ + x;
  }

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t channels_;
  std::vector<float> data_;
};

inline constexpr char kGbfmMagic[4] = {'G', 'B', 'F', 'M'};
inline constexpr std::uint32_t kGbfmVersion = 1;
inline constexpr std::size_t kGbfmHeaderBytes = 20;

FeatureMap load_feature_map(const std::filesystem::path& path);
void save_feature_map(const FeatureMap& map, const std::filesystem::path& path);

// In-memory GBFM codec; the file functions are thin wrappers over these.
std::vector<std::uint8_t> encode_gbfm(const FeatureMap& map);
FeatureMap decode_gbfm(std::span<const std::uint8_t> bytes);

// Bilinear resampling per channel on corner-aligned grids: target pixel t maps
// to source coordinate t * (src - 1) / (dst - 1). Same-size input is returned
// unchanged.
FeatureMap interpolate(const FeatureMap& map, std::size_t target_height,
                       std::size_t target_width);

FlatFeatureMap flatten_normalize(const FeatureMap& map);

// interpolate (when the size differs) followed by flatten_normalize.
FlatFeatureMap prepare(const FeatureMap& map, std::size_t height,
                       std::size_t width);

}  // namespace geoannot
