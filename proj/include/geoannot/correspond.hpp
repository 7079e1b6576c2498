// SPDX-License-Identifier: Apache-2.0
#pragma once

// Few-shot keypoint transfer by cosine matching of per-pixel descriptors.
//
// For each annotated source image the descriptors at its keypoints are
// gathered once (V, N x C). A target map is flattened and normalized (F,
// HW x C); every point's best pixel is the argmax of V * F^T along the row.
// With several sources each point takes the location from whichever source
// matched it best.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "geoannot/error.hpp"
#include "geoannot/featmap.hpp"

namespace geoannot {

class CorrespondenceError : public Error {
 public:
  using Error::Error;
};

struct Keypoint {
  std::string id;
  std::size_t x = 0;  // pixel column
  std::size_t y = 0;  // pixel row
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct KeypointAnnotation {
  std::string image_id;
  std::vector<Keypoint> points;
};

// N x C, row-major.
struct PointDescriptorMatrix {
  std::size_t rows = 0;
  std::size_t channels = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t k) const {
    return std::span<const float>(data).subspan(k * channels, channels);
  }
};

// N x (H*W), row-major.
struct SimilarityMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t k) const {
    return std::span<const float>(data).subspan(k * cols, cols);
  }
};

struct PointMatch {
  float score = 0.0f;
  std::size_t x = 0;
  std::size_t y = 0;
  friend bool operator==(const PointMatch&, const PointMatch&) = default;
};

struct PredictedPoint {
  std::string id;
  std::size_t x = 0;
  std::size_t y = 0;
  float score = 0.0f;
  std::size_t source_index = 0;
  friend bool operator==(const PredictedPoint&, const PredictedPoint&) = default;
};

struct PredictionResult {
  std::vector<PredictedPoint> points;
  friend bool operator==(const PredictionResult&, const PredictionResult&) = default;
};

// Row k is flat.row(y_k * W + x_k). Throws naming the point id when a keypoint
// lies outside the map.
PointDescriptorMatrix extract_point_descriptors(const FlatFeatureMap& flat,
                                                const KeypointAnnotation& annotation);

SimilarityMatrix similarity(const PointDescriptorMatrix& v,
                            const FlatFeatureMap& target);

// Per row: max value and its (x, y); lowest flat index wins ties.
std::vector<PointMatch> best_per_point(const SimilarityMatrix& s,
                                       std::size_t target_width);

struct Source {
  KeypointAnnotation annotation;
  PointDescriptorMatrix descriptors;
};

// Immutable set of annotated sources sharing one image resolution and one
// keypoint id list.
class SourceBank {
 public:
  SourceBank(std::vector<Source> sources, std::size_t height, std::size_t width);

  // Interpolates each map to (height, width), normalizes and extracts the
  // annotated descriptors.
  static SourceBank build(
      const std::vector<std::pair<KeypointAnnotation, FeatureMap>>& annotated,
      std::size_t height, std::size_t width);

  const std::vector<Source>& sources() const noexcept { return sources_; }
  std::size_t size() const noexcept { return sources_.size(); }
  std::size_t point_count() const noexcept { return point_count_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t image_height() const noexcept { return height_; }
  std::size_t image_width() const noexcept { return width_; }
  const std::vector<std::string>& point_ids() const noexcept { return point_ids_; }

  // A bank restricted to the first `count` sources.
  SourceBank prefix(std::size_t count) const;

 private:
  std::vector<Source> sources_;
  std::size_t height_;
  std::size_t width_;
  std::size_t point_count_ = 0;
  std::size_t channels_ = 0;
  std::vector<std::string> point_ids_;
};

PredictionResult predict(const SourceBank& bank, const FlatFeatureMap& target);

struct TargetRef {
  std::string image_id;
  std::filesystem::path feature_map_path;
};

struct AnnotationOutcome {
  std::string image_id;
  std::optional<PredictionResult> result;
  std::string error;  // set when result is empty
};

// Loads, resamples to the bank resolution and predicts each target. Outcomes
// are delivered to `sink` in input order; per-item failures do not stop the
// run. workers == 0 picks the hardware concurrency.
void annotate_dataset(const SourceBank& bank, const std::vector<TargetRef>& targets,
                      std::size_t workers,
                      const std::function<void(AnnotationOutcome)>& sink);

std::vector<AnnotationOutcome> annotate_dataset(const SourceBank& bank,
                                                const std::vector<TargetRef>& targets,
                                                std::size_t workers = 1);

// Bank manifest: either an array of source entries or
// { "height": H, "width": W, "sources": [ ... ] } where each entry is
// { "image_id", "feature_map_path", "points": [ { "id", "x_px", "y_px" } ] }.
// Relative paths resolve against the manifest directory.
struct BankManifest {
  std::optional<std::size_t> height;
  std::optional<std::size_t> width;
  std::vector<std::pair<KeypointAnnotation, std::filesystem::path>> sources;
};

BankManifest load_bank_manifest(const std::filesystem::path& path);
SourceBank load_source_bank(const BankManifest& manifest, std::size_t default_height,
                            std::size_t default_width);

// { "image_id", "points": [ { "id", "x_px", "y_px", "score", "source" } ] } or
// { "image_id", "error" }
nlohmann::json to_json(const AnnotationOutcome& outcome);
AnnotationOutcome annotation_outcome_from_json(const nlohmann::json& j);

}  // namespace geoannot
