// SPDX-License-Identifier: Apache-2.0
#pragma once

// The 12-point bicycle layout, mm <-> pixel transforms and keypoint error
// metrics.
//
// Geometry is stored in millimetres relative to the rear wheel center (RWC),
// y pointing up. x_zero / y_zero locate RWC relative to the bottom-left image
// corner. Pixels use a top-left origin with y pointing down; this module is
// the only place the flip happens.

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "geoannot/error.hpp"

namespace geoannot {

class GeometryError : public Error {
 public:
  enum class Kind { OutOfFrame, IdMismatch, Invalid };
  GeometryError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

enum class GeometricPointId {
  RWC, FWC, BB, HTT, ST, FF, STT, SAT, TTST, TTHT, DTHT, RTST
};

inline constexpr std::size_t kGeometricPointCount = 12;
inline constexpr std::array<GeometricPointId, kGeometricPointCount> kAllPointIds = {
    GeometricPointId::RWC,  GeometricPointId::FWC,  GeometricPointId::BB,
    GeometricPointId::HTT,  GeometricPointId::ST,   GeometricPointId::FF,
    GeometricPointId::STT,  GeometricPointId::SAT,  GeometricPointId::TTST,
    GeometricPointId::TTHT, GeometricPointId::DTHT, GeometricPointId::RTST};

std::string_view to_string(GeometricPointId id);
std::optional<GeometricPointId> parse_point_id(std::string_view name);

struct MmPoint {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const MmPoint&, const MmPoint&) = default;
};

struct PixelPoint {
  long x = 0;
  long y = 0;
  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

class BikeGeometry {
 public:
  // points are indexed by GeometricPointId. Throws GeometryError if RWC is not
  // at the origin or an offset is negative.
  BikeGeometry(std::array<MmPoint, kGeometricPointCount> points, double x_zero,
               double y_zero);

  const MmPoint& point(GeometricPointId id) const {
    return points_[static_cast<std::size_t>(id)];
  }
  const std::array<MmPoint, kGeometricPointCount>& points() const { return points_; }
  double x_zero() const noexcept { return x_zero_; }
  double y_zero() const noexcept { return y_zero_; }

  // max x - min x over the 12 points
  double horizontal_span() const;

  friend bool operator==(const BikeGeometry&, const BikeGeometry&) = default;

 private:
  std::array<MmPoint, kGeometricPointCount> points_;
  double x_zero_;
  double y_zero_;
};

struct ImageScale {
  std::size_t resolution;  // square images, pixels per side
  double mm_per_pixel;
};

// Published scales of the normalized dataset.
inline constexpr ImageScale kScale256{256, 10.19};
inline constexpr ImageScale kScale2048{2048, 1.27};

// Scale for one of the published resolutions; throws for anything else.
ImageScale published_scale(std::size_t resolution);

void validate(const ImageScale& scale);

// Round half away from zero; throws OutOfFrame when outside [0, resolution).
PixelPoint mm_to_pixel(MmPoint local, double x_zero, double y_zero,
                       const ImageScale& scale);
PixelPoint mm_to_pixel(const BikeGeometry& geo, GeometricPointId id,
                       const ImageScale& scale);

MmPoint pixel_to_mm(double x_px, double y_px, double x_zero, double y_zero,
                    const ImageScale& scale);

struct LabeledPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
};

struct KeypointErrors {
  double mae = 0.0;  // mean |dx|, |dy| over 2N terms
  double mse = 0.0;  // mean dx^2, dy^2 over 2N terms
  double mean_euclidean = 0.0;  // mean per-point distance, reported separately
};

// Points are matched by id; the id sets must be identical.
KeypointErrors evaluate_predictions(const std::vector<LabeledPoint>& predicted,
                                    const std::vector<LabeledPoint>& truth);

// Unweighted mean over images.
KeypointErrors aggregate_dataset_errors(const std::vector<KeypointErrors>& per_image);

// Geometry record: { image_id, x_zero_mm, y_zero_mm, points: { RWC: [x, y], ... } }
struct GeometryRecord {
  std::string image_id;
  BikeGeometry geometry;
};

nlohmann::json to_json(const GeometryRecord& record);
GeometryRecord geometry_record_from_json(const nlohmann::json& j);

// A file holds either one record or an array of records.
std::vector<GeometryRecord> load_geometry_records(const std::filesystem::path& path);
void save_geometry_records(const std::vector<GeometryRecord>& records,
                           const std::filesystem::path& path);

// Pixel positions of all 12 points at the given scale.
std::vector<LabeledPoint> to_pixel_points(const BikeGeometry& geo,
                                          const ImageScale& scale);

struct ImageEvaluation {
  std::string image_id;
  KeypointErrors errors;
};

// CSV: image_id,mae_px,mse_px then a summary row "MEAN" with the unweighted
// means.
void write_evaluation_csv(const std::vector<ImageEvaluation>& rows,
                          const std::filesystem::path& path);

}  // namespace geoannot
