// SPDX-License-Identifier: Apache-2.0
#include "geoannot/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "geoannot/csv.hpp"

namespace geoannot {
namespace {

using Kind = GeometryError::Kind;

constexpr std::array<std::string_view, kGeometricPointCount> kNames = {
    "RWC", "FWC", "BB", "HTT", "ST", "FF", "STT", "SAT", "TTST", "TTHT", "DTHT", "RTST"};

long round_half_away(double v) {
  return static_cast<long>(std::round(v));  // std::round rounds half away from zero
}

}  // namespace

std::string_view to_string(GeometricPointId id) {
  return kNames[static_cast<std::size_t>(id)];
}

std::optional<GeometricPointId> parse_point_id(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return kAllPointIds[i];
  }
  return std::nullopt;
}

BikeGeometry::BikeGeometry(std::array<MmPoint, kGeometricPointCount> points,
                           double x_zero, double y_zero)
    : points_(points), x_zero_(x_zero), y_zero_(y_zero) {
  if (points_[static_cast<std::size_t>(GeometricPointId::RWC)] != MmPoint{0.0, 0.0}) {
    throw GeometryError(Kind::Invalid, "RWC must be at (0, 0)");
  }
  if (!(x_zero_ >= 0.0) || !(y_zero_ >= 0.0)) {
    throw GeometryError(Kind::Invalid, "x_zero and y_zero must be non-negative");
  }
  for (const MmPoint& p : points_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw GeometryError(Kind::Invalid, "non-finite geometry coordinate");
    }
  }
}

double BikeGeometry::horizontal_span() const {
  const auto [lo, hi] = std::minmax_element(
      points_.begin(), points_.end(),
      [](const MmPoint& a, const MmPoint& b) { return a.x < b.x; });
  return hi->x - lo->x;
}

void validate(const ImageScale& scale) {
  if (scale.resolution == 0) throw GeometryError(Kind::Invalid, "resolution must be ≥ 1");
  if (!(scale.mm_per_pixel > 0.0) || !std::isfinite(scale.mm_per_pixel)) {
    throw GeometryError(Kind::Invalid, "mm_per_pixel must be positive");
  }
}

ImageScale published_scale(std::size_t resolution) {
  if (resolution == kScale256.resolution) return kScale256;
  if (resolution == kScale2048.resolution) return kScale2048;
  throw GeometryError(Kind::Invalid,
                      "resolution must be 256 or 2048, got " + std::to_string(resolution));
}

PixelPoint mm_to_pixel(MmPoint local, double x_zero, double y_zero,
                       const ImageScale& scale) {
  validate(scale);
  const double res = static_cast<double>(scale.resolution);
  const long x = round_half_away((x_zero + local.x) / scale.mm_per_pixel);
  const long y = round_half_away(res - 1.0 - (y_zero + local.y) / scale.mm_per_pixel);
  const long limit = static_cast<long>(scale.resolution);
  if (x < 0 || x >= limit || y < 0 || y >= limit) {
    throw GeometryError(Kind::OutOfFrame, "point maps outside the frame: (" +
                                              std::to_string(x) + ", " +
                                              std::to_string(y) + ")");
  }
  return {x, y};
}

PixelPoint mm_to_pixel(const BikeGeometry& geo, GeometricPointId id,
                       const ImageScale& scale) {
  try {
    return mm_to_pixel(geo.point(id), geo.x_zero(), geo.y_zero(), scale);
  } catch (const GeometryError& e) {
    throw GeometryError(e.kind(), std::string(to_string(id)) + ": " + e.what());
  }
}

MmPoint pixel_to_mm(double x_px, double y_px, double x_zero, double y_zero,
                    const ImageScale& scale) {
  validate(scale);
  const double res = static_cast<double>(scale.resolution);
  return {x_px * scale.mm_per_pixel - x_zero,
          (res - 1.0 - y_px) * scale.mm_per_pixel - y_zero};
}

KeypointErrors evaluate_predictions(const std::vector<LabeledPoint>& predicted,
                                    const std::vector<LabeledPoint>& truth) {
  std::map<std::string, const LabeledPoint*> by_id;
  for (const auto& p : truth) {
    if (!by_id.emplace(p.id, &p).second) {
      throw GeometryError(Kind::IdMismatch, "duplicate truth id " + p.id);
    }
  }
  if (predicted.size() != truth.size()) {
    throw GeometryError(Kind::IdMismatch, "prediction and truth id sets differ");
  }
  if (truth.empty()) throw GeometryError(Kind::IdMismatch, "no points to evaluate");
  std::set<std::string> seen;
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  double dist_sum = 0.0;
  for (const auto& p : predicted) {
    const auto it = by_id.find(p.id);
    if (it == by_id.end() || !seen.insert(p.id).second) {
      throw GeometryError(Kind::IdMismatch, "prediction and truth id sets differ at " + p.id);
    }
    const double dx = p.x - it->second->x;
    const double dy = p.y - it->second->y;
    abs_sum += std::fabs(dx) + std::fabs(dy);
    sq_sum += dx * dx + dy * dy;
    dist_sum += std::hypot(dx, dy);
  }
  const double terms = 2.0 * static_cast<double>(truth.size());
  return {abs_sum / terms, sq_sum / terms, dist_sum / static_cast<double>(truth.size())};
}

KeypointErrors aggregate_dataset_errors(const std::vector<KeypointErrors>& per_image) {
  if (per_image.empty()) throw GeometryError(Kind::Invalid, "no per-image errors to aggregate");
  KeypointErrors sum;
  for (const auto& e : per_image) {
    sum.mae += e.mae;
    sum.mse += e.mse;
    sum.mean_euclidean += e.mean_euclidean;
  }
  const double n = static_cast<double>(per_image.size());
  return {sum.mae / n, sum.mse / n, sum.mean_euclidean / n};
}

nlohmann::json to_json(const GeometryRecord& record) {
  nlohmann::json points = nlohmann::json::object();
  for (GeometricPointId id : kAllPointIds) {
    const MmPoint& p = record.geometry.point(id);
    points[std::string(to_string(id))] = {p.x, p.y};
  }
  return {{"image_id", record.image_id},
          {"x_zero_mm", record.geometry.x_zero()},
          {"y_zero_mm", record.geometry.y_zero()},
          {"points", points}};
}

GeometryRecord geometry_record_from_json(const nlohmann::json& j) {
  try {
    std::array<MmPoint, kGeometricPointCount> pts{};
    std::array<bool, kGeometricPointCount> present{};
    for (const auto& [key, value] : j.at("points").items()) {
      const auto id = parse_point_id(key);
      if (!id) continue;  // extra points are not part of the 12-point layout
      const auto idx = static_cast<std::size_t>(*id);
      pts[idx] = {value.at(0).get<double>(), value.at(1).get<double>()};
      present[idx] = true;
    }
    for (std::size_t i = 0; i < kGeometricPointCount; ++i) {
      if (!present[i]) {
        throw GeometryError(Kind::Invalid, "missing point " + std::string(kNames[i]));
      }
    }
    return {j.at("image_id").get<std::string>(),
            BikeGeometry(pts, j.at("x_zero_mm").get<double>(),
                         j.at("y_zero_mm").get<double>())};
  } catch (const nlohmann::json::exception& e) {
    throw GeometryError(Kind::Invalid, std::string("malformed geometry record: ") + e.what());
  }
}

std::vector<GeometryRecord> load_geometry_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError(Kind::Invalid, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw GeometryError(Kind::Invalid, path.string() + ": " + e.what());
  }
  std::vector<GeometryRecord> out;
  if (j.is_array()) {
    for (const auto& item : j) out.push_back(geometry_record_from_json(item));
  } else {
    out.push_back(geometry_record_from_json(j));
  }
  return out;
}

void save_geometry_records(const std::vector<GeometryRecord>& records,
                           const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) arr.push_back(to_json(r));
  std::ofstream out(path);
  if (!out) throw GeometryError(Kind::Invalid, "cannot write " + path.string());
  out << arr.dump(2) << '\n';
}

std::vector<LabeledPoint> to_pixel_points(const BikeGeometry& geo,
                                          const ImageScale& scale) {
  std::vector<LabeledPoint> out;
  out.reserve(kGeometricPointCount);
  for (GeometricPointId id : kAllPointIds) {
    const PixelPoint p = mm_to_pixel(geo, id, scale);
    out.push_back({std::string(to_string(id)), static_cast<double>(p.x),
                   static_cast<double>(p.y)});
  }
  return out;
}

void write_evaluation_csv(const std::vector<ImageEvaluation>& rows,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw GeometryError(Kind::Invalid, "cannot write " + path.string());
  out << "image_id,mae_px,mse_px\n";
  std::vector<KeypointErrors> all;
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", r.errors.mae, r.errors.mse);
    out << csv_escape(r.image_id) << ',' << buf << '\n';
    all.push_back(r.errors);
  }
  if (!all.empty()) {
    const KeypointErrors mean = aggregate_dataset_errors(all);
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", mean.mae, mean.mse);
    out << "MEAN," << buf << '\n';
  }
}

}  // namespace geoannot
