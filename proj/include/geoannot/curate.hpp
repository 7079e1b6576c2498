// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dataset curation: categorical vocabularies, derived tube/frame size classes,
// the shared image scale, exclusion lists, the sample manifest and the
// before/after variance report.

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "geoannot/error.hpp"
#include "geoannot/geometry.hpp"

namespace geoannot {

class CurationError : public Error {
 public:
  using Error::Error;
};

enum class BikeStyle {
  Road, Mtb, Track, Other, DirtJump, Touring, Cyclocross, Polo, Bmx,
  Timetrial, Commuter, City, Cruiser, Hybrid, Trials, Gravel, Cargo, Childrens
};
enum class RimStyle { Spoked, TriSpoked, Disked };
enum class ForkType { Rigid, Suspension, SingleSided };
enum class TubeSize { Mini, Lite, Standard, Reinforced, Extreme };
enum class FrameSize { XS, S, M, L, XL };

inline constexpr std::array<BikeStyle, 18> kAllBikeStyles = {
    BikeStyle::Road,     BikeStyle::Mtb,       BikeStyle::Track,    BikeStyle::Other,
    BikeStyle::DirtJump, BikeStyle::Touring,   BikeStyle::Cyclocross, BikeStyle::Polo,
    BikeStyle::Bmx,      BikeStyle::Timetrial, BikeStyle::Commuter, BikeStyle::City,
    BikeStyle::Cruiser,  BikeStyle::Hybrid,    BikeStyle::Trials,   BikeStyle::Gravel,
    BikeStyle::Cargo,    BikeStyle::Childrens};
inline constexpr std::array<RimStyle, 3> kAllRimStyles = {
    RimStyle::Spoked, RimStyle::TriSpoked, RimStyle::Disked};
inline constexpr std::array<ForkType, 3> kAllForkTypes = {
    ForkType::Rigid, ForkType::Suspension, ForkType::SingleSided};

std::string_view to_string(BikeStyle v);
std::string_view to_string(RimStyle v);
std::string_view to_string(ForkType v);
std::string_view to_string(TubeSize v);
std::string_view to_string(FrameSize v);

// Case-insensitive; '_' and '-' are interchangeable.
std::optional<BikeStyle> parse_bike_style(std::string_view s);
std::optional<RimStyle> parse_rim_style(std::string_view s);
std::optional<ForkType> parse_fork_type(std::string_view s);
std::optional<bool> parse_bool(std::string_view s);

struct TubeDiameters {
  double seat = 0.0;
  double down = 0.0;
  double head = 0.0;
  double top = 0.0;
};

using TubeAverages = TubeDiameters;

// Dataset-wide averages of the published dataset.
inline constexpr TubeAverages kPublishedTubeAverages{31.5, 35.5, 42.9, 32.0};

struct SampleRecord {
  std::string image_id;
  BikeStyle style = BikeStyle::Road;
  RimStyle rim_front = RimStyle::Spoked;
  RimStyle rim_rear = RimStyle::Spoked;
  ForkType fork_type = ForkType::Rigid;
  bool bottle_seat_tube = false;
  bool bottle_down_tube = false;
  double wheel_diameter_front_mm = 0.0;
  double wheel_diameter_rear_mm = 0.0;
  TubeDiameters tubes;
  double seat_tube_length_mm = 0.0;
  double scale_factor = 1.0;
  std::optional<double> extent_mm;  // horizontal extent, overrides the geometry span
  std::optional<BikeGeometry> geometry;
};

// Throws CurationError if a measurement is not positive.
void validate(const SampleRecord& record);

TubeAverages compute_tube_averages(const std::vector<SampleRecord>& records);

// Number of diameters strictly greater than their average.
int count_above_average(const TubeDiameters& diameters, const TubeAverages& averages);
TubeSize classify_tube_size(const TubeDiameters& diameters, const TubeAverages& averages);

// Half-open bins: XS < 360 <= S < 420 <= M < 480 <= L < 540 <= XL.
FrameSize classify_frame_size(double seat_tube_length_mm);

// extent_mm if set, else the geometry's horizontal span.
double horizontal_extent(const SampleRecord& record);

// One shared scale that fits the widest sample to the image width.
ImageScale normalize_scale(const std::vector<SampleRecord>& records,
                           std::size_t resolution);

struct FieldSelector {
  std::string name;
  std::function<std::optional<double>(const SampleRecord&)> get;
};

// Selectors by manifest column name (plus "extent_mm").
std::optional<FieldSelector> field_selector(std::string_view name);
std::vector<FieldSelector> default_size_fields();

struct VarianceRow {
  std::string field;
  double var_before = 0.0;
  double var_after = 0.0;
  std::optional<double> reduction;  // 1 - after/before; empty when before == 0
};

// Population variance; records where the selector yields nothing are skipped.
std::vector<VarianceRow> variance_report(const std::vector<SampleRecord>& before,
                                         const std::vector<SampleRecord>& after,
                                         const std::vector<FieldSelector>& fields);

void write_variance_csv(const std::vector<VarianceRow>& rows,
                        const std::filesystem::path& path);

struct ExclusionResult {
  std::vector<SampleRecord> kept;
  std::size_t removed = 0;
};

ExclusionResult apply_exclusions(const std::vector<SampleRecord>& records,
                                 const std::set<std::string>& exclusion_ids);

// Newline separated ids; '#' starts a comment, blank lines ignored.
std::set<std::string> read_exclusion_list(const std::filesystem::path& path);

inline constexpr std::array<std::string_view, 16> kManifestColumns = {
    "image_id",         "style",              "rim_front",          "rim_rear",
    "fork_type",        "bottle_seat_tube",   "bottle_down_tube",   "wheel_diam_front_mm",
    "wheel_diam_rear_mm", "seat_d_mm",        "down_d_mm",          "head_d_mm",
    "top_d_mm",         "seat_tube_len_mm",   "tube_size_class",    "frame_size_class"};

// Reads a parameter table keyed by header names. Required: the first 14
// manifest columns. Optional: scale_factor, extent_mm. Other columns (and the
// derived class columns) are ignored.
std::vector<SampleRecord> read_parameter_table(const std::filesystem::path& path);

void write_manifest(const std::vector<SampleRecord>& records,
                    const TubeAverages& averages, const std::filesystem::path& path);

// Attaches geometry records by image_id. Returns the number attached.
std::size_t attach_geometry(std::vector<SampleRecord>& records,
                            const std::vector<GeometryRecord>& geometry);

}  // namespace geoannot
