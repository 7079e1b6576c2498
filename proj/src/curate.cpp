// SPDX-License-Identifier: Apache-2.0
#include "geoannot/curate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>
#include <fstream>
#include <map>

#include "geoannot/csv.hpp"

namespace geoannot {
namespace {

constexpr std::array<std::string_view, 18> kStyleNames = {
    "ROAD",     "MTB",      "TRACK",    "OTHER",   "DIRT-JUMP", "TOURING",
    "CYCLOCROSS", "POLO",   "BMX",      "TIMETRIAL", "COMMUTER", "CITY",
    "CRUISER",  "HYBRID",   "TRIALS",   "GRAVEL",  "CARGO",     "CHILDRENS"};
constexpr std::array<std::string_view, 3> kRimNames = {"spoked", "tri-spoked", "disked"};
constexpr std::array<std::string_view, 3> kForkNames = {"rigid", "suspension",
                                                        "single-sided"};
constexpr std::array<std::string_view, 5> kTubeNames = {"Mini", "Lite", "Standard",
                                                        "Reinforced", "Extreme"};
constexpr std::array<std::string_view, 5> kFrameNames = {"XS", "S", "M", "L", "XL"};

std::string canonical(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    out += c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

template <typename E, std::size_t N>
std::optional<E> parse_enum(std::string_view s, const std::array<std::string_view, N>& names) {
  const std::string key = canonical(s);
  for (std::size_t i = 0; i < N; ++i) {
    if (canonical(names[i]) == key) return static_cast<E>(i);
  }
  return std::nullopt;
}

// shortest representation that round-trips
std::string fmt(double v) {
  char buf[48];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string_view to_string(BikeStyle v) { return kStyleNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(RimStyle v) { return kRimNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(ForkType v) { return kForkNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(TubeSize v) { return kTubeNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(FrameSize v) { return kFrameNames[static_cast<std::size_t>(v)]; }

std::optional<BikeStyle> parse_bike_style(std::string_view s) {
  return parse_enum<BikeStyle>(s, kStyleNames);
}
std::optional<RimStyle> parse_rim_style(std::string_view s) {
  return parse_enum<RimStyle>(s, kRimNames);
}
std::optional<ForkType> parse_fork_type(std::string_view s) {
  return parse_enum<ForkType>(s, kForkNames);
}

std::optional<bool> parse_bool(std::string_view s) {
  const std::string key = canonical(s);
  if (key == "true" || key == "1" || key == "yes") return true;
  if (key == "false" || key == "0" || key == "no") return false;
  return std::nullopt;
}

void validate(const SampleRecord& r) {
  auto positive = [&](double v, std::string_view what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw CurationError(r.image_id + ": " + std::string(what) + " must be positive");
    }
  };
  positive(r.wheel_diameter_front_mm, "wheel_diam_front_mm");
  positive(r.wheel_diameter_rear_mm, "wheel_diam_rear_mm");
  positive(r.tubes.seat, "seat_d_mm");
  positive(r.tubes.down, "down_d_mm");
  positive(r.tubes.head, "head_d_mm");
  positive(r.tubes.top, "top_d_mm");
  positive(r.seat_tube_length_mm, "seat_tube_len_mm");
  positive(r.scale_factor, "scale_factor");
  if (r.extent_mm) positive(*r.extent_mm, "extent_mm");
}

TubeAverages compute_tube_averages(const std::vector<SampleRecord>& records) {
  if (records.empty()) throw CurationError("cannot average tubes of an empty dataset");
  TubeAverages sum;
  for (const auto& r : records) {
    sum.seat += r.tubes.seat;
    sum.down += r.tubes.down;
    sum.head += r.tubes.head;
    sum.top += r.tubes.top;
  }
  const double n = static_cast<double>(records.size());
  return {sum.seat / n, sum.down / n, sum.head / n, sum.top / n};
}

int count_above_average(const TubeDiameters& d, const TubeAverages& avg) {
  return (d.seat > avg.seat) + (d.down > avg.down) + (d.head > avg.head) + (d.top > avg.top);
}

TubeSize classify_tube_size(const TubeDiameters& diameters, const TubeAverages& averages) {
  return static_cast<TubeSize>(count_above_average(diameters, averages));
}

FrameSize classify_frame_size(double len) {
  if (!(len > 0.0) || !std::isfinite(len)) {
    throw CurationError("seat tube length must be positive, got " + fmt(len));
  }
  if (len < 360.0) return FrameSize::XS;
  if (len < 420.0) return FrameSize::S;
  if (len < 480.0) return FrameSize::M;
  if (len < 540.0) return FrameSize::L;
  return FrameSize::XL;
}

double horizontal_extent(const SampleRecord& r) {
  if (r.extent_mm) return *r.extent_mm;
  if (r.geometry) return r.geometry->horizontal_span();
  throw CurationError(r.image_id + ": no extent_mm and no geometry to derive it from");
}

ImageScale normalize_scale(const std::vector<SampleRecord>& records,
                           std::size_t resolution) {
  if (records.empty()) throw CurationError("cannot derive a scale from no records");
  if (resolution == 0) throw CurationError("resolution must be ≥ 1");
  double widest = 0.0;
  for (const auto& r : records) widest = std::max(widest, horizontal_extent(r));
  if (!(widest > 0.0)) throw CurationError("largest horizontal extent is zero");
  return {resolution, widest / static_cast<double>(resolution)};
}

std::optional<FieldSelector> field_selector(std::string_view name) {
  using Get = std::function<std::optional<double>(const SampleRecord&)>;
  static const std::map<std::string, Get, std::less<>> kFields = {
      {"wheel_diam_front_mm", [](const SampleRecord& r) -> std::optional<double> { return r.wheel_diameter_front_mm; }},
      {"wheel_diam_rear_mm", [](const SampleRecord& r) -> std::optional<double> { return r.wheel_diameter_rear_mm; }},
      {"seat_d_mm", [](const SampleRecord& r) -> std::optional<double> { return r.tubes.seat; }},
      {"down_d_mm", [](const SampleRecord& r) -> std::optional<double> { return r.tubes.down; }},
      {"head_d_mm", [](const SampleRecord& r) -> std::optional<double> { return r.tubes.head; }},
      {"top_d_mm", [](const SampleRecord& r) -> std::optional<double> { return r.tubes.top; }},
      {"seat_tube_len_mm", [](const SampleRecord& r) -> std::optional<double> { return r.seat_tube_length_mm; }},
      {"extent_mm",
       [](const SampleRecord& r) -> std::optional<double> {
         if (r.extent_mm) return r.extent_mm;
         if (r.geometry) return r.geometry->horizontal_span();
         return std::nullopt;
       }},
  };
  const auto it = kFields.find(name);
  if (it == kFields.end()) return std::nullopt;
  return FieldSelector{it->first, it->second};
}

std::vector<FieldSelector> default_size_fields() {
  std::vector<FieldSelector> out;
  for (std::string_view n : {"extent_mm", "wheel_diam_front_mm", "wheel_diam_rear_mm",
                             "seat_tube_len_mm"}) {
    out.push_back(*field_selector(n));
  }
  return out;
}

namespace {

std::optional<double> population_variance(const std::vector<SampleRecord>& records,
                                          const FieldSelector& field) {
  std::vector<double> values;
  for (const auto& r : records) {
    if (auto v = field.get(r)) values.push_back(*v);
  }
  if (values.empty()) return std::nullopt;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(values.size());
}

}  // namespace

std::vector<VarianceRow> variance_report(const std::vector<SampleRecord>& before,
                                         const std::vector<SampleRecord>& after,
                                         const std::vector<FieldSelector>& fields) {
  if (before.empty() || after.empty()) {
    throw CurationError("variance report needs non-empty before and after sets");
  }
  std::vector<VarianceRow> rows;
  for (const auto& f : fields) {
    const auto vb = population_variance(before, f);
    const auto va = population_variance(after, f);
    if (!vb || !va) continue;
    VarianceRow row{f.name, *vb, *va, std::nullopt};
    if (*vb > 0.0) row.reduction = 1.0 - *va / *vb;
    rows.push_back(row);
  }
  return rows;
}

void write_variance_csv(const std::vector<VarianceRow>& rows,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CurationError("cannot write " + path.string());
  out << "field,var_before,var_after,reduction_fraction\n";
  for (const auto& r : rows) {
    out << r.field << ',' << fmt(r.var_before) << ',' << fmt(r.var_after) << ','
        << (r.reduction ? fmt(*r.reduction) : std::string("null")) << '\n';
  }
}

ExclusionResult apply_exclusions(const std::vector<SampleRecord>& records,
                                 const std::set<std::string>& exclusion_ids) {
  ExclusionResult result;
  for (const auto& r : records) {
    if (exclusion_ids.count(r.image_id) != 0) {
      ++result.removed;
    } else {
      result.kept.push_back(r);
    }
  }
  return result;
}

std::set<std::string> read_exclusion_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CurationError("cannot open exclusion list " + path.string());
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    ids.insert(line.substr(b, e - b + 1));
  }
  return ids;
}

std::vector<SampleRecord> read_parameter_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CurationError("cannot open parameter table " + path.string());
  const std::vector<CsvRow> rows = read_csv(in);
  if (rows.empty()) throw CurationError(path.string() + ": empty table");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[rows[0][i]] = i;
  for (std::size_t i = 0; i < 14; ++i) {
    if (col.count(std::string(kManifestColumns[i])) == 0) {
      throw CurationError(path.string() + ": missing column " +
                          std::string(kManifestColumns[i]));
    }
  }
  std::vector<SampleRecord> records;
  for (std::size_t line = 1; line < rows.size(); ++line) {
    const CsvRow& row = rows[line];
    auto cell = [&](std::string_view name) -> std::string {
      const auto it = col.find(std::string(name));
      if (it == col.end() || it->second >= row.size()) return {};
      return row[it->second];
    };
    auto where = [&](std::string_view name) {
      return path.string() + " row " + std::to_string(line) + " column " + std::string(name);
    };
    auto number = [&](std::string_view name) {
      const std::string s = cell(name);
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      } catch (const std::exception&) {
        throw CurationError(where(name) + ": not a number: '" + s + "'");
      }
    };
    auto require = [&](auto parsed, std::string_view name) {
      if (!parsed) throw CurationError(where(name) + ": unknown value '" + cell(name) + "'");
      return *parsed;
    };
    SampleRecord r;
    r.image_id = cell("image_id");
    if (r.image_id.empty()) throw CurationError(where("image_id") + ": empty id");
    r.style = require(parse_bike_style(cell("style")), "style");
    r.rim_front = require(parse_rim_style(cell("rim_front")), "rim_front");
    r.rim_rear = require(parse_rim_style(cell("rim_rear")), "rim_rear");
    r.fork_type = require(parse_fork_type(cell("fork_type")), "fork_type");
    r.bottle_seat_tube = require(parse_bool(cell("bottle_seat_tube")), "bottle_seat_tube");
    r.bottle_down_tube = require(parse_bool(cell("bottle_down_tube")), "bottle_down_tube");
    r.wheel_diameter_front_mm = number("wheel_diam_front_mm");
    r.wheel_diameter_rear_mm = number("wheel_diam_rear_mm");
    r.tubes = {number("seat_d_mm"), number("down_d_mm"), number("head_d_mm"),
               number("top_d_mm")};
    r.seat_tube_length_mm = number("seat_tube_len_mm");
    if (!cell("scale_factor").empty()) r.scale_factor = number("scale_factor");
    if (!cell("extent_mm").empty()) r.extent_mm = number("extent_mm");
    validate(r);
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const std::vector<SampleRecord>& records,
                    const TubeAverages& averages, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CurationError("cannot write " + path.string());
  CsvRow header(kManifestColumns.begin(), kManifestColumns.end());
  out << csv_join(header) << '\n';
  for (const auto& r : records) {
    const CsvRow row = {r.image_id,
                        std::string(to_string(r.style)),
                        std::string(to_string(r.rim_front)),
                        std::string(to_string(r.rim_rear)),
                        std::string(to_string(r.fork_type)),
                        r.bottle_seat_tube ? "true" : "false",
                        r.bottle_down_tube ? "true" : "false",
                        fmt(r.wheel_diameter_front_mm),
                        fmt(r.wheel_diameter_rear_mm),
                        fmt(r.tubes.seat),
                        fmt(r.tubes.down),
                        fmt(r.tubes.head),
                        fmt(r.tubes.top),
                        fmt(r.seat_tube_length_mm),
                        std::string(to_string(classify_tube_size(r.tubes, averages))),
                        std::string(to_string(classify_frame_size(r.seat_tube_length_mm)))};
    out << csv_join(row) << '\n';
  }
}

std::size_t attach_geometry(std::vector<SampleRecord>& records,
                            const std::vector<GeometryRecord>& geometry) {
  std::map<std::string, const BikeGeometry*> by_id;
  for (const auto& g : geometry) by_id[g.image_id] = &g.geometry;
  std::size_t attached = 0;
  for (auto& r : records) {
    if (const auto it = by_id.find(r.image_id); it != by_id.end()) {
      r.geometry = *it->second;
      ++attached;
    }
  }
  return attached;
}

}  // namespace geoannot
