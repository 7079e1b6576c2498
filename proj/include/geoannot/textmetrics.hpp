// SPDX-License-Identifier: Apache-2.0
#pragma once

// Diversity metrics for generated descriptions.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "geoannot/error.hpp"

namespace geoannot {

class MetricsError : public Error {
 public:
  using Error::Error;
};

// UTF-8 to Unicode scalar values; each invalid byte decodes to U+FFFD.
std::u32string decode_utf8(std::string_view s);

// Edit distance over Unicode scalar values.
std::size_t levenshtein(std::string_view a, std::string_view b);
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

struct Uniqueness {
  std::size_t total = 0;
  std::size_t unique = 0;
  double ratio = 0.0;
};

// Dedup key: the string with surrounding whitespace trimmed.
Uniqueness uniqueness(const std::vector<std::string>& group);

// Distinct trimmed strings, in first-occurrence order.
std::vector<std::string> unique_members(const std::vector<std::string>& group);

struct Histogram {
  std::size_t bucket_width = 1;
  std::vector<std::size_t> counts;  // bucket i covers [i*w, (i+1)*w)

  friend bool operator==(const Histogram&, const Histogram&) = default;
};

struct DistanceStats {
  double mean = 0.0;
  double median = 0.0;
  std::size_t min = 0;
  std::size_t max = 0;
  std::size_t pairs = 0;
  std::size_t members = 0;  // unique strings that entered the pair set
  bool sampled = false;
  Histogram histogram;
};

inline constexpr std::size_t kDefaultPairCap = 2000;
inline constexpr std::size_t kDefaultBucketWidth = 5;

// All unordered pairs of the deduplicated group. Groups with more than
// `member_cap` unique strings are reduced to a seeded random subset of that
// size first. Throws with fewer than two unique strings.
DistanceStats pairwise_distance_stats(const std::vector<std::string>& group,
                                      std::uint64_t seed,
                                      std::size_t member_cap = kDefaultPairCap,
                                      std::size_t bucket_width = kDefaultBucketWidth);

struct GroupKey {
  std::string mode;
  std::string length;
  std::string character;
  std::string style;

  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

struct GroupDiversity {
  GroupKey key;
  Uniqueness uniqueness;
  std::optional<DistanceStats> distances;  // absent below two unique members
};

struct DiversityReport {
  std::uint64_t seed = 0;
  std::size_t member_cap = kDefaultPairCap;
  std::vector<GroupDiversity> groups;
};

// Groups are emitted in key order.
DiversityReport build_diversity_report(
    const std::vector<std::pair<GroupKey, std::string>>& descriptions, std::uint64_t seed,
    std::size_t member_cap = kDefaultPairCap,
    std::size_t bucket_width = kDefaultBucketWidth);

nlohmann::json histogram_json(const DiversityReport& report);

// CSV columns: mode,length,character,style,total,unique,ratio,lev_mean,
// lev_median,lev_min,lev_max. The JSON file holds one histogram per group.
void emit_report(const DiversityReport& report, const std::filesystem::path& csv_path,
                 const std::filesystem::path& json_path);

}  // namespace geoannot
