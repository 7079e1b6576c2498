// SPDX-License-Identifier: Apache-2.0
#include "geoannot/textmetrics.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "geoannot/csv.hpp"

namespace geoannot {

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2, cp = b0 & 0x1F, min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3, cp = b0 & 0x0F, min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4, cp = b0 & 0x07, min = 0x10000;
    }
    bool ok = len != 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (b & 0x3F);
      }
    }
    if (ok && (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))) ok = false;
    if (ok) {
      out.push_back(cp);
      i += len;
    } else {
      out.push_back(U'�');
      ++i;
    }
  }
  return out;
}

namespace {

// Bit-parallel edit distance (Myers / Hyyrö), blocked in 64-row words.
// The pattern runs down the rows; its match masks are built once and reused
// against many texts.
class PatternMasks {
 public:
  explicit PatternMasks(std::u32string_view pattern)
      : length_(pattern.size()), blocks_((pattern.size() + 63) / 64) {
    std::map<char32_t, std::vector<std::uint64_t>> masks;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      auto& m = masks[pattern[i]];
      if (m.empty()) m.assign(blocks_, 0);
      m[i / 64] |= std::uint64_t{1} << (i % 64);
    }
    for (auto& [c, m] : masks) {
      symbols_.push_back(c);
      words_.insert(words_.end(), m.begin(), m.end());
    }
    zero_.assign(blocks_, 0);
  }

  std::size_t length() const { return length_; }
  std::size_t blocks() const { return blocks_; }

  const std::uint64_t* eq(char32_t c) const {
    const auto it = std::lower_bound(symbols_.begin(), symbols_.end(), c);
    if (it == symbols_.end() || *it != c) return zero_.data();
    return words_.data() + static_cast<std::size_t>(it - symbols_.begin()) * blocks_;
  }

 private:
  std::size_t length_;
  std::size_t blocks_;
  std::vector<char32_t> symbols_;
  std::vector<std::uint64_t> words_;
  std::vector<std::uint64_t> zero_;
};

std::size_t bit_parallel_distance(const PatternMasks& p, std::u32string_view text) {
  const std::size_t m = p.length();
  if (m == 0) return text.size();
  const std::size_t blocks = p.blocks();
  // Vertical deltas of the current column: +1 where pv is set, -1 where mv is.
  std::vector<std::uint64_t> pv(blocks, ~std::uint64_t{0});
  std::vector<std::uint64_t> mv(blocks, 0);
  constexpr std::uint64_t kHigh = std::uint64_t{1} << 63;
  for (char32_t c : text) {
    const std::uint64_t* eqs = p.eq(c);
    int hin = 1;  // the top row grows by one per column
    for (std::size_t b = 0; b < blocks; ++b) {
      std::uint64_t eq = eqs[b];
      const std::uint64_t xv = eq | mv[b];
      if (hin < 0) eq |= 1;
      const std::uint64_t xh = (((eq & pv[b]) + pv[b]) ^ pv[b]) | eq;
      std::uint64_t ph = mv[b] | ~(xh | pv[b]);
      std::uint64_t mh = pv[b] & xh;
      int hout = 0;
      if (ph & kHigh) hout = 1;
      if (mh & kHigh) hout = -1;
      ph <<= 1;
      mh <<= 1;
      if (hin < 0) {
        mh |= 1;
      } else if (hin > 0) {
        ph |= 1;
      }
      pv[b] = mh | ~(xv | ph);
      mv[b] = ph & xv;
      hin = hout;
    }
  }
  // D[m][n] = D[0][n] + sum of the vertical deltas of rows 1..m.
  long long score = static_cast<long long>(text.size());
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t rows = std::min<std::size_t>(64, m - b * 64);
    const std::uint64_t mask = rows == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << rows) - 1;
    score += std::popcount(pv[b] & mask);
    score -= std::popcount(mv[b] & mask);
  }
  return static_cast<std::size_t>(score);
}

std::string trimmed(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Uniform integer in [0, bound) from a 64-bit engine, by rejection.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

std::string fmt(double v) {
  char buf[48];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
  return std::string(buf, res.ptr);
}

}  // namespace

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  // shorter string down the rows keeps the block count low
  return bit_parallel_distance(PatternMasks(b), a);
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(std::u32string_view(decode_utf8(a)), std::u32string_view(decode_utf8(b)));
}

std::vector<std::string> unique_members(const std::vector<std::string>& group) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& s : group) {
    std::string key = trimmed(s);
    if (seen.insert(key).second) out.push_back(std::move(key));
  }
  return out;
}

Uniqueness uniqueness(const std::vector<std::string>& group) {
  if (group.empty()) throw MetricsError("uniqueness of an empty group");
  Uniqueness u;
  u.total = group.size();
  u.unique = unique_members(group).size();
  u.ratio = static_cast<double>(u.unique) / static_cast<double>(u.total);
  return u;
}

DistanceStats pairwise_distance_stats(const std::vector<std::string>& group,
                                      std::uint64_t seed, std::size_t member_cap,
                                      std::size_t bucket_width) {
  std::vector<std::string> members = unique_members(group);
  if (members.size() < 2) {
    throw MetricsError("pairwise distances need at least two unique strings");
  }
  if (member_cap < 2) throw MetricsError("member cap must be at least 2");
  if (bucket_width == 0) throw MetricsError("bucket width must be positive");
  DistanceStats stats;
  if (members.size() > member_cap) {
    // partial Fisher-Yates, then restore input order among the chosen
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> idx(members.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < member_cap; ++i) {
      const std::size_t j = i + bounded(rng, idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(member_cap);
    std::sort(idx.begin(), idx.end());
    std::vector<std::string> chosen;
    chosen.reserve(member_cap);
    for (std::size_t i : idx) chosen.push_back(std::move(members[i]));
    members = std::move(chosen);
    stats.sampled = true;
  }

  std::vector<std::u32string> decoded;
  decoded.reserve(members.size());
  for (const auto& s : members) decoded.push_back(decode_utf8(s));

  std::vector<std::size_t> distances;
  distances.reserve(members.size() * (members.size() - 1) / 2);
  for (std::size_t i = 0; i < decoded.size(); ++i) {
    const PatternMasks masks(decoded[i]);
    for (std::size_t j = i + 1; j < decoded.size(); ++j) {
      distances.push_back(bit_parallel_distance(masks, decoded[j]));
    }
  }

  stats.members = members.size();
  stats.pairs = distances.size();
  double sum = 0.0;
  for (std::size_t d : distances) sum += static_cast<double>(d);
  stats.mean = sum / static_cast<double>(distances.size());
  std::vector<std::size_t> sorted = distances;
  std::sort(sorted.begin(), sorted.end());
  stats.min = sorted.front();
  stats.max = sorted.back();
  const std::size_t mid = sorted.size() / 2;
  stats.median = sorted.size() % 2 == 1
                     ? static_cast<double>(sorted[mid])
                     : (static_cast<double>(sorted[mid - 1]) + static_cast<double>(sorted[mid])) / 2.0;
  stats.histogram.bucket_width = bucket_width;
  stats.histogram.counts.assign(stats.max / bucket_width + 1, 0);
  for (std::size_t d : distances) ++stats.histogram.counts[d / bucket_width];
  return stats;
}

DiversityReport build_diversity_report(
    const std::vector<std::pair<GroupKey, std::string>>& descriptions, std::uint64_t seed,
    std::size_t member_cap, std::size_t bucket_width) {
  std::map<GroupKey, std::vector<std::string>> groups;
  for (const auto& [key, text] : descriptions) groups[key].push_back(text);
  DiversityReport report;
  report.seed = seed;
  report.member_cap = member_cap;
  for (const auto& [key, texts] : groups) {
    GroupDiversity g{key, uniqueness(texts), std::nullopt};
    if (g.uniqueness.unique >= 2) {
      g.distances = pairwise_distance_stats(texts, seed, member_cap, bucket_width);
    }
    report.groups.push_back(std::move(g));
  }
  return report;
}

nlohmann::json histogram_json(const DiversityReport& report) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : report.groups) {
    nlohmann::json j{{"mode", g.key.mode},
                     {"length", g.key.length},
                     {"character", g.key.character},
                     {"style", g.key.style}};
    if (g.distances) {
      j["bucket_width"] = g.distances->histogram.bucket_width;
      j["counts"] = g.distances->histogram.counts;
      j["pairs"] = g.distances->pairs;
      j["sampled"] = g.distances->sampled;
    } else {
      j["bucket_width"] = nullptr;
      j["counts"] = nlohmann::json::array();
      j["pairs"] = 0;
      j["sampled"] = false;
    }
    groups.push_back(std::move(j));
  }
  return {{"seed", report.seed}, {"member_cap", report.member_cap}, {"groups", groups}};
}

void emit_report(const DiversityReport& report, const std::filesystem::path& csv_path,
                 const std::filesystem::path& json_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw MetricsError("cannot write " + csv_path.string());
  csv << "mode,length,character,style,total,unique,ratio,lev_mean,lev_median,lev_min,"
         "lev_max\n";
  for (const auto& g : report.groups) {
    CsvRow row = {g.key.mode,
                  g.key.length,
                  g.key.character,
                  g.key.style,
                  std::to_string(g.uniqueness.total),
                  std::to_string(g.uniqueness.unique),
                  fmt(g.uniqueness.ratio)};
    if (g.distances) {
      row.push_back(fmt(g.distances->mean));
      row.push_back(fmt(g.distances->median));
      row.push_back(std::to_string(g.distances->min));
      row.push_back(std::to_string(g.distances->max));
    } else {
      row.insert(row.end(), 4, std::string());
    }
    csv << csv_join(row) << '\n';
  }
  if (!csv) throw MetricsError("write failed: " + csv_path.string());

  std::ofstream js(json_path);
  if (!js) throw MetricsError("cannot write " + json_path.string());
  js << histogram_json(report).dump(2) << '\n';
}

}  // namespace geoannot
