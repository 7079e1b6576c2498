// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fixtures and independent oracles shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "geoannot/correspond.hpp"
#include "geoannot/featmap.hpp"

namespace testsupport {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("geoannot-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline geoannot::FeatureMap random_map(std::mt19937_64& rng, std::size_t c, std::size_t h,
                                       std::size_t w, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> data(c * h * w);
  for (auto& v : data) v = u(rng);
  return geoannot::FeatureMap(c, h, w, std::move(data));
}

inline geoannot::FeatureMap scaled(const geoannot::FeatureMap& m, float s) {
  std::vector<float> data(m.data().begin(), m.data().end());
  for (auto& v : data) v *= s;
  return geoannot::FeatureMap(m.channels(), m.height(), m.width(), std::move(data));
}

// Raw parameter table with the 14 required columns plus extent_mm; row i
// gets seat tube length 300 + 60 i and distinct tube diameters.
inline std::string parameter_table(std::size_t rows, const std::string& prefix = "bike") {
  std::string csv =
      "image_id,style,rim_front,rim_rear,fork_type,bottle_seat_tube,bottle_down_tube,"
      "wheel_diam_front_mm,wheel_diam_rear_mm,seat_d_mm,down_d_mm,head_d_mm,top_d_mm,"
      "seat_tube_len_mm,extent_mm\n";
  const char* styles[] = {"ROAD", "MTB", "GRAVEL", "CITY"};
  const char* rims[] = {"spoked", "tri-spoked", "disked"};
  const char* forks[] = {"rigid", "suspension", "single-sided"};
  for (std::size_t i = 0; i < rows; ++i) {
    csv += prefix + std::to_string(i) + "," + styles[i % 4] + "," + rims[i % 3] + "," +
           rims[(i + 1) % 3] + "," + forks[i % 3] + "," + (i % 2 ? "true" : "false") + "," +
           (i % 3 ? "true" : "false") + "," + std::to_string(600 + 10 * i) + "," +
           std::to_string(610 + 10 * i) + "," + std::to_string(28 + i) + "," +
           std::to_string(33 + 2 * i) + "," + std::to_string(40 + i) + "," +
           std::to_string(30 + 3 * (i % 3)) + "," + std::to_string(300 + 60 * i) + "," +
           std::to_string(1800 + 100 * i) + "\n";
  }
  return csv;
}

// ---------------------------------------------------------------- oracle

// Unit-normalized pixel vectors in double precision, index y * W + x.
inline std::vector<std::vector<double>> oracle_normalize(const geoannot::FeatureMap& m) {
  const std::size_t hw = m.height() * m.width();
  std::vector<std::vector<double>> rows(hw, std::vector<double>(m.channels(), 0.0));
  for (std::size_t y = 0; y < m.height(); ++y) {
    for (std::size_t x = 0; x < m.width(); ++x) {
      auto& r = rows[y * m.width() + x];
      double ss = 0.0;
      for (std::size_t c = 0; c < m.channels(); ++c) {
        r[c] = m.at(c, y, x);
        ss += r[c] * r[c];
      }
      const double n = std::sqrt(ss);
      if (n > 0.0) {
        for (auto& v : r) v /= n;
      }
    }
  }
  return rows;
}

struct OraclePoint {
  std::size_t x = 0;
  std::size_t y = 0;
  double score = 0.0;
  std::size_t source = 0;
};

struct OracleResult {
  std::vector<OraclePoint> points;
  // Smallest gap between a winning score and the runner-up, over every
  // per-source row argmax and every cross-source max.
  double min_gap = std::numeric_limits<double>::infinity();
};

// Gather, full similarity matrix, row argmax and cross-source max, written as
// plain loops over all sources, points, pixels and channels.
inline OracleResult oracle_predict(
    const std::vector<std::pair<geoannot::KeypointAnnotation, geoannot::FeatureMap>>& sources,
    const geoannot::FeatureMap& target) {
  const auto f = oracle_normalize(target);
  const std::size_t w = target.width();
  const std::size_t n = sources.front().first.points.size();
  OracleResult out;
  out.points.assign(n, OraclePoint{0, 0, -std::numeric_limits<double>::infinity(), 0});
  std::vector<std::vector<double>> best_by_source(n);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto src = oracle_normalize(sources[i].second);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& kp = sources[i].first.points[k];
      const auto& v = src[kp.y * sources[i].second.width() + kp.x];
      double best = -std::numeric_limits<double>::infinity();
      double second = -std::numeric_limits<double>::infinity();
      std::size_t best_idx = 0;
      for (std::size_t p = 0; p < f.size(); ++p) {
        double s = 0.0;
        for (std::size_t c = 0; c < v.size(); ++c) s += v[c] * f[p][c];
        if (s > best) {
          second = best;
          best = s;
          best_idx = p;
        } else if (s > second) {
          second = s;
        }
      }
      if (f.size() > 1) out.min_gap = std::min(out.min_gap, best - second);
      best_by_source[k].push_back(best);
      if (best > out.points[k].score) {
        out.points[k] = {best_idx % w, best_idx / w, best, i};
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < best_by_source[k].size(); ++i) {
      if (i != out.points[k].source) {
        out.min_gap = std::min(out.min_gap, out.points[k].score - best_by_source[k][i]);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- instances

struct Instance {
  std::vector<std::pair<geoannot::KeypointAnnotation, geoannot::FeatureMap>> sources;
  geoannot::FeatureMap target;
  std::size_t height;
  std::size_t width;
};

struct InstanceLimits {
  std::size_t max_channels = 8;
  std::size_t max_side = 16;
  std::size_t max_points = 12;
  std::size_t min_sources = 1;
  std::size_t max_sources = 4;
};

// Random bank plus target whose oracle maxima are separated by more than
// `min_gap`, so float and double arithmetic agree on every argmax.
inline Instance random_instance(std::mt19937_64& rng, const InstanceLimits& lim = {},
                                double min_gap = 1e-4) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  while (true) {
    const std::size_t c = pick(1, lim.max_channels);
    const std::size_t h = pick(2, lim.max_side);
    const std::size_t w = pick(2, lim.max_side);
    const std::size_t n = pick(1, lim.max_points);
    const std::size_t s = pick(lim.min_sources, lim.max_sources);
    Instance inst{{}, random_map(rng, c, h, w), h, w};
    for (std::size_t i = 0; i < s; ++i) {
      geoannot::KeypointAnnotation a;
      a.image_id = "src" + std::to_string(i);
      for (std::size_t k = 0; k < n; ++k) {
        a.points.push_back({"p" + std::to_string(k), pick(0, w - 1), pick(0, h - 1)});
      }
      inst.sources.emplace_back(std::move(a), random_map(rng, c, h, w));
    }
    if (oracle_predict(inst.sources, inst.target).min_gap > min_gap) return inst;
  }
}

}  // namespace testsupport
