// SPDX-License-Identifier: Apache-2.0
#include "geoannot/correspond.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "geoannot/kernels.hpp"

namespace geoannot {

PointDescriptorMatrix extract_point_descriptors(const FlatFeatureMap& flat,
                                                const KeypointAnnotation& annotation) {
  if (annotation.points.empty()) {
    throw CorrespondenceError("annotation " + annotation.image_id + " has no points");
  }
  PointDescriptorMatrix v;
  v.rows = annotation.points.size();
  v.channels = flat.channels();
  v.data.reserve(v.rows * v.channels);
  for (const Keypoint& p : annotation.points) {
    if (p.x >= flat.source_width() || p.y >= flat.source_height()) {
      throw CorrespondenceError("keypoint " + p.id + " of " + annotation.image_id +
                                " at (" + std::to_string(p.x) + ", " +
                                std::to_string(p.y) + ") is outside the " +
                                std::to_string(flat.source_width()) + "x" +
                                std::to_string(flat.source_height()) + " image");
    }
    const auto row = flat.row(flat.index_of(p.x, p.y));
    v.data.insert(v.data.end(), row.begin(), row.end());
  }
  return v;
}

SimilarityMatrix similarity(const PointDescriptorMatrix& v,
                            const FlatFeatureMap& target) {
  if (v.channels != target.channels()) {
    throw CorrespondenceError("channel mismatch: descriptors have " +
                              std::to_string(v.channels) + ", target has " +
                              std::to_string(target.channels()));
  }
  SimilarityMatrix s;
  s.rows = v.rows;
  s.cols = target.rows();
  s.data.resize(s.rows * s.cols);
  const auto& k = kernels::active();
  for (std::size_t r = 0; r < v.rows; ++r) {
    k.dot_rows(v.row(r).data(), target.data().data(), s.cols, v.channels,
               s.data.data() + r * s.cols);
  }
  return s;
}

std::vector<PointMatch> best_per_point(const SimilarityMatrix& s,
                                       std::size_t target_width) {
  if (s.rows == 0 || s.cols == 0) throw CorrespondenceError("empty similarity matrix");
  if (target_width == 0 || s.cols % target_width != 0) {
    throw CorrespondenceError("target width " + std::to_string(target_width) +
                              " does not divide " + std::to_string(s.cols) + " columns");
  }
  const auto& k = kernels::active();
  std::vector<PointMatch> out;
  out.reserve(s.rows);
  for (std::size_t r = 0; r < s.rows; ++r) {
    const kernels::ScoredIndex best = k.argmax(s.row(r).data(), s.cols);
    out.push_back({best.score, best.index % target_width, best.index / target_width});
  }
  return out;
}

SourceBank::SourceBank(std::vector<Source> sources, std::size_t height,
                       std::size_t width)
    : sources_(std::move(sources)), height_(height), width_(width) {
  if (sources_.empty()) throw CorrespondenceError("source bank is empty");
  if (height_ == 0 || width_ == 0) {
    throw CorrespondenceError("bank resolution must be positive");
  }
  const Source& first = sources_.front();
  point_count_ = first.descriptors.rows;
  channels_ = first.descriptors.channels;
  for (const Keypoint& p : first.annotation.points) point_ids_.push_back(p.id);
  if (std::set<std::string>(point_ids_.begin(), point_ids_.end()).size() !=
      point_ids_.size()) {
    throw CorrespondenceError("duplicate point ids in " + first.annotation.image_id);
  }
  for (const Source& s : sources_) {
    const auto& d = s.descriptors;
    if (d.rows != point_count_ || d.channels != channels_ ||
        d.data.size() != d.rows * d.channels || d.rows == 0) {
      throw CorrespondenceError("descriptor shape of " + s.annotation.image_id +
                                " differs from the rest of the bank");
    }
    if (s.annotation.points.size() != point_ids_.size()) {
      throw CorrespondenceError("point list of " + s.annotation.image_id +
                                " differs from " + first.annotation.image_id);
    }
    for (std::size_t k = 0; k < point_ids_.size(); ++k) {
      const Keypoint& p = s.annotation.points[k];
      if (p.id != point_ids_[k]) {
        throw CorrespondenceError("point ids of " + s.annotation.image_id +
                                  " are not consistent with " +
                                  first.annotation.image_id);
      }
      if (p.x >= width_ || p.y >= height_) {
        throw CorrespondenceError("keypoint " + p.id + " of " + s.annotation.image_id +
                                  " is outside the bank resolution");
      }
    }
  }
}

SourceBank SourceBank::build(
    const std::vector<std::pair<KeypointAnnotation, FeatureMap>>& annotated,
    std::size_t height, std::size_t width) {
  std::vector<Source> sources;
  sources.reserve(annotated.size());
  for (const auto& [annotation, map] : annotated) {
    const FlatFeatureMap flat = prepare(map, height, width);
    sources.push_back({annotation, extract_point_descriptors(flat, annotation)});
  }
  return SourceBank(std::move(sources), height, width);
}

SourceBank SourceBank::prefix(std::size_t count) const {
  if (count == 0 || count > sources_.size()) {
    throw CorrespondenceError("invalid bank prefix size");
  }
  return SourceBank(std::vector<Source>(sources_.begin(), sources_.begin() + count),
                    height_, width_);
}

PredictionResult predict(const SourceBank& bank, const FlatFeatureMap& target) {
  if (bank.channels() != target.channels()) {
    throw CorrespondenceError("channel mismatch: bank has " +
                              std::to_string(bank.channels()) + ", target has " +
                              std::to_string(target.channels()));
  }
  const auto& k = kernels::active();
  const std::size_t width = target.source_width();
  PredictionResult result;
  result.points.resize(bank.point_count());
  // The similarity matrix is never materialized: each row is reduced to its
  // maximum as it is produced.
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const PointDescriptorMatrix& v = bank.sources()[i].descriptors;
    for (std::size_t p = 0; p < v.rows; ++p) {
      const kernels::ScoredIndex best =
          k.best_dot(v.row(p).data(), target.data().data(), target.rows(), v.channels);
      PredictedPoint& out = result.points[p];
      if (i == 0 || best.score > out.score) {
        out = {bank.point_ids()[p], best.index % width, best.index / width, best.score, i};
      }
    }
  }
  return result;
}

namespace {

AnnotationOutcome annotate_one(const SourceBank& bank, const TargetRef& target) {
  AnnotationOutcome outcome{target.image_id, std::nullopt, {}};
  try {
    const FeatureMap map = load_feature_map(target.feature_map_path);
    outcome.result =
        predict(bank, prepare(map, bank.image_height(), bank.image_width()));
  } catch (const std::exception& e) {
    outcome.error = e.what();
  }
  return outcome;
}

}  // namespace

void annotate_dataset(const SourceBank& bank, const std::vector<TargetRef>& targets,
                      std::size_t workers,
                      const std::function<void(AnnotationOutcome)>& sink) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(targets.size(), 1));
  if (workers <= 1) {
    for (const TargetRef& t : targets) sink(annotate_one(bank, t));
    return;
  }

  // Workers claim indices in order; results wait in a bounded window until
  // everything before them has been emitted.
  const std::size_t window = 4 * workers;
  std::mutex mu;
  std::condition_variable cv;
  std::size_t next = 0;
  std::size_t emitted = 0;
  bool aborted = false;
  std::deque<std::optional<AnnotationOutcome>> pending;  // index emitted + i

  auto work = [&] {
    for (;;) {
      std::size_t idx;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] {
          return aborted || next >= targets.size() || next < emitted + window;
        });
        if (aborted || next >= targets.size()) return;
        idx = next++;
      }
      AnnotationOutcome outcome = annotate_one(bank, targets[idx]);
      {
        std::lock_guard lock(mu);
        const std::size_t slot = idx - emitted;
        if (pending.size() <= slot) pending.resize(slot + 1);
        pending[slot] = std::move(outcome);
      }
      cv.notify_all();
    }
  };

  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);

  while (emitted < targets.size()) {
    AnnotationOutcome ready;
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return !pending.empty() && pending.front().has_value(); });
      ready = std::move(*pending.front());
      pending.pop_front();
      ++emitted;
    }
    cv.notify_all();
    try {
      sink(std::move(ready));
    } catch (...) {
      {
        std::lock_guard lock(mu);
        aborted = true;
      }
      cv.notify_all();
      throw;
    }
  }
}

std::vector<AnnotationOutcome> annotate_dataset(const SourceBank& bank,
                                                const std::vector<TargetRef>& targets,
                                                std::size_t workers) {
  std::vector<AnnotationOutcome> out;
  out.reserve(targets.size());
  annotate_dataset(bank, targets, workers,
                   [&](AnnotationOutcome o) { out.push_back(std::move(o)); });
  return out;
}

namespace {

KeypointAnnotation annotation_from_json(const nlohmann::json& j) {
  KeypointAnnotation a;
  a.image_id = j.at("image_id").get<std::string>();
  for (const auto& p : j.at("points")) {
    const long x = p.at("x_px").get<long>();
    const long y = p.at("y_px").get<long>();
    if (x < 0 || y < 0) {
      throw CorrespondenceError("keypoint " + p.at("id").get<std::string>() + " of " +
                                a.image_id + " has negative coordinates");
    }
    a.points.push_back({p.at("id").get<std::string>(), static_cast<std::size_t>(x),
                        static_cast<std::size_t>(y)});
  }
  return a;
}

}  // namespace

BankManifest load_bank_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorrespondenceError("cannot open bank manifest " + path.string());
  BankManifest m;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    const nlohmann::json* entries = &j;
    if (j.is_object()) {
      if (j.contains("height")) m.height = j.at("height").get<std::size_t>();
      if (j.contains("width")) m.width = j.at("width").get<std::size_t>();
      entries = &j.at("sources");
    }
    if (!entries->is_array()) {
      throw CorrespondenceError("bank manifest must list sources");
    }
    for (const auto& e : *entries) {
      std::filesystem::path fp = e.at("feature_map_path").get<std::string>();
      if (fp.is_relative()) fp = path.parent_path() / fp;
      m.sources.emplace_back(annotation_from_json(e), fp);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorrespondenceError("malformed bank manifest " + path.string() + ": " + e.what());
  }
  if (m.sources.empty()) throw CorrespondenceError("bank manifest has no sources");
  return m;
}

SourceBank load_source_bank(const BankManifest& manifest, std::size_t default_height,
                            std::size_t default_width) {
  std::vector<std::pair<KeypointAnnotation, FeatureMap>> annotated;
  for (const auto& [annotation, fp] : manifest.sources) {
    annotated.emplace_back(annotation, load_feature_map(fp));
  }
  return SourceBank::build(annotated, manifest.height.value_or(default_height),
                           manifest.width.value_or(default_width));
}

nlohmann::json to_json(const AnnotationOutcome& outcome) {
  nlohmann::json j{{"image_id", outcome.image_id}};
  if (!outcome.result) {
    j["error"] = outcome.error;
    return j;
  }
  nlohmann::json pts = nlohmann::json::array();
  for (const PredictedPoint& p : outcome.result->points) {
    pts.push_back({{"id", p.id},
                   {"x_px", p.x},
                   {"y_px", p.y},
                   {"score", p.score},
                   {"source", p.source_index}});
  }
  j["points"] = std::move(pts);
  return j;
}

AnnotationOutcome annotation_outcome_from_json(const nlohmann::json& j) {
  AnnotationOutcome o;
  o.image_id = j.at("image_id").get<std::string>();
  if (j.contains("error")) {
    o.error = j.at("error").get<std::string>();
    return o;
  }
  PredictionResult r;
  for (const auto& p : j.at("points")) {
    r.points.push_back({p.at("id").get<std::string>(), p.at("x_px").get<std::size_t>(),
                        p.at("y_px").get<std::size_t>(), p.at("score").get<float>(),
                        p.at("source").get<std::size_t>()});
  }
  o.result = std::move(r);
  return o;
}

}  // namespace geoannot
