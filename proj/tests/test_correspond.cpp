// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "geoannot/correspond.hpp"
#include "geoannot/geometry.hpp"
#include "support.hpp"

using namespace geoannot;
using testsupport::TempDir;

namespace {

// Map whose annotated pixels hold pairwise-distinct one-hot descriptors and
// whose other pixels are zero.
std::pair<KeypointAnnotation, FeatureMap> one_hot_source(std::size_t h, std::size_t w,
                                                         const std::vector<Keypoint>& pts) {
  std::vector<float> d(pts.size() * h * w, 0.0f);
  for (std::size_t k = 0; k < pts.size(); ++k) d[(k * h + pts[k].y) * w + pts[k].x] = 1.0f;
  return {KeypointAnnotation{"self", pts}, FeatureMap(pts.size(), h, w, std::move(d))};
}

}  // namespace

TEST_CASE("descriptor gather and similarity on a hand-checked example") {
  // 2 channels on a 2x2 grid: pixels (0,0)=(1,0) (1,0)=(0,1) (0,1)=(1,1) (1,1)=(0,0)
  FeatureMap m(2, 2, 2, {1, 0, 1, 0, 0, 1, 1, 0});
  const auto flat = flatten_normalize(m);
  const KeypointAnnotation a{"a", {{"p", 1, 0}}};
  const auto v = extract_point_descriptors(flat, a);
  REQUIRE(v.rows == 1);
  CHECK(v.row(0)[0] == 0.0f);
  CHECK(v.row(0)[1] == 1.0f);
  const auto s = similarity(v, flat);
  CHECK(s.cols == 4);
  CHECK(s.row(0)[0] == 0.0f);
  CHECK(s.row(0)[1] == 1.0f);
  CHECK(s.row(0)[2] == doctest::Approx(std::sqrt(0.5)));
  CHECK(s.row(0)[3] == 0.0f);
  const auto best = best_per_point(s, 2);
  CHECK(best[0] == PointMatch{1.0f, 1, 0});
}

TEST_CASE("out-of-bounds keypoint names the point") {
  FeatureMap m(1, 2, 2, {1, 1, 1, 1});
  const auto flat = flatten_normalize(m);
  try {
    extract_point_descriptors(flat, KeypointAnnotation{"img", {{"BB", 2, 0}}});
    FAIL("expected an error");
  } catch (const CorrespondenceError& e) {
    CHECK(std::string(e.what()).find("BB") != std::string::npos);
  }
}

TEST_CASE("ties resolve to the lowest flat index") {
  // every pixel identical: all scores tie
  FeatureMap m(2, 3, 3, std::vector<float>(18, 1.0f));
  const auto bank = SourceBank::build({{KeypointAnnotation{"s", {{"p", 2, 2}}}, m}}, 3, 3);
  const auto r = predict(bank, flatten_normalize(m));
  CHECK(r.points[0].x == 0);
  CHECK(r.points[0].y == 0);
}

TEST_CASE("cross-source ties keep the earliest source") {
  FeatureMap m(1, 2, 2, {1, 1, 1, 1});
  const KeypointAnnotation a{"a", {{"p", 0, 0}}};
  const KeypointAnnotation b{"b", {{"p", 1, 1}}};
  const auto bank = SourceBank::build({{a, m}, {b, m}}, 2, 2);
  CHECK(predict(bank, flatten_normalize(m)).points[0].source_index == 0);
}

TEST_CASE("predict agrees with the triple-loop oracle") {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 60; ++iter) {
    const auto inst = testsupport::random_instance(rng);
    const auto bank = SourceBank::build(inst.sources, inst.height, inst.width);
    const auto got = predict(bank, flatten_normalize(inst.target));
    const auto want = testsupport::oracle_predict(inst.sources, inst.target);
    REQUIRE(got.points.size() == want.points.size());
    for (std::size_t k = 0; k < got.points.size(); ++k) {
      CHECK(got.points[k].x == want.points[k].x);
      CHECK(got.points[k].y == want.points[k].y);
      CHECK(got.points[k].source_index == want.points[k].source);
      CHECK(got.points[k].score == doctest::Approx(want.points[k].score).epsilon(1e-5));
    }
  }
}

TEST_CASE("predict and the explicit similarity matrix agree") {
  std::mt19937_64 rng(12);
  for (int iter = 0; iter < 20; ++iter) {
    testsupport::InstanceLimits lim;
    lim.max_sources = 1;
    const auto inst = testsupport::random_instance(rng, lim);
    const auto bank = SourceBank::build(inst.sources, inst.height, inst.width);
    const auto target = flatten_normalize(inst.target);
    const auto via_s = best_per_point(similarity(bank.sources()[0].descriptors, target),
                                      inst.width);
    const auto direct = predict(bank, target);
    for (std::size_t k = 0; k < via_s.size(); ++k) {
      CHECK(via_s[k].x == direct.points[k].x);
      CHECK(via_s[k].y == direct.points[k].y);
      CHECK(via_s[k].score == direct.points[k].score);
    }
  }
}

TEST_CASE("self-correspondence recovers the annotation") {
  const std::vector<Keypoint> pts = {{"RWC", 1, 6}, {"FWC", 9, 6}, {"BB", 5, 5}, {"ST", 4, 1}};
  const auto [ann, map] = one_hot_source(8, 11, pts);
  const auto bank = SourceBank::build({{ann, map}}, 8, 11);
  const auto r = predict(bank, flatten_normalize(map));
  std::vector<LabeledPoint> pred, truth;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    CHECK(r.points[k].x == pts[k].x);
    CHECK(r.points[k].y == pts[k].y);
    CHECK(r.points[k].score == doctest::Approx(1.0).epsilon(1e-5));
    pred.push_back({r.points[k].id, double(r.points[k].x), double(r.points[k].y)});
    truth.push_back({pts[k].id, double(pts[k].x), double(pts[k].y)});
  }
  const auto e = evaluate_predictions(pred, truth);
  CHECK(e.mae == 0.0);
  CHECK(e.mse == 0.0);
}

TEST_CASE("more sources never lower a point's score") {
  std::mt19937_64 rng(13);
  testsupport::InstanceLimits lim;
  lim.min_sources = 8;
  lim.max_sources = 8;
  for (int iter = 0; iter < 20; ++iter) {
    const auto inst = testsupport::random_instance(rng, lim, 0.0);
    const auto bank = SourceBank::build(inst.sources, inst.height, inst.width);
    const auto target = flatten_normalize(inst.target);
    auto prev = predict(bank.prefix(1), target);
    for (std::size_t k = 2; k <= 8; ++k) {
      const auto next = predict(bank.prefix(k), target);
      for (std::size_t p = 0; p < next.points.size(); ++p) {
        CHECK(next.points[p].score >= prev.points[p].score);
      }
      prev = next;
    }
  }
}

TEST_CASE("bank validation") {
  FeatureMap m(1, 2, 2, {1, 2, 3, 4});
  const KeypointAnnotation a{"a", {{"p", 0, 0}, {"q", 1, 1}}};
  const KeypointAnnotation reordered{"b", {{"q", 0, 0}, {"p", 1, 1}}};
  const KeypointAnnotation fewer{"c", {{"p", 0, 0}}};
  const KeypointAnnotation dup{"d", {{"p", 0, 0}, {"p", 1, 1}}};
  CHECK_THROWS_AS(SourceBank::build({{a, m}, {reordered, m}}, 2, 2), CorrespondenceError);
  CHECK_THROWS_AS(SourceBank::build({{a, m}, {fewer, m}}, 2, 2), CorrespondenceError);
  CHECK_THROWS_AS(SourceBank::build({{dup, m}}, 2, 2), CorrespondenceError);
  CHECK_THROWS_AS(SourceBank::build({}, 2, 2), CorrespondenceError);
  FeatureMap two(2, 2, 2, {1, 2, 3, 4, 5, 6, 7, 8});
  CHECK_THROWS_AS(SourceBank::build({{a, m}, {a, two}}, 2, 2), CorrespondenceError);
  const auto bank = SourceBank::build({{a, m}}, 2, 2);
  CHECK_THROWS_AS(predict(bank, flatten_normalize(two)), CorrespondenceError);
  CHECK_THROWS_AS(bank.prefix(2), CorrespondenceError);
}

TEST_CASE("sources are resampled to the bank resolution") {
  std::mt19937_64 rng(14);
  const auto small = testsupport::random_map(rng, 3, 4, 4);
  // a point annotated at bank resolution 7x7
  const auto bank = SourceBank::build({{KeypointAnnotation{"s", {{"p", 6, 3}}}, small}}, 7, 7);
  CHECK(bank.image_height() == 7);
  const auto up = prepare(small, 7, 7);
  const auto row = up.row(up.index_of(6, 3));
  for (std::size_t c = 0; c < 3; ++c) CHECK(bank.sources()[0].descriptors.row(0)[c] == row[c]);
}

TEST_CASE("annotate_dataset keeps input order and isolates failures") {
  TempDir dir("annotate");
  std::mt19937_64 rng(15);
  const auto src = testsupport::random_map(rng, 4, 6, 6);
  const auto bank = SourceBank::build(
      {{KeypointAnnotation{"s", {{"p", 1, 2}, {"q", 4, 4}}}, src}}, 6, 6);
  std::vector<TargetRef> targets;
  for (int i = 0; i < 40; ++i) {
    const std::string id = "t" + std::to_string(i);
    const auto p = dir / (id + ".gbfm");
    if (i % 9 != 4) save_feature_map(testsupport::random_map(rng, 4, 5, 5), p);
    targets.push_back({id, p});
  }
  const auto sequential = annotate_dataset(bank, targets, 1);
  for (std::size_t workers : {2u, 3u, 8u}) {
    const auto parallel = annotate_dataset(bank, targets, workers);
    REQUIRE(parallel.size() == targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
      CHECK(parallel[i].image_id == targets[i].image_id);
      CHECK(parallel[i].result == sequential[i].result);
    }
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    CHECK(sequential[i].result.has_value() == (i % 9 != 4));
    if (!sequential[i].result) CHECK(!sequential[i].error.empty());
  }
}

TEST_CASE("a throwing sink stops the run") {
  TempDir dir("sink");
  std::mt19937_64 rng(16);
  const auto src = testsupport::random_map(rng, 2, 4, 4);
  const auto bank = SourceBank::build({{KeypointAnnotation{"s", {{"p", 1, 1}}}, src}}, 4, 4);
  std::vector<TargetRef> targets;
  for (int i = 0; i < 30; ++i) targets.push_back({"x" + std::to_string(i), dir / "missing"});
  int seen = 0;
  CHECK_THROWS(annotate_dataset(bank, targets, 4, [&](AnnotationOutcome) {
    if (++seen == 3) throw std::runtime_error("stop");
  }));
  CHECK(seen == 3);
}

TEST_CASE("bank manifest and outcome JSON") {
  TempDir dir("manifest");
  std::mt19937_64 rng(17);
  save_feature_map(testsupport::random_map(rng, 2, 3, 3), dir / "a.gbfm");
  testsupport::write_file(dir / "bank.json", R"({"height": 3, "width": 3, "sources": [
    {"image_id": "a", "feature_map_path": "a.gbfm",
     "points": [{"id": "BB", "x_px": 2, "y_px": 1}]}]})");
  const auto m = load_bank_manifest(dir / "bank.json");
  CHECK(m.height == 3u);
  CHECK(m.sources[0].second == dir / "a.gbfm");
  const auto bank = load_source_bank(m, 256, 256);
  CHECK(bank.image_width() == 3);
  CHECK(bank.point_ids() == std::vector<std::string>{"BB"});

  testsupport::write_file(dir / "list.json", R"([{"image_id": "a",
    "feature_map_path": "a.gbfm", "points": [{"id": "BB", "x_px": 0, "y_px": 0}]}])");
  CHECK(!load_bank_manifest(dir / "list.json").height.has_value());
  testsupport::write_file(dir / "bad.json", "{");
  CHECK_THROWS_AS(load_bank_manifest(dir / "bad.json"), CorrespondenceError);

  AnnotationOutcome ok{"img", PredictionResult{{{"BB", 3, 4, 0.5f, 1}}}, {}};
  CHECK(annotation_outcome_from_json(to_json(ok)).result == ok.result);
  AnnotationOutcome bad{"img", std::nullopt, "boom"};
  const auto j = to_json(bad);
  CHECK(j.at("error") == "boom");
  CHECK(!annotation_outcome_from_json(j).result.has_value());
}
