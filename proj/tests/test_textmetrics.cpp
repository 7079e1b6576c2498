// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <functional>
#include <random>

#include "doctest.h"
#include "geoannot/textmetrics.hpp"
#include "support.hpp"

using namespace geoannot;

namespace {

// Textbook recursion with memoization.
std::size_t recursive_distance(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  std::function<long(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> long {
    if (i == 0) return static_cast<long>(j);
    if (j == 0) return static_cast<long>(i);
    long& m = memo[i][j];
    if (m >= 0) return m;
    const long cost = a[i - 1] == b[j - 1] ? 0 : 1;
    m = std::min({d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + cost});
    return m;
  };
  return static_cast<std::size_t>(d(a.size(), b.size()));
}

std::u32string random_string(std::mt19937_64& rng, std::size_t max_len, char32_t alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<char32_t> ch(0, alphabet - 1);
  std::u32string s(len(rng), U'a');
  for (auto& c : s) c = U'a' + ch(rng);
  return s;
}

}  // namespace

TEST_CASE("known distances") {
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("", "") == 0);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein("flaw", "lawn") == 2);
  CHECK(levenshtein("abc", "abc") == 0);
  // code points, not bytes
  CHECK(levenshtein("café", "cafe") == 1);
  CHECK(levenshtein("日本語", "日本") == 1);
}

TEST_CASE("UTF-8 decoding") {
  CHECK(decode_utf8("aé€😀") == U"aé€😀");
  CHECK(decode_utf8("a\xff" "b") == U"a�b");
  CHECK(decode_utf8("\xc3") == U"�");
  CHECK(decode_utf8("\xc0\xaf") == U"��");  // overlong
  CHECK(decode_utf8("\xed\xa0\x80").size() == 3);     // surrogate
}

TEST_CASE("bit-parallel distance matches the recursion") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 2000; ++i) {
    const auto a = random_string(rng, 14, 3 + i % 5);
    const auto b = random_string(rng, 14, 3 + i % 5);
    CHECK(levenshtein(a, b) == recursive_distance(a, b));
  }
}

TEST_CASE("long strings cross word boundaries") {
  std::mt19937_64 rng(32);
  for (std::size_t len : {63u, 64u, 65u, 127u, 128u, 129u, 300u}) {
    for (int i = 0; i < 10; ++i) {
      std::u32string a = random_string(rng, len, 4);
      a.resize(len, U'a');
      std::u32string b = a;
      std::uniform_int_distribution<std::size_t> pos(0, len - 1);
      for (int e = 0; e < 12; ++e) b[pos(rng)] = U'x';
      b.erase(pos(rng) % b.size(), 1);
      b.insert(pos(rng) % b.size(), 1, U'y');
      CHECK(levenshtein(a, b) == recursive_distance(a, b));
      CHECK(levenshtein(std::u32string(len, U'a'), std::u32string()) == len);
    }
  }
}

TEST_CASE("uniqueness") {
  const auto u = uniqueness({"a bike", "a bike ", "another bike", " a bike"});
  CHECK(u.total == 4);
  CHECK(u.unique == 2);
  CHECK(u.ratio == 0.5);
  CHECK(uniqueness({"x", "y"}).ratio == 1.0);
  CHECK_THROWS_AS(uniqueness({}), MetricsError);
  CHECK(unique_members({"b", "a", "b "}) == std::vector<std::string>{"b", "a"});
}

TEST_CASE("pairwise statistics") {
  const auto s = pairwise_distance_stats({"abc", "abd", "xyz"}, 0);
  CHECK(s.pairs == 3);
  CHECK(s.mean == doctest::Approx(7.0 / 3.0));
  CHECK(s.median == 3.0);
  CHECK(s.min == 1);
  CHECK(s.max == 3);
  CHECK(!s.sampled);
  CHECK(s.histogram.counts == std::vector<std::size_t>{3});
  const auto even = pairwise_distance_stats({"a", "ab", "abcd", "abc"}, 0, 2000, 1);
  // distances 1,3,2,2,1,1 -> sorted 1,1,1,2,2,3
  CHECK(even.median == 1.5);
  CHECK(even.histogram.counts == std::vector<std::size_t>{0, 3, 2, 1});
  CHECK_THROWS_AS(pairwise_distance_stats({"same", "same "}, 0), MetricsError);
}

TEST_CASE("subsampling is seeded") {
  std::vector<std::string> group;
  std::mt19937_64 rng(33);
  for (int i = 0; i < 60; ++i) {
    const auto s = random_string(rng, 20, 6);
    group.emplace_back(s.begin(), s.end());
  }
  const auto a = pairwise_distance_stats(group, 5, 10);
  const auto b = pairwise_distance_stats(group, 5, 10);
  const auto c = pairwise_distance_stats(group, 6, 10);
  CHECK(a.sampled);
  CHECK(a.members == 10);
  CHECK(a.pairs == 45);
  CHECK(a.mean == b.mean);
  CHECK(a.histogram == b.histogram);
  CHECK((a.mean != c.mean || !(a.histogram == c.histogram)));
}

TEST_CASE("report files are deterministic") {
  std::vector<std::pair<GroupKey, std::string>> items;
  const GroupKey k1{"im-only", "short", "casual", "marketing-message"};
  const GroupKey k2{"txt-grounded", "long", "technical", "prompt-to-midjourney"};
  items.push_back({k2, "one, two"});
  items.push_back({k1, "alpha"});
  items.push_back({k1, "alpha"});
  items.push_back({k2, "three"});
  const auto report = build_diversity_report(items, 9);
  REQUIRE(report.groups.size() == 2);
  CHECK(report.groups[0].key == k1);
  CHECK(!report.groups[0].distances.has_value());
  CHECK(report.groups[0].uniqueness.ratio == 0.5);
  testsupport::TempDir dir("report");
  emit_report(report, dir / "a.csv", dir / "a.json");
  emit_report(build_diversity_report(items, 9), dir / "b.csv", dir / "b.json");
  CHECK(testsupport::read_file(dir / "a.csv") == testsupport::read_file(dir / "b.csv"));
  CHECK(testsupport::read_file(dir / "a.json") == testsupport::read_file(dir / "b.json"));
  CHECK(testsupport::read_file(dir / "a.csv") ==
        "mode,length,character,style,total,unique,ratio,lev_mean,lev_median,lev_min,lev_max\n"
        "im-only,short,casual,marketing-message,2,1,0.500000,,,,\n"
        "txt-grounded,long,technical,prompt-to-midjourney,2,2,1.000000,8.000000,8.000000,8,8\n");
  const auto j = nlohmann::json::parse(testsupport::read_file(dir / "a.json"));
  CHECK(j["seed"] == 9);
  CHECK(j["groups"][1]["counts"] == nlohmann::json::array({0, 1}));
}
