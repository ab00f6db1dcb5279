#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rps/mapping.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

using namespace rps;

namespace {

MappingSpec make_spec(MappingKind kind, std::uint64_t n, std::uint64_t m,
                      std::uint64_t seed = 1) {
  MappingSpec spec;
  spec.kind = kind;
  spec.n = n;
  spec.m = m;
  spec.seed = HashSeed{seed};
  return spec;
}

} // namespace

TEST_CASE("fold with fixed partition offsets reproduces a hand computation") {
  // n = 10, m = 4, offsets (1, 3, 0): partitions of four consecutive
  // indices walk the buckets cyclically from their offset.
  const Mapping mapping = Mapping::with_partition_offsets(10, 4, {1, 3, 0}, HashSeed{1});
  const std::vector<std::uint64_t> expected = {1, 2, 3, 0, 3, 0, 1, 2, 0, 1};
  for (std::uint64_t i = 0; i < 10; ++i) CHECK_EQ(mapping.bucket(i), expected[i]);

  const LoadReport report = load_report(mapping);
  CHECK_EQ(report.loads, std::vector<std::uint64_t>{3, 3, 2, 2});
  CHECK_EQ(report.max_load, 3);
  CHECK_EQ(report.min_load, 2);
  CHECK_FALSE(mapping.spec_backed());
}

TEST_CASE("fold and chunk-offset formulas match hand values") {
  CHECK_EQ(stable_fold(1, 0, 4), 1);
  CHECK_EQ(stable_fold(3, 7, 4), 2);
  CHECK_EQ(stable_fold(0, 9, 4), 1);
  CHECK_EQ(roast_bucket(3, 0, 5), 3);
  CHECK_EQ(roast_bucket(3, 1, 5), 4);
  CHECK_EQ(roast_bucket(3, 2, 5), 0);
  CHECK_EQ(roast_bucket(3, 3, 5), 1);
}

TEST_CASE("fold mapping has provably balanced loads for any seed") {
  for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
    for (auto [n, m] : std::vector<std::pair<std::uint64_t, std::uint64_t>>{
             {10, 4}, {1000, 10}, {1000, 7}, {64, 64}, {5, 8}, {1, 1}}) {
      for (MappingKind kind : {MappingKind::StableRps, MappingKind::StableRpsPermuted}) {
        const Mapping mapping(make_spec(kind, n, m, seed));
        const LoadReport report = load_report(mapping);
        CHECK_EQ(report.max_load, (n + m - 1) / m);
        CHECK_EQ(report.min_load, n / m);
        CHECK_EQ(std::accumulate(report.loads.begin(), report.loads.end(),
                                 std::uint64_t{0}),
                 n);
      }
    }
  }
}

TEST_CASE("hashed mapping loads sum to n but are not balanced in general") {
  const Mapping mapping(make_spec(MappingKind::ElementWise, 1000, 10, 5));
  const LoadReport report = load_report(mapping);
  CHECK_EQ(std::accumulate(report.loads.begin(), report.loads.end(), std::uint64_t{0}),
           1000);
  CHECK_GE(report.max_load, 100);
  CHECK_LE(report.min_load, 100);
}

TEST_CASE("permuted fold relabels indices through a bijection") {
  const Mapping plain(make_spec(MappingKind::StableRps, 64, 8, 3));
  const Mapping permuted(make_spec(MappingKind::StableRpsPermuted, 64, 8, 3));
  // Same multiset of buckets (a bijection preserves loads)...
  CHECK_EQ(load_report(plain).loads, load_report(permuted).loads);
  // ...but not the same order.
  bool differs = false;
  for (std::uint64_t i = 0; i < 64; ++i)
    if (plain.bucket(i) != permuted.bucket(i)) differs = true;
  CHECK(differs);
  // Two seeds give different permutations, same seed replays.
  const Mapping again(make_spec(MappingKind::StableRpsPermuted, 64, 8, 3));
  const Mapping other(make_spec(MappingKind::StableRpsPermuted, 64, 8, 4));
  bool same = true, any_diff = false;
  for (std::uint64_t i = 0; i < 64; ++i) {
    if (permuted.bucket(i) != again.bucket(i)) same = false;
    if (permuted.bucket(i) != other.bucket(i)) any_diff = true;
  }
  CHECK(same);
  CHECK(any_diff);
}

TEST_CASE("chunked mappings keep consecutive indices in consecutive buckets") {
  MappingSpec robe = make_spec(MappingKind::RobeZ, 20, 7, 2);
  robe.robe_chunk = 3;
  const Mapping robe_map(robe);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::uint64_t within = i % 3;
    if (within > 0) CHECK_EQ(robe_map.bucket(i), (robe_map.bucket(i - within) + within) % 7);
  }

  MappingSpec roast = make_spec(MappingKind::RoastChunked, 7, 6, 2);
  roast.chunks = {{5, 4}, {9, 3}};
  const Mapping roast_map(roast);
  for (std::uint64_t o = 1; o < 4; ++o)
    CHECK_EQ(roast_map.bucket(o), (roast_map.bucket(0) + o) % 6);
  for (std::uint64_t o = 1; o < 3; ++o)
    CHECK_EQ(roast_map.bucket(4 + o), (roast_map.bucket(4) + o) % 6);
}

TEST_CASE("explicit tables echo their contents") {
  const Mapping mapping = Mapping::from_table(8, {0, 1, 6, 7}, {1, -1, 1, 1});
  CHECK_EQ(mapping.n(), 4);
  CHECK_EQ(mapping.m(), 8);
  CHECK_EQ(mapping.bucket(2), 6);
  CHECK_EQ(mapping.sign(1), -1);
  CHECK_EQ(mapping.sign(3), 1);
  CHECK_FALSE(mapping.spec_backed());
}

TEST_CASE("signs are reproducible and two-valued") {
  const Mapping mapping(make_spec(MappingKind::StableRps, 100, 10, 7));
  const Mapping again(make_spec(MappingKind::StableRps, 100, 10, 7));
  int plus = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const int s = mapping.sign(i);
    CHECK((s == 1 || s == -1));
    CHECK_EQ(s, again.sign(i));
    if (s == 1) ++plus;
  }
  CHECK_GT(plus, 20);
  CHECK_LT(plus, 80);
}

TEST_CASE("cache fetch counts match hand-worked line sets") {
  const Mapping table = Mapping::from_table(8, {0, 1, 6, 7}, {1, 1, 1, 1});
  CHECK_EQ(cache_fetches(table, 0, 4, 4), 2); // lines {0, 1}
  CHECK_EQ(cache_fetches(table, 0, 4, 8), 1);
  CHECK_EQ(cache_fetches(table, 1, 2, 4), 2); // buckets {1, 6}
  CHECK_EQ(cache_fetches(table, 2, 2, 4), 1); // buckets {6, 7}, line 1

  const Mapping offsets = Mapping::with_partition_offsets(8, 4, {2, 1}, HashSeed{1});
  CHECK_EQ(cache_fetches(offsets, 0, 4, 2), 2); // buckets {2,3,0,1}: lines {1, 0}
  CHECK_EQ(cache_fetches(offsets, 2, 4, 2), 2); // buckets {0,1,1,2}: lines {0, 1}
}

TEST_CASE("fold mapping touches at most three extra lines per full chunk") {
  for (std::uint64_t seed : {1ULL, 7ULL, 13ULL}) {
    const std::uint64_t n = 1024, m = 128;
    const Mapping mapping(make_spec(MappingKind::StableRps, n, m, seed));
    for (std::uint64_t width : {4ULL, 8ULL, 16ULL}) {
      for (std::uint64_t start = 0; start + m <= n; start += m) {
        const std::uint64_t fetches = cache_fetches(mapping, start, m, width);
        CHECK_LE(fetches, m / width + 3);
      }
    }
  }
}

TEST_CASE("cache report covers every chunk") {
  const Mapping mapping(make_spec(MappingKind::StableRps, 64, 16, 1));
  const CacheReport report =
      cache_report(mapping, {{0, 16}, {16, 16}, {32, 8}}, 4);
  CHECK_EQ(report.fetches.size(), 3);
  CHECK_EQ(report.line_width, 4);
  for (std::uint64_t f : report.fetches) {
    CHECK_GE(f, 1);
    CHECK_LE(f, 7); // 16/4 + 3
  }
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(Mapping(make_spec(MappingKind::StableRps, 0, 4)), std::invalid_argument);
  CHECK_THROWS_AS(Mapping(make_spec(MappingKind::StableRps, 4, 0)), std::invalid_argument);

  MappingSpec robe = make_spec(MappingKind::RobeZ, 10, 4);
  robe.robe_chunk = 0;
  CHECK_THROWS_AS(Mapping{robe}, std::invalid_argument);
  robe.robe_chunk = 5; // > m
  CHECK_THROWS_AS(Mapping{robe}, std::invalid_argument);

  MappingSpec roast = make_spec(MappingKind::RoastChunked, 10, 4);
  roast.chunks = {{1, 5}, {2, 5}}; // chunk longer than m
  CHECK_THROWS_AS(Mapping{roast}, std::invalid_argument);
  roast.chunks = {{1, 4}, {1, 4}, {1, 2}}; // duplicate ids
  CHECK_THROWS_AS(Mapping{roast}, std::invalid_argument);
  roast.chunks = {{1, 4}, {2, 4}}; // lengths sum to 8, not 10
  CHECK_THROWS_AS(Mapping{roast}, std::invalid_argument);

  CHECK_THROWS_AS(Mapping::with_partition_offsets(10, 4, {1, 3}, HashSeed{1}),
                  std::invalid_argument); // needs 3 offsets
  CHECK_THROWS_AS(Mapping::with_partition_offsets(10, 4, {1, 3, 4}, HashSeed{1}),
                  std::invalid_argument); // offset >= m
  CHECK_THROWS_AS(Mapping::from_table(8, {0, 9}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(Mapping::from_table(8, {0, 1}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(Mapping::from_table(8, {0, 1}, {1, 2}), std::invalid_argument);

  const Mapping ok(make_spec(MappingKind::StableRps, 10, 4));
  CHECK_THROWS_AS(cache_fetches(ok, 0, 0, 4), std::invalid_argument);
  CHECK_THROWS_AS(cache_fetches(ok, 0, 5, 4), std::invalid_argument); // length > m
  CHECK_THROWS_AS(cache_fetches(ok, 8, 4, 4), std::invalid_argument); // runs past n
  CHECK_THROWS_AS(cache_fetches(ok, 0, 4, 0), std::invalid_argument);
}
