#pragma once

// Index mappings for parameter sharing: a deterministic seeded function
// from a flat weight index i in [0, n) to a bucket in [0, m), plus a
// seeded sign g(i) in {-1, +1}. Load and cache-fetch inspection included.

#include "rps/hash.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace rps {

enum class MappingKind {
  ElementWise,       // bucket = h(i)
  RobeZ,             // bucket = (h(i / Z) + i % Z) % m
  RoastChunked,      // bucket = (h(chunk id) + offset in chunk) % m
  StableRps,         // bucket = (u(i / m) + i % m) % m
  StableRpsPermuted, // StableRps fold applied to a seeded permutation of i
};

const char* to_string(MappingKind kind);
MappingKind mapping_kind_from_string(const std::string& name);

struct RoastChunk {
  std::uint64_t id = 0;
  std::uint64_t length = 0;
};

struct MappingSpec {
  MappingKind kind = MappingKind::StableRps;
  std::uint64_t n = 0; // index domain size
  std::uint64_t m = 0; // bucket count; m > n is allowed (loads <= 1)
  HashSeed seed;
  std::uint64_t robe_chunk = 0;    // RobeZ: 1 <= Z <= m
  std::vector<RoastChunk> chunks;  // RoastChunked: lengths sum to n, each <= m

  void validate() const; // throws std::invalid_argument
};

// Fold formulas, exposed so fixed offset tables can be checked directly.
constexpr std::uint64_t stable_fold(std::uint64_t u_of_partition, std::uint64_t x,
                                    std::uint64_t m) noexcept {
  return (u_of_partition + (x % m)) % m;
}
constexpr std::uint64_t roast_bucket(std::uint64_t h_of_chunk, std::uint64_t offset,
                                     std::uint64_t m) noexcept {
  return (h_of_chunk + offset) % m;
}

// Compiled mapping. Construction precomputes whatever the kind needs
// (chunk prefix sums, the permutation); bucket() and sign() are then pure
// lookups or integer formulas.
class Mapping {
public:
  explicit Mapping(MappingSpec spec);

  // StableRps fold with an explicit offset table u (one entry per
  // partition of size m). Signs still come from the seed.
  static Mapping with_partition_offsets(std::uint64_t n, std::uint64_t m,
                                        std::vector<std::uint64_t> offsets,
                                        HashSeed seed);

  // Fully explicit bucket/sign tables.
  static Mapping from_table(std::uint64_t m, std::vector<std::uint32_t> buckets,
                            std::vector<int> signs);

  std::uint64_t n() const { return spec_.n; }
  std::uint64_t m() const { return spec_.m; }
  const MappingSpec& spec() const { return spec_; }

  // True when the mapping is fully determined by its MappingSpec (and so
  // survives a serialization round-trip); explicit tables are not.
  bool spec_backed() const { return backend_ == Backend::Spec; }

  std::uint64_t bucket(std::uint64_t i) const;
  int sign(std::uint64_t i) const;

private:
  enum class Backend { Spec, OffsetTable, ExplicitTable };

  Mapping() = default;

  Backend backend_ = Backend::Spec;
  MappingSpec spec_;
  std::uint64_t bucket_seed_ = 0;
  std::uint64_t sign_seed_ = 0;
  std::vector<std::uint64_t> offsets_;      // OffsetTable
  std::vector<std::uint64_t> perm_;         // StableRpsPermuted
  std::vector<std::uint64_t> chunk_start_;  // RoastChunked prefix sums
  std::vector<std::uint32_t> table_buckets_; // ExplicitTable
  std::vector<std::int8_t> table_signs_;     // ExplicitTable
};

inline std::uint64_t map_index(const Mapping& mapping, std::uint64_t i) {
  return mapping.bucket(i);
}

struct LoadReport {
  std::vector<std::uint64_t> loads; // size m
  std::uint64_t max_load = 0;
  std::uint64_t min_load = 0;
};

LoadReport load_report(const Mapping& mapping);

// Distinct cache lines of the bucket array touched when recovering the
// weights of a contiguous index chunk [start, start + length). Lines are
// aligned windows of `line_width` consecutive buckets. Requires
// 1 <= length <= m and start + length <= n.
std::uint64_t cache_fetches(const Mapping& mapping, std::uint64_t start,
                            std::uint64_t length, std::uint64_t line_width);

struct CacheReport {
  std::uint64_t line_width = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> chunks; // (start, length)
  std::vector<std::uint64_t> fetches; // per chunk
};

CacheReport cache_report(const Mapping& mapping,
                         const std::vector<std::pair<std::uint64_t, std::uint64_t>>& chunks,
                         std::uint64_t line_width);

} // namespace rps
