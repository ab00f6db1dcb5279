#include "rps/mapping.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace rps {

const char* to_string(MappingKind kind) {
  switch (kind) {
  case MappingKind::ElementWise: return "element_wise";
  case MappingKind::RobeZ: return "robe_z";
  case MappingKind::RoastChunked: return "roast_chunked";
  case MappingKind::StableRps: return "stable_rps";
  case MappingKind::StableRpsPermuted: return "stable_rps_permuted";
  }
  throw std::invalid_argument("unknown mapping kind");
}

MappingKind mapping_kind_from_string(const std::string& name) {
  if (name == "element_wise") return MappingKind::ElementWise;
  if (name == "robe_z") return MappingKind::RobeZ;
  if (name == "roast_chunked") return MappingKind::RoastChunked;
  if (name == "stable_rps") return MappingKind::StableRps;
  if (name == "stable_rps_permuted") return MappingKind::StableRpsPermuted;
  throw std::invalid_argument("unknown mapping kind: " + name);
}

void MappingSpec::validate() const {
  if (n == 0) throw std::invalid_argument("mapping: n must be positive");
  if (m == 0) throw std::invalid_argument("mapping: m must be positive");
  if (kind == MappingKind::RobeZ) {
    if (robe_chunk < 1 || robe_chunk > m)
      throw std::invalid_argument("mapping: RobeZ chunk must satisfy 1 <= Z <= m");
  }
  if (kind == MappingKind::RoastChunked) {
    if (chunks.empty())
      throw std::invalid_argument("mapping: RoastChunked needs a chunk list");
    std::uint64_t total = 0;
    std::unordered_set<std::uint64_t> ids;
    for (const auto& c : chunks) {
      if (c.length == 0 || c.length > m)
        throw std::invalid_argument("mapping: chunk length must be in [1, m]");
      if (!ids.insert(c.id).second)
        throw std::invalid_argument("mapping: duplicate chunk id");
      total += c.length;
    }
    if (total != n)
      throw std::invalid_argument("mapping: chunk lengths must sum to n");
  }
}

Mapping::Mapping(MappingSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  bucket_seed_ = subseed(spec_.seed, stream::bucket);
  sign_seed_ = subseed(spec_.seed, stream::sign);
  if (spec_.kind == MappingKind::RoastChunked) {
    chunk_start_.resize(spec_.chunks.size() + 1, 0);
    for (std::size_t c = 0; c < spec_.chunks.size(); ++c)
      chunk_start_[c + 1] = chunk_start_[c] + spec_.chunks[c].length;
  }
  if (spec_.kind == MappingKind::StableRpsPermuted) {
    perm_.resize(spec_.n);
    std::iota(perm_.begin(), perm_.end(), std::uint64_t{0});
    Prng rng(spec_.seed, stream::permute);
    for (std::uint64_t i = spec_.n; i > 1; --i)
      std::swap(perm_[i - 1], perm_[rng.next_below(i)]);
  }
}

Mapping Mapping::with_partition_offsets(std::uint64_t n, std::uint64_t m,
                                        std::vector<std::uint64_t> offsets,
                                        HashSeed seed) {
  const std::uint64_t partitions = (n + m - 1) / m;
  if (offsets.size() != partitions)
    throw std::invalid_argument("mapping: need one offset per partition");
  for (std::uint64_t u : offsets)
    if (u >= m) throw std::invalid_argument("mapping: offsets must lie in [0, m)");
  Mapping out;
  out.backend_ = Backend::OffsetTable;
  out.spec_.kind = MappingKind::StableRps;
  out.spec_.n = n;
  out.spec_.m = m;
  out.spec_.seed = seed;
  out.spec_.validate();
  out.sign_seed_ = subseed(seed, stream::sign);
  out.offsets_ = std::move(offsets);
  return out;
}

Mapping Mapping::from_table(std::uint64_t m, std::vector<std::uint32_t> buckets,
                            std::vector<int> signs) {
  if (buckets.empty())
    throw std::invalid_argument("mapping: empty bucket table");
  if (signs.size() != buckets.size())
    throw std::invalid_argument("mapping: table sizes differ");
  Mapping out;
  out.backend_ = Backend::ExplicitTable;
  out.spec_.kind = MappingKind::ElementWise;
  out.spec_.n = buckets.size();
  out.spec_.m = m;
  for (std::uint32_t b : buckets)
    if (b >= m) throw std::invalid_argument("mapping: table bucket out of range");
  out.table_buckets_ = std::move(buckets);
  out.table_signs_.reserve(out.spec_.n);
  for (int s : signs) {
    if (s != 1 && s != -1)
      throw std::invalid_argument("mapping: signs must be +1 or -1");
    out.table_signs_.push_back(static_cast<std::int8_t>(s));
  }
  return out;
}

std::uint64_t Mapping::bucket(std::uint64_t i) const {
  if (i >= spec_.n) throw std::out_of_range("mapping: index out of range");
  const std::uint64_t m = spec_.m;
  switch (backend_) {
  case Backend::ExplicitTable:
    return table_buckets_[i];
  case Backend::OffsetTable:
    return stable_fold(offsets_[i / m], i, m);
  case Backend::Spec:
    break;
  }
  switch (spec_.kind) {
  case MappingKind::ElementWise:
    return reduce(mix64(bucket_seed_, i), m);
  case MappingKind::RobeZ:
    return (reduce(mix64(bucket_seed_, i / spec_.robe_chunk), m) +
            i % spec_.robe_chunk) % m;
  case MappingKind::RoastChunked: {
    const auto it = std::upper_bound(chunk_start_.begin(), chunk_start_.end(), i);
    const std::size_t c = static_cast<std::size_t>(it - chunk_start_.begin()) - 1;
    const std::uint64_t offset = i - chunk_start_[c];
    return roast_bucket(reduce(mix64(bucket_seed_, spec_.chunks[c].id), m), offset, m);
  }
  case MappingKind::StableRps:
    return stable_fold(reduce(mix64(bucket_seed_, i / m), m), i, m);
  case MappingKind::StableRpsPermuted: {
    const std::uint64_t x = perm_[i];
    return stable_fold(reduce(mix64(bucket_seed_, x / m), m), x, m);
  }
  }
  throw std::logic_error("mapping: unreachable");
}

int Mapping::sign(std::uint64_t i) const {
  if (i >= spec_.n) throw std::out_of_range("mapping: index out of range");
  if (backend_ == Backend::ExplicitTable) return table_signs_[i];
  return sign_hash(sign_seed_, i);
}

LoadReport load_report(const Mapping& mapping) {
  LoadReport report;
  report.loads.assign(mapping.m(), 0);
  for (std::uint64_t i = 0; i < mapping.n(); ++i)
    ++report.loads[mapping.bucket(i)];
  report.max_load = *std::max_element(report.loads.begin(), report.loads.end());
  report.min_load = *std::min_element(report.loads.begin(), report.loads.end());
  return report;
}

std::uint64_t cache_fetches(const Mapping& mapping, std::uint64_t start,
                            std::uint64_t length, std::uint64_t line_width) {
  if (line_width == 0) throw std::invalid_argument("cache: line width must be positive");
  if (length == 0 || length > mapping.m())
    throw std::invalid_argument("cache: chunk length must be in [1, m]");
  if (start + length > mapping.n())
    throw std::invalid_argument("cache: chunk exceeds index domain");
  std::vector<std::uint64_t> lines;
  lines.reserve(length);
  for (std::uint64_t i = start; i < start + length; ++i)
    lines.push_back(mapping.bucket(i) / line_width);
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
  return lines.size();
}

CacheReport cache_report(const Mapping& mapping,
                         const std::vector<std::pair<std::uint64_t, std::uint64_t>>& chunks,
                         std::uint64_t line_width) {
  CacheReport report;
  report.line_width = line_width;
  report.chunks = chunks;
  report.fetches.reserve(chunks.size());
  for (const auto& [start, length] : chunks)
    report.fetches.push_back(cache_fetches(mapping, start, length, line_width));
  return report;
}

} // namespace rps
