#include "rps/prune.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rps {

const char* to_string(ScorerKind kind) {
  switch (kind) {
  case ScorerKind::Random: return "rand";
  case ScorerKind::Magnitude: return "mag";
  case ScorerKind::Snip: return "snip";
  case ScorerKind::Synflow: return "synflow";
  }
  throw std::invalid_argument("unknown scorer");
}

ScorerKind scorer_from_string(const std::string& name) {
  if (name == "rand") return ScorerKind::Random;
  if (name == "mag") return ScorerKind::Magnitude;
  if (name == "snip") return ScorerKind::Snip;
  if (name == "synflow") return ScorerKind::Synflow;
  throw std::invalid_argument("unknown scorer: " + name);
}

std::uint64_t PruneMask::popcount() const {
  return static_cast<std::uint64_t>(std::count(keep.begin(), keep.end(), std::uint8_t{1}));
}

std::vector<double> score(const ModelSpec& spec, std::span<const double> params,
                          ScorerKind kind, const Batch* batch, HashSeed seed) {
  spec.validate();
  if (params.size() != spec.param_count())
    throw std::invalid_argument("prune: parameter vector has wrong size");
  const std::uint64_t n = spec.weight_count();
  std::vector<double> scores(n, 0.0);
  switch (kind) {
  case ScorerKind::Random: {
    const std::uint64_t s = subseed(seed, stream::score);
    for (std::uint64_t i = 0; i < n; ++i) scores[i] = to_unit(mix64(s, i));
    return scores;
  }
  case ScorerKind::Magnitude:
    for (std::uint64_t i = 0; i < n; ++i) scores[i] = std::abs(params[i]);
    return scores;
  case ScorerKind::Snip: {
    if (!batch) throw std::invalid_argument("prune: snip needs a batch");
    const std::vector<double> grads = loss_gradient(spec, params, *batch);
    for (std::uint64_t i = 0; i < n; ++i) scores[i] = std::abs(grads[i] * params[i]);
    return scores;
  }
  case ScorerKind::Synflow: {
    std::vector<double> abs_params(params.begin(), params.end());
    for (double& p : abs_params) p = std::abs(p);
    const std::vector<double> ones_in(spec.input_dim(), 1.0);
    const std::vector<double> ones_out(spec.output_dim(), 1.0);
    const std::vector<double> grads =
        output_gradient(spec, abs_params, ones_in, 1, ones_out);
    for (std::uint64_t i = 0; i < n; ++i) scores[i] = grads[i] * abs_params[i];
    return scores;
  }
  }
  throw std::logic_error("prune: unreachable");
}

PruneMask global_prune(const ModelSpec& spec, std::span<const double> params,
                       ScorerKind kind, double keep_fraction, std::uint64_t rounds,
                       HashSeed seed, const Batch* batch) {
  spec.validate();
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
    throw std::invalid_argument("prune: keep fraction must be in (0, 1]");
  if (rounds == 0) throw std::invalid_argument("prune: rounds must be positive");
  const std::uint64_t n = spec.weight_count();
  const auto budget = static_cast<std::uint64_t>(
      std::llround(keep_fraction * static_cast<double>(n)));
  if (budget == 0) throw std::invalid_argument("prune: budget of zero weights");

  PruneMask mask;
  mask.n = n;
  mask.scorer = kind;
  mask.seed = seed.value;
  mask.keep_fraction = keep_fraction;
  mask.keep.assign(n, 1);
  if (keep_fraction == 1.0) return mask;

  std::vector<double> masked(params.begin(), params.end());
  std::vector<std::uint64_t> order(n);
  for (std::uint64_t r = 1; r <= rounds; ++r) {
    const double frac = std::pow(keep_fraction,
                                 static_cast<double>(r) / static_cast<double>(rounds));
    const auto target =
        r == rounds ? budget
                    : std::max<std::uint64_t>(budget, static_cast<std::uint64_t>(std::llround(
                                                          frac * static_cast<double>(n))));
    if (target >= mask.popcount()) continue;
    std::vector<double> scores =
        score(spec, masked, kind, batch, HashSeed{mix64(seed.value, r)});
    for (std::uint64_t i = 0; i < n; ++i)
      if (!mask.keep[i]) scores[i] = -std::numeric_limits<double>::infinity();
    std::iota(order.begin(), order.end(), std::uint64_t{0});
    std::sort(order.begin(), order.end(), [&scores](std::uint64_t a, std::uint64_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a < b;
    });
    std::fill(mask.keep.begin(), mask.keep.end(), std::uint8_t{0});
    for (std::uint64_t k = 0; k < target; ++k) mask.keep[order[k]] = 1;
    for (std::uint64_t i = 0; i < n; ++i)
      if (!mask.keep[i]) masked[i] = 0.0;
  }
  return mask;
}

std::vector<double> apply_mask(std::span<const double> params, const PruneMask& mask) {
  if (params.size() < mask.n)
    throw std::invalid_argument("prune: parameter vector shorter than mask");
  std::vector<double> out(params.begin(), params.end());
  for (std::uint64_t i = 0; i < mask.n; ++i)
    if (!mask.keep[i]) out[i] = 0.0;
  return out;
}

void zero_masked_gradient(std::span<double> grads, const PruneMask& mask) {
  if (grads.size() < mask.n)
    throw std::invalid_argument("prune: gradient vector shorter than mask");
  for (std::uint64_t i = 0; i < mask.n; ++i)
    if (!mask.keep[i]) grads[i] = 0.0;
}

namespace {
constexpr char kMaskMagic[8] = {'r', 'p', 's', 'm', 'a', 's', 'k', '1'};

template <typename T> void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}
template <typename T> T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("mask: truncated file");
  return value;
}
} // namespace

void save_mask(const PruneMask& mask, std::ostream& out) {
  out.write(kMaskMagic, sizeof(kMaskMagic));
  write_pod(out, mask.n);
  write_pod(out, static_cast<std::uint32_t>(mask.scorer));
  write_pod(out, mask.seed);
  write_pod(out, mask.keep_fraction);
  std::vector<std::uint8_t> bits((mask.n + 7) / 8, 0);
  for (std::uint64_t i = 0; i < mask.n; ++i)
    if (mask.keep[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  out.write(reinterpret_cast<const char*>(bits.data()),
            static_cast<std::streamsize>(bits.size()));
}

PruneMask load_mask(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMaskMagic, sizeof(magic)) != 0)
    throw std::runtime_error("mask: bad magic");
  PruneMask mask;
  mask.n = read_pod<std::uint64_t>(in);
  mask.scorer = static_cast<ScorerKind>(read_pod<std::uint32_t>(in));
  mask.seed = read_pod<std::uint64_t>(in);
  mask.keep_fraction = read_pod<double>(in);
  std::vector<std::uint8_t> bits((mask.n + 7) / 8);
  in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  if (!in) throw std::runtime_error("mask: truncated file");
  mask.keep.assign(mask.n, 0);
  for (std::uint64_t i = 0; i < mask.n; ++i)
    mask.keep[i] = (bits[i / 8] >> (i % 8)) & 1u;
  return mask;
}

void save_mask_file(const PruneMask& mask, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("mask: cannot open " + path);
  save_mask(mask, out);
}

PruneMask load_mask_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("mask: cannot open " + path);
  return load_mask(in);
}

} // namespace rps
