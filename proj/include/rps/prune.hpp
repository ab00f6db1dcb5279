#pragma once

// Pruning-at-initialization baselines: per-weight saliency scores and
// iterative global pruning to an exact weight budget. Only weights are
// pruned; biases always survive.

#include "rps/hash.hpp"
#include "rps/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rps {

enum class ScorerKind { Random, Magnitude, Snip, Synflow };

const char* to_string(ScorerKind kind);
ScorerKind scorer_from_string(const std::string& name);

struct PruneMask {
  std::uint64_t n = 0;
  ScorerKind scorer = ScorerKind::Random;
  std::uint64_t seed = 0;
  double keep_fraction = 1.0;
  std::vector<std::uint8_t> keep; // size n, 0 or 1

  std::uint64_t popcount() const;
};

// Saliency per weight (higher is better). Random draws seeded uniforms;
// Magnitude is |theta_i|; Snip is |dL/dtheta_i * theta_i| on `batch`;
// Synflow runs an all-ones input through the absolute-value network and
// scores d(sum of outputs)/d|theta_i| * |theta_i|.
std::vector<double> score(const ModelSpec& spec, std::span<const double> params,
                          ScorerKind kind, const Batch* batch, HashSeed seed);

// Iterative global pruning: round r of `rounds` keeps the
// round(n * keep_fraction^(r/rounds)) best-scored surviving weights,
// re-scoring on the masked parameters each round. Pruned weights score
// -inf and never return; score ties keep the lower index. The final mask
// has exactly round(n * keep_fraction) survivors (0 survivors is an error).
PruneMask global_prune(const ModelSpec& spec, std::span<const double> params,
                       ScorerKind kind, double keep_fraction, std::uint64_t rounds,
                       HashSeed seed, const Batch* batch);

// Zero every masked weight; biases pass through.
std::vector<double> apply_mask(std::span<const double> params, const PruneMask& mask);
void zero_masked_gradient(std::span<double> grads, const PruneMask& mask);

// Binary blob: header (n, scorer, seed, keep_fraction) + packed bits.
void save_mask(const PruneMask& mask, std::ostream& out);
PruneMask load_mask(std::istream& in);
void save_mask_file(const PruneMask& mask, const std::string& path);
PruneMask load_mask_file(const std::string& path);

} // namespace rps
