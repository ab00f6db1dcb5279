#pragma once

// Compressed parameter store: n virtual weights recovered on the fly from
// m trainable values psi via a mapping, a per-weight sign g(i), and a
// per-weight magnitude lambda_i. theta_i = g(i) * lambda_i * psi[bucket(i)].

#include "rps/mapping.hpp"
#include "rps/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rps {

enum class GammaKind { None, TheoryDriven, EffectiveUpdate };

const char* to_string(GammaKind kind);
GammaKind gamma_kind_from_string(const std::string& name);

struct GammaVector {
  GammaKind kind = GammaKind::None;
  std::vector<double> values; // size m, elementwise factor on psi gradients
};

struct StabilityRange {
  double lower = 0.0; // exclusive
  double upper = 0.0; // exclusive
};

struct CompressedStore {
  Mapping mapping;            // n, m and signs
  std::vector<double> psi;    // size m
  std::vector<double> lambda; // size n, all positive
  double init_stdev = 1.0;

  std::uint64_t n() const { return mapping.n(); }
  std::uint64_t m() const { return mapping.m(); }
  void validate() const; // throws std::invalid_argument
};

// Build a store for a model's weight vector: psi ~ N(0, init_stdev^2) from
// the seed, lambda_i = target_std of i's layer divided by init_stdev.
// Biases are not part of the store; train them densely.
CompressedStore init_store(const ModelSpec& model, MappingKind kind, std::uint64_t m,
                           double init_stdev, std::span<const double> target_stds,
                           HashSeed seed);

// Fan-in rule: sqrt(2 / in) per layer.
std::vector<double> default_target_stds(const ModelSpec& model);

double recover_weight(const CompressedStore& store, std::uint64_t i);
std::vector<double> recover_weights(const CompressedStore& store);

// Adjoint of recovery: grad_psi[j] = sum over i with bucket(i) = j of
// g(i) * lambda_i * grad_theta[i], accumulated in ascending i order.
std::vector<double> accumulate_gradient(const CompressedStore& store,
                                        std::span<const double> grad_theta);

// Movement of virtual weight i after one unit-step of gradient descent on
// psi (optionally through a gamma scaler): lambda_i g(i) Gamma[bucket]
// times the bucket's accumulated gradient.
double effective_update(const CompressedStore& store, std::span<const double> grad_theta,
                        std::uint64_t i, const GammaVector* gamma = nullptr);

// Per-bucket gradient scalers. TheoryDriven: 1 / sum lambda_i^2.
// EffectiveUpdate: bucket size / (sum lambda_i)^2. Empty buckets get 1.
GammaVector compute_gamma(const CompressedStore& store, GammaKind kind);

// Step sizes with guaranteed descent on an L_f-smooth loss: unscaled
// training shrinks the range by the worst bucket's sum of lambda^2; the
// TheoryDriven scaler restores the full-model range (0, 2/L_f).
StabilityRange stability_bound(const CompressedStore& store, double lipschitz,
                               bool theory_scaled);

// JSON round-trip (mapping spec, seed, init_stdev, lambda, psi).
void save_store(const CompressedStore& store, std::ostream& out);
CompressedStore load_store(std::istream& in);
void save_store_file(const CompressedStore& store, const std::string& path);
CompressedStore load_store_file(const std::string& path);

} // namespace rps
