#pragma once

// Estimation-quality analysis of compression by coordinate subsampling
// (pruning) versus sign-hashed bucket folding (parameter sharing): inner
// product estimators, their closed-form variances, Monte Carlo and
// exact-enumeration checks, and linear-regression residuals.

#include "rps/hash.hpp"
#include "rps/mapping.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rps::theory {

enum class Method { Prune, StableRps };
enum class Quantity { Inner, Norm };

const char* to_string(Method method);
Method method_from_string(const std::string& name);

// One sampled compression of R^n down to R^m. Prune keeps a uniform
// m-subset of coordinates; StableRps folds a seeded permutation of the
// coordinates into m buckets with signs.
struct CompressionDraw {
  Method method = Method::Prune;
  std::uint64_t n = 0;
  std::uint64_t m = 0;
  std::vector<std::uint64_t> kept;  // Prune: sorted kept coordinates
  std::optional<Mapping> mapping;   // StableRps
};

CompressionDraw draw_compression(Method method, std::uint64_t n, std::uint64_t m,
                                 HashSeed seed);

// Unbiased estimate of <x, y> from the compressed views. Prune:
// (n/m) * sum of x_j y_j over kept j. StableRps: sum over buckets of
// (bucket sum of g x)(bucket sum of g y).
double estimate_inner(const CompressionDraw& draw, std::span<const double> x,
                      std::span<const double> y);
double estimate_norm(const CompressionDraw& draw, std::span<const double> x);

struct ClosedForm {
  double value = 0.0;
  bool m_divides_n = true; // the formulas assume m | n; false flags extrapolation
};

// Variance of estimate_inner over the compression draw, for fixed x, y.
ClosedForm variance_closed_form(Method method, std::span<const double> x,
                                std::span<const double> y, std::uint64_t m);

// Expectation of that variance over independent Gaussian data with
// per-coordinate standard deviations `sigmas` (Quantity::Norm means y is
// the same draw as x, Quantity::Inner an independent one).
ClosedForm expected_variance(Method method, Quantity quantity,
                             std::span<const double> sigmas, std::uint64_t m);

struct VarianceReport {
  double closed_form = 0.0;
  bool m_divides_n = true;
  double mc_mean = 0.0;
  double mc_var = 0.0;
  double standard_error = 0.0; // of the mean
  double se_variance = 0.0;    // of the variance estimate
  std::uint64_t trials = 0;
};

VarianceReport mc_variance(Method method, std::span<const double> x,
                           std::span<const double> y, std::uint64_t m,
                           std::uint64_t trials, HashSeed seed);

std::string variance_report_json(const VarianceReport& report, Method method,
                                 std::uint64_t n, std::uint64_t m, HashSeed seed);

struct ExactMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// Full enumeration of the draw distribution (subsets for Prune;
// permutations x fold offsets x signs for StableRps). Requires n <= 6.
ExactMoments exact_variance(Method method, std::span<const double> x,
                            std::span<const double> y, std::uint64_t m);

// Linear model y = sigma_y (sum_i rho_i z_i + sqrt(1 - sum rho^2) z_0)
// over features x_i = sigma_x z_i; n must be a multiple of m.
struct RegressionSpec {
  std::vector<double> rho;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  std::uint64_t n = 0;
  std::uint64_t m = 0;

  void validate() const; // throws std::invalid_argument
};

// Population least-squares residual on the full feature set.
double residual_full(const RegressionSpec& spec);

struct ResidualReport {
  double value = 0.0;           // sigma_y^2 (1 - (1/k) <rho_hat, rho_hat>)
  double relative_excess = 0.0; // (<rho,rho> - (1/k)<rho_hat,rho_hat>) / (1 - <rho,rho>)
};

ResidualReport residual_compressed(const RegressionSpec& spec,
                                   const CompressionDraw& draw);

// Sample least-squares residual variance on `samples` generated points,
// fitted on the compressed features.
double residual_empirical(const RegressionSpec& spec, const CompressionDraw& draw,
                          std::uint64_t samples, HashSeed seed);

} // namespace rps::theory
