#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rps/hash.hpp"
#include "rps/prune.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <vector>

using namespace rps;

namespace {

ModelSpec linear2() {
  ModelSpec spec;
  spec.layers = {DenseLayer{2, 1, Activation::Identity, false}};
  spec.loss = LossKind::Mse;
  return spec;
}

Batch one_row() {
  Batch b;
  b.rows = 1;
  b.features = 2;
  b.inputs = {1.0, 1.0};
  b.targets = {0.0};
  b.target_dim = 1;
  return b;
}

ModelSpec mlp() {
  ModelSpec spec;
  spec.layers = {DenseLayer{4, 8, Activation::Relu, true},
                 DenseLayer{8, 3, Activation::Identity, true}};
  spec.loss = LossKind::SoftmaxCrossEntropy;
  return spec;
}

std::vector<double> mlp_params(std::uint64_t seed) {
  const ModelSpec spec = mlp();
  std::vector<double> params(spec.param_count());
  Prng rng(HashSeed{seed}, stream::init);
  for (auto& p : params) p = rng.next_normal();
  return params;
}

} // namespace

TEST_CASE("magnitude scores are absolute weights") {
  const ModelSpec spec = linear2();
  const std::vector<double> params = {-3.0, 2.0};
  const std::vector<double> s = score(spec, params, ScorerKind::Magnitude, nullptr,
                                      HashSeed{1});
  REQUIRE_EQ(s.size(), 2);
  CHECK_EQ(s[0], doctest::Approx(3.0));
  CHECK_EQ(s[1], doctest::Approx(2.0));
}

TEST_CASE("gradient-times-weight scores match a hand derivation") {
  // Loss (w1 + w2)^2 at w = (1, 2): gradient (6, 6), scores |6*1|, |6*2|.
  const ModelSpec spec = linear2();
  const std::vector<double> params = {1.0, 2.0};
  const Batch batch = one_row();
  const std::vector<double> s =
      score(spec, params, ScorerKind::Snip, &batch, HashSeed{1});
  CHECK_EQ(s[0], doctest::Approx(6.0));
  CHECK_EQ(s[1], doctest::Approx(12.0));
}

TEST_CASE("all-ones-pass scores match a hand derivation") {
  // One linear unit w = (1, -2): the absolute network maps the all-ones
  // input to |1| + |-2| = 3 with gradient (1, 1), so scores are (1, 2).
  const ModelSpec spec = linear2();
  const std::vector<double> params = {1.0, -2.0};
  const std::vector<double> s =
      score(spec, params, ScorerKind::Synflow, nullptr, HashSeed{1});
  CHECK_EQ(s[0], doctest::Approx(1.0));
  CHECK_EQ(s[1], doctest::Approx(2.0));
}

TEST_CASE("random scores are seeded uniforms on the weights") {
  const ModelSpec spec = mlp();
  const std::vector<double> params = mlp_params(2);
  const std::vector<double> a = score(spec, params, ScorerKind::Random, nullptr,
                                      HashSeed{5});
  const std::vector<double> b = score(spec, params, ScorerKind::Random, nullptr,
                                      HashSeed{5});
  const std::vector<double> c = score(spec, params, ScorerKind::Random, nullptr,
                                      HashSeed{6});
  CHECK_EQ(a, b);
  CHECK_NE(a, c);
  for (double v : a) {
    CHECK_GE(v, 0.0);
    CHECK_LT(v, 1.0);
  }
  CHECK_EQ(a.size(), spec.weight_count());
}

TEST_CASE("global pruning hits the weight budget exactly") {
  const ModelSpec spec = mlp();
  const std::vector<double> params = mlp_params(3);
  const std::uint64_t n = spec.weight_count(); // 56
  for (double kf : {0.5, 0.25, 0.1, 0.037}) {
    for (std::uint64_t rounds : {std::uint64_t{1}, std::uint64_t{7}, std::uint64_t{100}}) {
      const PruneMask mask = global_prune(spec, params, ScorerKind::Magnitude, kf,
                                          rounds, HashSeed{4}, nullptr);
      CHECK_EQ(mask.popcount(), static_cast<std::uint64_t>(std::llround(kf * static_cast<double>(n))));
      CHECK_EQ(mask.keep.size(), n);
    }
  }
  CHECK_THROWS_AS(global_prune(spec, params, ScorerKind::Magnitude, 1e-9, 1,
                               HashSeed{4}, nullptr),
                  std::invalid_argument);
}

TEST_CASE("keeping everything is the identity mask") {
  const ModelSpec spec = mlp();
  const std::vector<double> params = mlp_params(3);
  const PruneMask mask = global_prune(spec, params, ScorerKind::Magnitude, 1.0, 5,
                                      HashSeed{4}, nullptr);
  CHECK_EQ(mask.popcount(), spec.weight_count());
}

TEST_CASE("magnitude pruning keeps the largest weights, ties to lower index") {
  ModelSpec spec;
  spec.layers = {DenseLayer{5, 1, Activation::Identity, false}};
  spec.loss = LossKind::Mse;
  const std::vector<double> params = {0.5, -2.0, 1.0, -0.5, 3.0};
  const PruneMask mask =
      global_prune(spec, params, ScorerKind::Magnitude, 0.6, 1, HashSeed{1}, nullptr);
  // Keep 3 of 5: |3.0|, |-2.0|, |1.0|.
  CHECK_EQ(mask.keep, std::vector<std::uint8_t>{0, 1, 1, 0, 1});

  // |0.5| appears twice; the earlier index survives the tie.
  const std::vector<double> tied = {0.5, -2.0, 1.0, 0.5, 3.0};
  const PruneMask tie_mask =
      global_prune(spec, tied, ScorerKind::Magnitude, 0.8, 1, HashSeed{1}, nullptr);
  CHECK_EQ(tie_mask.keep, std::vector<std::uint8_t>{1, 1, 1, 0, 1});
}

TEST_CASE("magnitude pruning is schedule-invariant, saliency pruning deterministic") {
  const ModelSpec spec = mlp();
  const std::vector<double> params = mlp_params(7);
  // Masking does not change surviving magnitudes, so any round count must
  // land on the same mask.
  const PruneMask one_shot = global_prune(spec, params, ScorerKind::Magnitude, 0.3,
                                          1, HashSeed{8}, nullptr);
  const PruneMask gradual = global_prune(spec, params, ScorerKind::Magnitude, 0.3,
                                         20, HashSeed{8}, nullptr);
  CHECK_EQ(one_shot.keep, gradual.keep);

  const Batch batch = [] {
    Batch b;
    b.rows = 4;
    b.features = 4;
    Prng rng(HashSeed{30}, stream::data);
    for (int i = 0; i < 16; ++i) b.inputs.push_back(rng.next_normal());
    b.labels = {0, 1, 2, 0};
    return b;
  }();
  const PruneMask a = global_prune(spec, params, ScorerKind::Snip, 0.3, 10,
                                   HashSeed{8}, &batch);
  const PruneMask b = global_prune(spec, params, ScorerKind::Snip, 0.3, 10,
                                   HashSeed{8}, &batch);
  CHECK_EQ(a.keep, b.keep);
  CHECK_EQ(a.popcount(), static_cast<std::uint64_t>(std::llround(0.3 * 56.0)));
}

TEST_CASE("masking zeroes pruned weights and their gradients, not biases") {
  const ModelSpec spec = mlp();
  const std::vector<double> params = mlp_params(9);
  const PruneMask mask = global_prune(spec, params, ScorerKind::Magnitude, 0.25, 1,
                                      HashSeed{2}, nullptr);
  const std::vector<double> masked = apply_mask(params, mask);
  REQUIRE_EQ(masked.size(), params.size());
  for (std::uint64_t i = 0; i < spec.weight_count(); ++i) {
    if (mask.keep[i]) CHECK_EQ(masked[i], params[i]);
    else CHECK_EQ(masked[i], 0.0);
  }
  for (std::uint64_t i = spec.weight_count(); i < spec.param_count(); ++i)
    CHECK_EQ(masked[i], params[i]);

  std::vector<double> grads(spec.param_count(), 1.0);
  zero_masked_gradient(grads, mask);
  for (std::uint64_t i = 0; i < spec.weight_count(); ++i)
    CHECK_EQ(grads[i], mask.keep[i] ? 1.0 : 0.0);
  for (std::uint64_t i = spec.weight_count(); i < spec.param_count(); ++i)
    CHECK_EQ(grads[i], 1.0);
}

TEST_CASE("extreme budgets can silence a whole input row") {
  // 8 output units, 64 inputs, keep 4 of 512 weights: some output unit
  // must lose every incoming weight, so its activation is constant.
  ModelSpec spec;
  spec.layers = {DenseLayer{64, 8, Activation::Identity, false}};
  spec.loss = LossKind::Mse;
  std::vector<double> params(spec.param_count());
  Prng rng(HashSeed{40}, stream::init);
  for (auto& p : params) p = rng.next_normal();
  const PruneMask mask = global_prune(spec, params, ScorerKind::Magnitude,
                                      4.0 / 512.0, 1, HashSeed{3}, nullptr);
  CHECK_EQ(mask.popcount(), 4);
  bool some_row_empty = false;
  for (std::uint64_t row = 0; row < 8; ++row) {
    bool any = false;
    for (std::uint64_t col = 0; col < 64; ++col)
      if (mask.keep[spec.global_index(0, row, col)]) any = true;
    if (!any) some_row_empty = true;
  }
  CHECK(some_row_empty);
}

TEST_CASE("masks round-trip through the binary format") {
  const ModelSpec spec = mlp();
  const std::vector<double> params = mlp_params(5);
  const PruneMask mask = global_prune(spec, params, ScorerKind::Synflow, 0.4, 3,
                                      HashSeed{12}, nullptr);
  std::stringstream buffer;
  save_mask(mask, buffer);
  const PruneMask loaded = load_mask(buffer);
  CHECK_EQ(loaded.n, mask.n);
  CHECK_EQ(loaded.scorer, mask.scorer);
  CHECK_EQ(loaded.seed, mask.seed);
  CHECK_EQ(loaded.keep_fraction, mask.keep_fraction);
  CHECK_EQ(loaded.keep, mask.keep);

  std::stringstream garbage("not a mask");
  CHECK_THROWS(load_mask(garbage));
}
