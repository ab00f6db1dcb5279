#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rps/hash.hpp"
#include "rps/model.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

using namespace rps;

namespace {

ModelSpec two_layer() {
  ModelSpec spec;
  spec.layers = {DenseLayer{2, 3, Activation::Relu, true},
                 DenseLayer{3, 1, Activation::Identity, true}};
  spec.loss = LossKind::Mse;
  return spec;
}

Batch one_row(std::vector<double> x, std::vector<double> target) {
  Batch b;
  b.rows = 1;
  b.features = x.size();
  b.inputs = std::move(x);
  b.targets = std::move(target);
  b.target_dim = b.targets.size();
  return b;
}

} // namespace

TEST_CASE("parameter layout: weights layer-major row-major, biases after") {
  const ModelSpec spec = two_layer();
  CHECK_EQ(spec.weight_count(), 9);
  CHECK_EQ(spec.bias_count(), 4);
  CHECK_EQ(spec.param_count(), 13);
  CHECK_EQ(spec.weight_offset(0), 0);
  CHECK_EQ(spec.weight_offset(1), 6);
  CHECK_EQ(spec.global_index(0, 0, 0), 0);
  CHECK_EQ(spec.global_index(0, 2, 1), 5);
  CHECK_EQ(spec.global_index(1, 0, 2), 8);
  CHECK_EQ(spec.bias_index(0, 2), 11);
  CHECK_EQ(spec.bias_index(1, 0), 12);
  CHECK_EQ(spec.input_dim(), 2);
  CHECK_EQ(spec.output_dim(), 1);

  ModelSpec bad = spec;
  bad.layers[1].in = 4; // does not chain from the previous layer's out
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ModelSpec empty;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("linear forward and squared-error gradient match hand values") {
  ModelSpec spec;
  spec.layers = {DenseLayer{2, 1, Activation::Identity, false}};
  spec.loss = LossKind::Mse;
  const std::vector<double> params = {1.0, 2.0};
  const Batch batch = one_row({1.0, 1.0}, {0.0});

  const ForwardResult fwd = forward(spec, params, batch);
  CHECK_EQ(fwd.outputs.size(), 1);
  CHECK_EQ(fwd.outputs[0], doctest::Approx(3.0));
  CHECK_EQ(fwd.loss, doctest::Approx(9.0));

  double loss = 0.0;
  const std::vector<double> grad = loss_gradient(spec, params, batch, &loss);
  CHECK_EQ(loss, doctest::Approx(9.0));
  REQUIRE_EQ(grad.size(), 2);
  CHECK_EQ(grad[0], doctest::Approx(6.0));
  CHECK_EQ(grad[1], doctest::Approx(6.0));
}

TEST_CASE("squared error averages over rows, sums over output units") {
  ModelSpec spec;
  spec.layers = {DenseLayer{2, 2, Activation::Identity, false}};
  spec.loss = LossKind::Mse;
  const std::vector<double> params = {1.0, 0.0, 0.0, 1.0}; // identity matrix
  Batch batch;
  batch.rows = 2;
  batch.features = 2;
  batch.inputs = {1.0, 0.0, 0.0, 1.0};
  batch.targets = {0.0, 0.0, 0.0, 0.0};
  batch.target_dim = 2;
  CHECK_EQ(forward(spec, params, batch).loss, doctest::Approx(1.0));
}

TEST_CASE("relu zeroes negative pre-activations") {
  ModelSpec spec;
  spec.layers = {DenseLayer{2, 2, Activation::Relu, false}};
  spec.loss = LossKind::Mse;
  const std::vector<double> params = {1.0, -1.0, 2.0, 1.0};
  const Batch batch = one_row({1.0, 2.0}, {0.0, 0.0});
  const ForwardResult fwd = forward(spec, params, batch);
  CHECK_EQ(fwd.outputs[0], doctest::Approx(0.0)); // pre-activation -1
  CHECK_EQ(fwd.outputs[1], doctest::Approx(4.0));
}

TEST_CASE("softmax cross entropy at zero logits is log of the class count") {
  ModelSpec spec;
  spec.layers = {DenseLayer{2, 2, Activation::Identity, true}};
  spec.loss = LossKind::SoftmaxCrossEntropy;
  const std::vector<double> params(spec.param_count(), 0.0);
  Batch batch;
  batch.rows = 1;
  batch.features = 2;
  batch.inputs = {1.0, 0.0};
  batch.labels = {0};
  double loss = 0.0;
  const std::vector<double> grad = loss_gradient(spec, params, batch, &loss);
  CHECK_EQ(loss, doctest::Approx(std::log(2.0)));
  // d loss / d W = (p - onehot) x^T with p = (1/2, 1/2).
  CHECK_EQ(grad[spec.global_index(0, 0, 0)], doctest::Approx(-0.5));
  CHECK_EQ(grad[spec.global_index(0, 0, 1)], doctest::Approx(0.0));
  CHECK_EQ(grad[spec.global_index(0, 1, 0)], doctest::Approx(0.5));
  CHECK_EQ(grad[spec.global_index(0, 1, 1)], doctest::Approx(0.0));
  CHECK_EQ(grad[spec.bias_index(0, 0)], doctest::Approx(-0.5));
  CHECK_EQ(grad[spec.bias_index(0, 1)], doctest::Approx(0.5));
}

static void finite_difference_check(const ModelSpec& spec, const Batch& batch) {
  std::vector<double> params(spec.param_count());
  Prng rng(HashSeed{17}, stream::init);
  for (auto& p : params) p = 0.5 * rng.next_normal();
  const std::vector<double> grad = loss_gradient(spec, params, batch);
  const double h = 1e-6;
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::vector<double> shifted = params;
    shifted[k] = params[k] + h;
    const double up = forward(spec, shifted, batch).loss;
    shifted[k] = params[k] - h;
    const double down = forward(spec, shifted, batch).loss;
    const double fd = (up - down) / (2.0 * h);
    CHECK_EQ(grad[k], doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("backpropagation matches central finite differences") {
  Prng rng(HashSeed{4}, stream::data);

  ModelSpec reg;
  reg.layers = {DenseLayer{3, 4, Activation::Tanh, true},
                DenseLayer{4, 2, Activation::Identity, true}};
  reg.loss = LossKind::Mse;
  Batch reg_batch;
  reg_batch.rows = 5;
  reg_batch.features = 3;
  reg_batch.target_dim = 2;
  for (int i = 0; i < 15; ++i) reg_batch.inputs.push_back(rng.next_normal());
  for (int i = 0; i < 10; ++i) reg_batch.targets.push_back(rng.next_normal());
  finite_difference_check(reg, reg_batch);

  ModelSpec cls;
  cls.layers = {DenseLayer{3, 4, Activation::Tanh, true},
                DenseLayer{4, 3, Activation::Identity, true}};
  cls.loss = LossKind::SoftmaxCrossEntropy;
  Batch cls_batch;
  cls_batch.rows = 5;
  cls_batch.features = 3;
  for (int i = 0; i < 15; ++i) cls_batch.inputs.push_back(rng.next_normal());
  cls_batch.labels = {0, 2, 1, 2, 0};
  finite_difference_check(cls, cls_batch);
}

TEST_CASE("output_gradient is the adjoint of the forward map") {
  ModelSpec spec;
  spec.layers = {DenseLayer{2, 2, Activation::Tanh, true},
                 DenseLayer{2, 1, Activation::Identity, true}};
  spec.loss = LossKind::Mse;
  std::vector<double> params(spec.param_count());
  Prng rng(HashSeed{8}, stream::init);
  for (auto& p : params) p = 0.3 * rng.next_normal();
  const std::vector<double> inputs = {0.4, -1.2, 0.9, 0.1};
  const std::vector<double> cotangent = {1.0, -2.0};

  const std::vector<double> grad =
      output_gradient(spec, params, inputs, 2, cotangent);
  // Compare against finite differences of <cotangent, outputs>.
  Batch probe;
  probe.rows = 2;
  probe.features = 2;
  probe.inputs = inputs;
  probe.targets = {0.0, 0.0};
  probe.target_dim = 1;
  const double h = 1e-6;
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::vector<double> shifted = params;
    shifted[k] = params[k] + h;
    const auto up = forward(spec, shifted, probe).outputs;
    shifted[k] = params[k] - h;
    const auto down = forward(spec, shifted, probe).outputs;
    double fd = 0.0;
    for (std::size_t r = 0; r < up.size(); ++r)
      fd += cotangent[r] * (up[r] - down[r]) / (2.0 * h);
    CHECK_EQ(grad[k], doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("accuracy is the argmax match rate") {
  ModelSpec spec;
  spec.layers = {DenseLayer{2, 2, Activation::Identity, false}};
  spec.loss = LossKind::SoftmaxCrossEntropy;
  const std::vector<double> params = {1.0, 0.0, 0.0, 1.0};
  Batch batch;
  batch.rows = 2;
  batch.features = 2;
  batch.inputs = {2.0, 1.0, 0.0, 3.0};
  batch.labels = {0, 1};
  CHECK_EQ(accuracy(spec, params, batch), doctest::Approx(1.0));
  batch.labels = {1, 1};
  CHECK_EQ(accuracy(spec, params, batch), doctest::Approx(0.5));
}

TEST_CASE("batches can be sliced by row indices") {
  Dataset data;
  data.rows = 3;
  data.features = 2;
  data.inputs = {1, 2, 3, 4, 5, 6};
  data.labels = {0, 1, 2};
  const std::vector<std::uint64_t> rows = {2, 0};
  const Batch batch = make_batch(data, rows);
  CHECK_EQ(batch.rows, 2);
  CHECK_EQ(batch.inputs, std::vector<double>{5, 6, 1, 2});
  CHECK_EQ(batch.labels, std::vector<std::uint32_t>{2, 0});
  const Batch all = full_batch(data);
  CHECK_EQ(all.rows, 3);
  CHECK_EQ(all.inputs, data.inputs);
}

TEST_CASE("shrinking scales hidden widths to fit a weight budget") {
  ModelSpec spec;
  spec.layers = {DenseLayer{10, 64, Activation::Relu, true},
                 DenseLayer{64, 64, Activation::Relu, true},
                 DenseLayer{64, 4, Activation::Identity, true}};
  spec.loss = LossKind::SoftmaxCrossEntropy;
  CHECK_EQ(spec.weight_count(), 4992);

  const ModelSpec small = shrink_model(spec, 500);
  CHECK_EQ(small.input_dim(), 10);
  CHECK_EQ(small.output_dim(), 4);
  CHECK_EQ(small.layers.size(), 3);
  CHECK_EQ(small.layers[0].out, 16);
  CHECK_EQ(small.layers[1].out, 16);
  CHECK_EQ(small.weight_count(), 480);
  // 17-wide hidden layers would already overshoot: 170 + 289 + 68 = 527.
  CHECK_LE(small.weight_count(), 500);

  const ModelSpec same = shrink_model(spec, 4992);
  CHECK_EQ(same.weight_count(), 4992);

  ModelSpec single;
  single.layers = {DenseLayer{4, 2, Activation::Identity, true}};
  CHECK_THROWS_AS(shrink_model(single, 4), std::invalid_argument);
  CHECK_THROWS_AS(shrink_model(spec, 10), std::invalid_argument);
}

TEST_CASE("csv loading reads features plus one target column") {
  const std::string path = "model_test_rows.csv";
  {
    std::ofstream out(path);
    out << "1.5,2.0,0\n-1.0,0.5,3\n";
  }
  const Dataset cls = load_csv(path, true);
  CHECK_EQ(cls.rows, 2);
  CHECK_EQ(cls.features, 2);
  CHECK_EQ(cls.labels, std::vector<std::uint32_t>{0, 3});
  CHECK_EQ(cls.inputs[2], doctest::Approx(-1.0));

  const Dataset reg = load_csv(path, false);
  CHECK_EQ(reg.rows, 2);
  CHECK_EQ(reg.features, 2);
  CHECK_EQ(reg.target_dim, 1);
  CHECK_EQ(reg.targets[1], doctest::Approx(3.0));

  CHECK_THROWS(load_csv("does_not_exist.csv", true));
}
