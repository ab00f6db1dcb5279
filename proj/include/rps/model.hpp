#pragma once

// Small dense MLPs over a flat parameter vector. Weights occupy the global
// indices [0, weight_count) in layer-major, row-major order; biases follow
// in [weight_count, param_count). All math is double precision.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rps {

enum class Activation { Identity, Relu, Tanh };
enum class LossKind { Mse, SoftmaxCrossEntropy };

const char* to_string(Activation a);
const char* to_string(LossKind k);
Activation activation_from_string(const std::string& name);
LossKind loss_from_string(const std::string& name);

struct DenseLayer {
  std::uint64_t in = 0;
  std::uint64_t out = 0;
  Activation activation = Activation::Identity;
  bool has_bias = true;
};

struct ModelSpec {
  std::vector<DenseLayer> layers;
  LossKind loss = LossKind::Mse;

  void validate() const; // throws std::invalid_argument

  std::uint64_t weight_count() const;
  std::uint64_t bias_count() const;
  std::uint64_t param_count() const { return weight_count() + bias_count(); }

  // Weight (layer, row, col) -> global index; biases are not addressable
  // here and requests for them throw.
  std::uint64_t global_index(std::size_t layer, std::uint64_t row,
                             std::uint64_t col) const;
  std::uint64_t weight_offset(std::size_t layer) const;
  std::uint64_t bias_index(std::size_t layer, std::uint64_t row) const;

  std::uint64_t input_dim() const { return layers.front().in; }
  std::uint64_t output_dim() const { return layers.back().out; }
};

struct Dataset {
  std::uint64_t rows = 0;
  std::uint64_t features = 0;
  std::vector<double> inputs;    // rows x features, row-major
  std::vector<std::uint32_t> labels; // classification targets (class ids)
  std::vector<double> targets;   // regression targets, rows x target_dim
  std::uint64_t target_dim = 0;

  bool classification() const { return !labels.empty(); }
};

struct Batch {
  std::uint64_t rows = 0;
  std::uint64_t features = 0;
  std::vector<double> inputs;
  std::vector<std::uint32_t> labels;
  std::vector<double> targets;
  std::uint64_t target_dim = 0;

  bool classification() const { return !labels.empty(); }
};

Batch make_batch(const Dataset& data, std::span<const std::uint64_t> rows);
Batch full_batch(const Dataset& data);

struct ForwardResult {
  std::vector<double> outputs; // rows x output_dim, post-activation
  double loss = 0.0;
};

ForwardResult forward(const ModelSpec& spec, std::span<const double> params,
                      const Batch& batch);

// Gradient of the batch loss with respect to every parameter. The batch
// loss itself is written to *loss_out when given.
std::vector<double> loss_gradient(const ModelSpec& spec, std::span<const double> params,
                                  const Batch& batch, double* loss_out = nullptr);

// Generic vector-Jacobian product: gradient of <cotangent, outputs> with
// respect to every parameter.
std::vector<double> output_gradient(const ModelSpec& spec, std::span<const double> params,
                                    std::span<const double> inputs, std::uint64_t rows,
                                    std::span<const double> cotangent);

double accuracy(const ModelSpec& spec, std::span<const double> params, const Batch& batch);

// Scale all hidden widths by one common factor so the weight count drops
// to at most target_weights and is maximal among such scalings.
ModelSpec shrink_model(const ModelSpec& spec, std::uint64_t target_weights);

// CSV rows are feature columns followed by one target column (class id
// when `classification`, real value otherwise). No header row.
Dataset load_csv(const std::string& path, bool classification);

} // namespace rps
