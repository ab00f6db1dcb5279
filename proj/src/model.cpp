#include "rps/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rps {

const char* to_string(Activation a) {
  switch (a) {
  case Activation::Identity: return "identity";
  case Activation::Relu: return "relu";
  case Activation::Tanh: return "tanh";
  }
  throw std::invalid_argument("unknown activation");
}

const char* to_string(LossKind k) {
  switch (k) {
  case LossKind::Mse: return "mse";
  case LossKind::SoftmaxCrossEntropy: return "softmax_ce";
  }
  throw std::invalid_argument("unknown loss");
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation: " + name);
}

LossKind loss_from_string(const std::string& name) {
  if (name == "mse") return LossKind::Mse;
  if (name == "softmax_ce") return LossKind::SoftmaxCrossEntropy;
  throw std::invalid_argument("unknown loss: " + name);
}

void ModelSpec::validate() const {
  if (layers.empty()) throw std::invalid_argument("model: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].in == 0 || layers[l].out == 0)
      throw std::invalid_argument("model: zero layer dimension");
    if (l + 1 < layers.size() && layers[l].out != layers[l + 1].in)
      throw std::invalid_argument("model: layer dimensions do not chain");
  }
}

std::uint64_t ModelSpec::weight_count() const {
  std::uint64_t n = 0;
  for (const auto& l : layers) n += l.in * l.out;
  return n;
}

std::uint64_t ModelSpec::bias_count() const {
  std::uint64_t n = 0;
  for (const auto& l : layers)
    if (l.has_bias) n += l.out;
  return n;
}

std::uint64_t ModelSpec::weight_offset(std::size_t layer) const {
  if (layer >= layers.size()) throw std::out_of_range("model: layer out of range");
  std::uint64_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += layers[l].in * layers[l].out;
  return off;
}

std::uint64_t ModelSpec::global_index(std::size_t layer, std::uint64_t row,
                                      std::uint64_t col) const {
  if (layer >= layers.size()) throw std::out_of_range("model: layer out of range");
  if (row >= layers[layer].out || col >= layers[layer].in)
    throw std::out_of_range("model: weight coordinate out of range");
  return weight_offset(layer) + row * layers[layer].in + col;
}

std::uint64_t ModelSpec::bias_index(std::size_t layer, std::uint64_t row) const {
  if (layer >= layers.size()) throw std::out_of_range("model: layer out of range");
  if (!layers[layer].has_bias)
    throw std::invalid_argument("model: layer has no bias");
  if (row >= layers[layer].out)
    throw std::out_of_range("model: bias coordinate out of range");
  std::uint64_t off = weight_count();
  for (std::size_t l = 0; l < layer; ++l)
    if (layers[l].has_bias) off += layers[l].out;
  return off + row;
}

Batch make_batch(const Dataset& data, std::span<const std::uint64_t> rows) {
  Batch b;
  b.rows = rows.size();
  b.features = data.features;
  b.target_dim = data.target_dim;
  b.inputs.resize(b.rows * b.features);
  if (data.classification()) b.labels.resize(b.rows);
  else b.targets.resize(b.rows * data.target_dim);
  for (std::uint64_t r = 0; r < b.rows; ++r) {
    const std::uint64_t src = rows[r];
    if (src >= data.rows) throw std::out_of_range("batch: row out of range");
    std::copy_n(data.inputs.begin() + static_cast<std::ptrdiff_t>(src * data.features),
                data.features,
                b.inputs.begin() + static_cast<std::ptrdiff_t>(r * data.features));
    if (data.classification()) b.labels[r] = data.labels[src];
    else
      std::copy_n(data.targets.begin() + static_cast<std::ptrdiff_t>(src * data.target_dim),
                  data.target_dim,
                  b.targets.begin() + static_cast<std::ptrdiff_t>(r * data.target_dim));
  }
  return b;
}

Batch full_batch(const Dataset& data) {
  std::vector<std::uint64_t> rows(data.rows);
  for (std::uint64_t r = 0; r < data.rows; ++r) rows[r] = r;
  return make_batch(data, rows);
}

namespace {

double apply_activation(Activation a, double x) {
  switch (a) {
  case Activation::Identity: return x;
  case Activation::Relu: return x > 0.0 ? x : 0.0;
  case Activation::Tanh: return std::tanh(x);
  }
  return x;
}

double activation_slope(Activation a, double pre) {
  switch (a) {
  case Activation::Identity: return 1.0;
  case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
  case Activation::Tanh: {
    const double t = std::tanh(pre);
    return 1.0 - t * t;
  }
  }
  return 1.0;
}

struct Cache {
  // acts[0] is the input; acts[l+1] the post-activation of layer l.
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> pres;
};

void run_forward(const ModelSpec& spec, std::span<const double> params,
                 std::span<const double> inputs, std::uint64_t rows, Cache& cache) {
  spec.validate();
  if (params.size() != spec.param_count())
    throw std::invalid_argument("model: parameter vector has wrong size");
  if (inputs.size() != rows * spec.input_dim())
    throw std::invalid_argument("model: input size mismatch");
  cache.acts.assign(spec.layers.size() + 1, {});
  cache.pres.assign(spec.layers.size(), {});
  cache.acts[0].assign(inputs.begin(), inputs.end());
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& layer = spec.layers[l];
    const double* w = params.data() + spec.weight_offset(l);
    const double* bias =
        layer.has_bias ? params.data() + spec.bias_index(l, 0) : nullptr;
    auto& pre = cache.pres[l];
    auto& post = cache.acts[l + 1];
    pre.assign(rows * layer.out, 0.0);
    post.assign(rows * layer.out, 0.0);
    const auto& prev = cache.acts[l];
    for (std::uint64_t r = 0; r < rows; ++r) {
      const double* x = prev.data() + r * layer.in;
      double* z = pre.data() + r * layer.out;
      for (std::uint64_t o = 0; o < layer.out; ++o) {
        double acc = bias ? bias[o] : 0.0;
        const double* wrow = w + o * layer.in;
        for (std::uint64_t c = 0; c < layer.in; ++c) acc += wrow[c] * x[c];
        z[o] = acc;
      }
      for (std::uint64_t o = 0; o < layer.out; ++o)
        post[r * layer.out + o] = apply_activation(layer.activation, z[o]);
    }
  }
}

// Loss value plus d(loss)/d(outputs). Softmax cross-entropy is computed
// through log-sum-exp so large logits stay finite.
double loss_and_cotangent(const ModelSpec& spec, const Batch& batch,
                          const std::vector<double>& outputs,
                          std::vector<double>* cotangent) {
  const std::uint64_t rows = batch.rows;
  const std::uint64_t dim = spec.output_dim();
  if (cotangent) cotangent->assign(rows * dim, 0.0);
  double loss = 0.0;
  if (spec.loss == LossKind::Mse) {
    if (batch.classification() || batch.target_dim != dim)
      throw std::invalid_argument("model: mse needs real targets of output width");
    for (std::uint64_t r = 0; r < rows; ++r)
      for (std::uint64_t o = 0; o < dim; ++o) {
        const double d = outputs[r * dim + o] - batch.targets[r * dim + o];
        loss += d * d;
        if (cotangent) (*cotangent)[r * dim + o] = 2.0 * d / static_cast<double>(rows);
      }
    return loss / static_cast<double>(rows);
  }
  if (!batch.classification())
    throw std::invalid_argument("model: softmax_ce needs class labels");
  for (std::uint64_t r = 0; r < rows; ++r) {
    const double* z = outputs.data() + r * dim;
    const std::uint32_t label = batch.labels[r];
    if (label >= dim) throw std::invalid_argument("model: label out of range");
    double zmax = z[0];
    for (std::uint64_t o = 1; o < dim; ++o) zmax = std::max(zmax, z[o]);
    double sum = 0.0;
    for (std::uint64_t o = 0; o < dim; ++o) sum += std::exp(z[o] - zmax);
    const double lse = zmax + std::log(sum);
    loss += lse - z[label];
    if (cotangent) {
      for (std::uint64_t o = 0; o < dim; ++o) {
        const double p = std::exp(z[o] - lse);
        (*cotangent)[r * dim + o] =
            (p - (o == label ? 1.0 : 0.0)) / static_cast<double>(rows);
      }
    }
  }
  return loss / static_cast<double>(rows);
}

std::vector<double> backprop(const ModelSpec& spec, std::span<const double> params,
                             const Cache& cache, std::uint64_t rows,
                             std::vector<double> delta) {
  std::vector<double> grads(spec.param_count(), 0.0);
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const auto& layer = spec.layers[li];
    const double* w = params.data() + spec.weight_offset(li);
    double* gw = grads.data() + spec.weight_offset(li);
    double* gb = layer.has_bias ? grads.data() + spec.bias_index(li, 0) : nullptr;
    const auto& prev = cache.acts[li];
    const auto& pre = cache.pres[li];
    std::vector<double> next_delta(rows * layer.in, 0.0);
    for (std::uint64_t r = 0; r < rows; ++r) {
      const double* x = prev.data() + r * layer.in;
      double* nd = next_delta.data() + r * layer.in;
      for (std::uint64_t o = 0; o < layer.out; ++o) {
        const double dpre = delta[r * layer.out + o] *
                            activation_slope(layer.activation, pre[r * layer.out + o]);
        if (dpre == 0.0) continue;
        double* gwrow = gw + o * layer.in;
        const double* wrow = w + o * layer.in;
        for (std::uint64_t c = 0; c < layer.in; ++c) {
          gwrow[c] += dpre * x[c];
          nd[c] += dpre * wrow[c];
        }
        if (gb) gb[o] += dpre;
      }
    }
    delta = std::move(next_delta);
  }
  return grads;
}

} // namespace

ForwardResult forward(const ModelSpec& spec, std::span<const double> params,
                      const Batch& batch) {
  Cache cache;
  run_forward(spec, params, batch.inputs, batch.rows, cache);
  ForwardResult result;
  result.outputs = cache.acts.back();
  result.loss = loss_and_cotangent(spec, batch, result.outputs, nullptr);
  return result;
}

std::vector<double> loss_gradient(const ModelSpec& spec, std::span<const double> params,
                                  const Batch& batch, double* loss_out) {
  Cache cache;
  run_forward(spec, params, batch.inputs, batch.rows, cache);
  std::vector<double> cotangent;
  const double loss = loss_and_cotangent(spec, batch, cache.acts.back(), &cotangent);
  if (loss_out) *loss_out = loss;
  return backprop(spec, params, cache, batch.rows, std::move(cotangent));
}

std::vector<double> output_gradient(const ModelSpec& spec, std::span<const double> params,
                                    std::span<const double> inputs, std::uint64_t rows,
                                    std::span<const double> cotangent) {
  Cache cache;
  run_forward(spec, params, inputs, rows, cache);
  if (cotangent.size() != rows * spec.output_dim())
    throw std::invalid_argument("model: cotangent size mismatch");
  return backprop(spec, params, cache, rows,
                  std::vector<double>(cotangent.begin(), cotangent.end()));
}

double accuracy(const ModelSpec& spec, std::span<const double> params, const Batch& batch) {
  if (!batch.classification())
    throw std::invalid_argument("model: accuracy needs class labels");
  const ForwardResult result = forward(spec, params, batch);
  const std::uint64_t dim = spec.output_dim();
  std::uint64_t hits = 0;
  for (std::uint64_t r = 0; r < batch.rows; ++r) {
    const double* z = result.outputs.data() + r * dim;
    std::uint64_t best = 0;
    for (std::uint64_t o = 1; o < dim; ++o)
      if (z[o] > z[best]) best = o;
    if (best == batch.labels[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.rows);
}

namespace {

std::uint64_t shrunk_weight_count(const ModelSpec& spec, double s,
                                  std::vector<std::uint64_t>* widths_out) {
  // Hidden widths are the outs of all but the last layer.
  std::vector<std::uint64_t> widths;
  for (std::size_t l = 0; l + 1 < spec.layers.size(); ++l) {
    const auto w = static_cast<std::uint64_t>(std::max<long long>(
        1, std::llround(s * static_cast<double>(spec.layers[l].out))));
    widths.push_back(std::min<std::uint64_t>(w, spec.layers[l].out));
  }
  std::uint64_t count = 0;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const std::uint64_t in = l == 0 ? spec.layers[l].in : widths[l - 1];
    const std::uint64_t out = l + 1 < spec.layers.size() ? widths[l] : spec.layers[l].out;
    count += in * out;
  }
  if (widths_out) *widths_out = std::move(widths);
  return count;
}

} // namespace

ModelSpec shrink_model(const ModelSpec& spec, std::uint64_t target_weights) {
  spec.validate();
  if (spec.weight_count() <= target_weights) return spec;
  if (spec.layers.size() == 1)
    throw std::invalid_argument("model: cannot shrink a single-layer model");
  if (shrunk_weight_count(spec, 0.0, nullptr) > target_weights)
    throw std::invalid_argument("model: target below the width-1 network");
  double lo = 0.0, hi = 1.0; // count(lo) <= target < count(hi)
  for (int iter = 0; iter < 200 && (lo + hi) / 2.0 > lo && (lo + hi) / 2.0 < hi; ++iter) {
    const double mid = (lo + hi) / 2.0;
    if (shrunk_weight_count(spec, mid, nullptr) <= target_weights) lo = mid;
    else hi = mid;
  }
  std::vector<std::uint64_t> widths;
  shrunk_weight_count(spec, lo, &widths);
  ModelSpec out = spec;
  for (std::size_t l = 0; l + 1 < out.layers.size(); ++l) {
    out.layers[l].out = widths[l];
    out.layers[l + 1].in = widths[l];
  }
  out.validate();
  return out;
}

Dataset load_csv(const std::string& path, bool classification) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  Dataset data;
  std::string line;
  std::vector<double> row;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    row.clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      row.push_back(std::stod(cell));
    if (row.size() < 2) throw std::runtime_error("csv: need features plus one target");
    if (data.rows == 0) data.features = row.size() - 1;
    else if (row.size() - 1 != data.features)
      throw std::runtime_error("csv: ragged row");
    data.inputs.insert(data.inputs.end(), row.begin(), row.end() - 1);
    const double target = row.back();
    if (classification) {
      if (target < 0 || target != std::floor(target))
        throw std::runtime_error("csv: class id must be a nonnegative integer");
      data.labels.push_back(static_cast<std::uint32_t>(target));
    } else {
      data.targets.push_back(target);
    }
    ++data.rows;
  }
  if (data.rows == 0) throw std::runtime_error("csv: empty file");
  data.target_dim = classification ? 0 : 1;
  return data;
}

} // namespace rps
