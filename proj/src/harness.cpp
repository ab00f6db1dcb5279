#include "rps/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace rps::harness {

using nlohmann::json;

namespace {
constexpr double kDivergenceNorm = 1e6;
} // namespace

Dataset synth_classification(std::uint64_t classes, std::uint64_t dim, double separation,
                             std::uint64_t rows, HashSeed seed,
                             std::uint64_t sample_stream) {
  if (classes < 2) throw std::invalid_argument("blobs: need at least 2 classes");
  if (dim == 0 || rows == 0) throw std::invalid_argument("blobs: empty shape");
  if (!(separation >= 0.0)) throw std::invalid_argument("blobs: bad separation");
  std::vector<double> centers(classes * dim);
  Prng center_rng(seed, stream::data);
  for (std::uint64_t k = 0; k < classes; ++k) {
    double norm_sq = 0.0;
    for (std::uint64_t d = 0; d < dim; ++d) {
      centers[k * dim + d] = center_rng.next_normal();
      norm_sq += centers[k * dim + d] * centers[k * dim + d];
    }
    const double scale = separation / std::sqrt(std::max(norm_sq, 1e-300));
    for (std::uint64_t d = 0; d < dim; ++d) centers[k * dim + d] *= scale;
  }
  Dataset data;
  data.rows = rows;
  data.features = dim;
  data.inputs.resize(rows * dim);
  data.labels.resize(rows);
  Prng noise_rng(mix64(subseed(seed, stream::eval), sample_stream));
  for (std::uint64_t r = 0; r < rows; ++r) {
    const auto label = static_cast<std::uint32_t>(r % classes);
    data.labels[r] = label;
    for (std::uint64_t d = 0; d < dim; ++d)
      data.inputs[r * dim + d] = centers[label * dim + d] + noise_rng.next_normal();
  }
  return data;
}

Dataset synth_regression(std::span<const double> rho, double sigma_x, double sigma_y,
                         std::uint64_t rows, HashSeed seed,
                         std::uint64_t sample_stream) {
  const std::uint64_t n = rho.size();
  if (n == 0 || rows == 0) throw std::invalid_argument("regression data: empty shape");
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0))
    throw std::invalid_argument("regression data: sigmas must be positive");
  double ss = 0.0;
  for (double r : rho) ss += r * r;
  if (!(ss < 1.0))
    throw std::invalid_argument("regression data: sum of rho^2 must be below 1");
  const double noise = std::sqrt(1.0 - ss);
  Dataset data;
  data.rows = rows;
  data.features = n;
  data.target_dim = 1;
  data.inputs.resize(rows * n);
  data.targets.resize(rows);
  Prng rng(mix64(subseed(seed, stream::eval), sample_stream));
  for (std::uint64_t r = 0; r < rows; ++r) {
    double y = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      const double z = rng.next_normal();
      data.inputs[r * n + i] = sigma_x * z;
      y += rho[i] * z;
    }
    data.targets[r] = sigma_y * (y + noise * rng.next_normal());
  }
  return data;
}

namespace {

ModelSpec default_model(std::uint64_t in, std::uint64_t out, LossKind loss) {
  ModelSpec spec;
  spec.layers = {{in, 64, Activation::Relu, true},
                 {64, 64, Activation::Relu, true},
                 {64, out, Activation::Identity, true}};
  spec.loss = loss;
  return spec;
}

Dataset build_dataset(const ExperimentConfig& cfg, std::uint64_t seed, bool eval_split) {
  const DatasetSpec& ds = cfg.dataset;
  switch (ds.kind) {
  case DatasetKind::Blobs:
    return synth_classification(ds.classes, ds.dim, ds.separation,
                                eval_split ? ds.eval_rows : ds.train_rows,
                                HashSeed{seed}, eval_split ? 1 : 0);
  case DatasetKind::SynthRegression:
    return synth_regression(ds.rho, ds.sigma_x, ds.sigma_y,
                            eval_split ? ds.eval_rows : ds.train_rows, HashSeed{seed},
                            eval_split ? 1 : 0);
  case DatasetKind::Csv:
    return load_csv(ds.path, ds.csv_classification);
  }
  throw std::logic_error("dataset: unreachable");
}

// Deterministic minibatch stream: seeded shuffle, reshuffled per epoch.
class BatchStream {
public:
  BatchStream(const Dataset& data, std::uint64_t batch, HashSeed seed)
      : data_(data), batch_(std::min(batch, data.rows)),
        rng_(seed, stream::shuffle), order_(data.rows), pos_(data.rows) {
    std::iota(order_.begin(), order_.end(), std::uint64_t{0});
  }

  Batch next() {
    std::vector<std::uint64_t> rows(batch_);
    for (std::uint64_t k = 0; k < batch_; ++k) {
      if (pos_ == order_.size()) {
        for (std::uint64_t i = order_.size(); i > 1; --i)
          std::swap(order_[i - 1], order_[rng_.next_below(i)]);
        pos_ = 0;
      }
      rows[k] = order_[pos_++];
    }
    return make_batch(data_, rows);
  }

private:
  const Dataset& data_;
  std::uint64_t batch_;
  Prng rng_;
  std::vector<std::uint64_t> order_;
  std::uint64_t pos_;
};

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

std::vector<double> dense_init(const ModelSpec& model, std::span<const double> stds,
                               std::uint64_t seed) {
  std::vector<double> params(model.param_count(), 0.0);
  Prng rng(HashSeed{seed}, stream::init);
  std::uint64_t i = 0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const std::uint64_t count = model.layers[l].in * model.layers[l].out;
    for (std::uint64_t k = 0; k < count; ++k) params[i++] = stds[l] * rng.next_normal();
  }
  return params;
}

std::vector<double> layer_stds(const ModelSpec& model, const MethodSpec& method) {
  if (method.target_stds.empty()) return default_target_stds(model);
  if (method.target_stds.size() != model.layers.size())
    throw std::invalid_argument("harness: one target std per layer required");
  return method.target_stds;
}

struct TrainState {
  double last_loss = std::numeric_limits<double>::quiet_NaN();
  double norm = 0.0;
  bool diverged = false;
  std::uint64_t steps_done = 0;
};

bool check_divergence(double loss, double norm) {
  return !std::isfinite(loss) || !std::isfinite(norm) || norm > kDivergenceNorm;
}

double current_lr(const ExperimentConfig& cfg, std::uint64_t step) {
  double lr = cfg.lr;
  for (std::uint64_t milestone : cfg.lr_milestones)
    if (step >= milestone) lr *= cfg.lr_drop;
  return lr;
}

RunRecord finish_record(const ExperimentConfig& cfg, const ModelSpec& model,
                        std::span<const double> params, const Dataset& train,
                        const Dataset& eval_set, const TrainState& state,
                        std::uint64_t seed, const char* method_label,
                        const char* mapping_label, const char* scaler_label) {
  RunRecord rec;
  rec.config_hash = config_hash(cfg);
  rec.method = method_label;
  rec.mapping = mapping_label;
  rec.scaler = scaler_label;
  rec.compression = cfg.compression;
  rec.seed = seed;
  rec.steps = state.steps_done;
  rec.diverged = state.diverged;
  rec.norm = state.norm;
  if (state.diverged) {
    rec.final_loss = state.last_loss;
    rec.accuracy = train.classification()
                       ? 1.0 / static_cast<double>(model.output_dim())
                       : std::numeric_limits<double>::quiet_NaN();
    return rec;
  }
  rec.final_loss = forward(model, params, full_batch(train)).loss;
  rec.accuracy = train.classification()
                     ? accuracy(model, params, full_batch(eval_set))
                     : std::numeric_limits<double>::quiet_NaN();
  return rec;
}

RunRecord run_rps(const ExperimentConfig& cfg, const Dataset& train,
                  const Dataset& eval_set, std::uint64_t seed) {
  const ModelSpec& model = cfg.model;
  const std::vector<double> stds = layer_stds(model, cfg.method);
  const std::uint64_t n = model.weight_count();
  const auto budget = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(
             std::llround(static_cast<double>(n) / cfg.compression)));
  CompressedStore store = init_store(model, cfg.method.mapping, budget,
                                     cfg.method.init_stdev, stds, HashSeed{seed});
  const GammaVector gamma = compute_gamma(store, cfg.method.scaler);
  std::vector<double> params(model.param_count(), 0.0);
  const auto write_weights = [&] {
    for (std::uint64_t i = 0; i < n; ++i) params[i] = recover_weight(store, i);
  };
  write_weights();

  BatchStream batches(train, cfg.batch, HashSeed{seed});
  TrainState state;
  state.norm = l2_norm(params);
  for (std::uint64_t step = 1; step <= cfg.steps; ++step) {
    const double lr = current_lr(cfg, step);
    const Batch batch = batches.next();
    const std::vector<double> grads =
        loss_gradient(model, params, batch, &state.last_loss);
    const std::vector<double> grad_psi = accumulate_gradient(
        store, std::span<const double>(grads.data(), n));
    for (std::uint64_t j = 0; j < store.m(); ++j)
      store.psi[j] -= lr * gamma.values[j] * grad_psi[j];
    for (std::uint64_t b = n; b < model.param_count(); ++b)
      params[b] -= lr * grads[b];
    write_weights();
    state.norm = l2_norm(params);
    state.steps_done = step;
    if (check_divergence(state.last_loss, state.norm)) {
      state.diverged = true;
      break;
    }
  }
  return finish_record(cfg, model, params, train, eval_set, state, seed, "rps",
                       to_string(cfg.method.mapping), to_string(cfg.method.scaler));
}

RunRecord run_prune(const ExperimentConfig& cfg, const Dataset& train,
                    const Dataset& eval_set, std::uint64_t seed) {
  const ModelSpec& model = cfg.model;
  const std::vector<double> stds = layer_stds(model, cfg.method);
  const std::uint64_t n = model.weight_count();
  const auto budget = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(
             std::llround(static_cast<double>(n) / cfg.compression)));
  std::vector<double> params = dense_init(model, stds, seed);

  // Fixed scoring batch: up to 128 rows drawn once from a seeded shuffle.
  std::vector<std::uint64_t> rows(train.rows);
  std::iota(rows.begin(), rows.end(), std::uint64_t{0});
  Prng batch_rng(HashSeed{seed}, stream::subset);
  for (std::uint64_t i = train.rows; i > 1; --i)
    std::swap(rows[i - 1], rows[batch_rng.next_below(i)]);
  rows.resize(std::min<std::uint64_t>(128, train.rows));
  const Batch score_batch = make_batch(train, rows);

  const double keep_fraction = static_cast<double>(budget) / static_cast<double>(n);
  const PruneMask mask = global_prune(model, params, cfg.method.scorer, keep_fraction,
                                      cfg.method.rounds, HashSeed{seed}, &score_batch);
  {
    const std::vector<double> masked =
        apply_mask(std::span<const double>(params.data(), n), mask);
    std::copy(masked.begin(), masked.end(), params.begin());
  }

  BatchStream batches(train, cfg.batch, HashSeed{seed});
  TrainState state;
  state.norm = l2_norm(params);
  for (std::uint64_t step = 1; step <= cfg.steps; ++step) {
    const double lr = current_lr(cfg, step);
    const Batch batch = batches.next();
    std::vector<double> grads = loss_gradient(model, params, batch, &state.last_loss);
    zero_masked_gradient(std::span<double>(grads.data(), n), mask);
    for (std::uint64_t p = 0; p < params.size(); ++p) params[p] -= lr * grads[p];
    state.norm = l2_norm(params);
    state.steps_done = step;
    if (check_divergence(state.last_loss, state.norm)) {
      state.diverged = true;
      break;
    }
  }
  const std::string label = std::string("prune-") + to_string(cfg.method.scorer);
  return finish_record(cfg, model, params, train, eval_set, state, seed, label.c_str(),
                       "-", "-");
}

RunRecord run_small(const ExperimentConfig& cfg, const Dataset& train,
                    const Dataset& eval_set, std::uint64_t seed) {
  const std::uint64_t n = cfg.model.weight_count();
  const auto budget = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(
             std::llround(static_cast<double>(n) / cfg.compression)));
  const ModelSpec model = shrink_model(cfg.model, budget);
  const std::vector<double> stds = cfg.method.target_stds.empty()
                                       ? default_target_stds(model)
                                       : layer_stds(model, cfg.method);
  std::vector<double> params = dense_init(model, stds, seed);

  BatchStream batches(train, cfg.batch, HashSeed{seed});
  TrainState state;
  state.norm = l2_norm(params);
  for (std::uint64_t step = 1; step <= cfg.steps; ++step) {
    const double lr = current_lr(cfg, step);
    const Batch batch = batches.next();
    const std::vector<double> grads =
        loss_gradient(model, params, batch, &state.last_loss);
    for (std::uint64_t p = 0; p < params.size(); ++p) params[p] -= lr * grads[p];
    state.norm = l2_norm(params);
    state.steps_done = step;
    if (check_divergence(state.last_loss, state.norm)) {
      state.diverged = true;
      break;
    }
  }
  return finish_record(cfg, model, params, train, eval_set, state, seed, "small_model",
                       "-", "-");
}

} // namespace

ExperimentConfig finalize(ExperimentConfig cfg) {
  if (cfg.model.layers.empty()) {
    switch (cfg.dataset.kind) {
    case DatasetKind::Blobs:
      cfg.model = default_model(cfg.dataset.dim, cfg.dataset.classes,
                                LossKind::SoftmaxCrossEntropy);
      break;
    case DatasetKind::SynthRegression:
      cfg.model = default_model(cfg.dataset.rho.size(), 1, LossKind::Mse);
      break;
    case DatasetKind::Csv:
      throw std::invalid_argument("harness: csv datasets need an explicit model");
    }
  }
  cfg.model.validate();
  if (cfg.dataset.kind == DatasetKind::Blobs) {
    if (cfg.model.input_dim() != cfg.dataset.dim ||
        cfg.model.output_dim() != cfg.dataset.classes)
      throw std::invalid_argument("harness: model shape does not match blobs task");
  }
  if (cfg.dataset.kind == DatasetKind::SynthRegression &&
      cfg.model.input_dim() != cfg.dataset.rho.size())
    throw std::invalid_argument("harness: model shape does not match regression task");
  if (!(cfg.compression >= 1.0))
    throw std::invalid_argument("harness: compression must be at least 1");
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("harness: lr must be positive");
  if (cfg.steps == 0) throw std::invalid_argument("harness: steps must be positive");
  if (cfg.batch == 0) throw std::invalid_argument("harness: batch must be positive");
  if (cfg.seeds.empty()) throw std::invalid_argument("harness: need at least one seed");
  if (!(cfg.method.init_stdev > 0.0))
    throw std::invalid_argument("harness: init_stdev must be positive");
  if (cfg.method.rounds == 0)
    throw std::invalid_argument("harness: prune rounds must be positive");
  return cfg;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config) {
  const ExperimentConfig cfg = finalize(config);
  std::vector<RunRecord> records;
  records.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) {
    const Dataset train = build_dataset(cfg, seed, false);
    const Dataset eval_set = cfg.dataset.kind == DatasetKind::Csv
                                 ? build_dataset(cfg, seed, false)
                                 : build_dataset(cfg, seed, true);
    switch (cfg.method.type) {
    case MethodType::Rps:
      records.push_back(run_rps(cfg, train, eval_set, seed));
      break;
    case MethodType::Prune:
      records.push_back(run_prune(cfg, train, eval_set, seed));
      break;
    case MethodType::SmallModel:
      records.push_back(run_small(cfg, train, eval_set, seed));
      break;
    }
  }
  return records;
}

std::vector<RunRecord> sweep(const std::vector<ExperimentConfig>& configs,
                             unsigned threads) {
  std::vector<std::vector<RunRecord>> per_config(configs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      per_config[i] = run_experiment(configs[i]);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const unsigned count = std::min<std::size_t>(threads, configs.size());
    pool.reserve(count);
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<RunRecord> records;
  for (auto& chunk : per_config)
    records.insert(records.end(), chunk.begin(), chunk.end());
  return records;
}

namespace {

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

json dataset_to_json(const DatasetSpec& ds) {
  json j;
  switch (ds.kind) {
  case DatasetKind::Blobs:
    j["type"] = "blobs";
    j["classes"] = ds.classes;
    j["dim"] = ds.dim;
    j["separation"] = ds.separation;
    j["train_rows"] = ds.train_rows;
    j["eval_rows"] = ds.eval_rows;
    break;
  case DatasetKind::Csv:
    j["type"] = "csv";
    j["path"] = ds.path;
    j["task"] = ds.csv_classification ? "classification" : "regression";
    break;
  case DatasetKind::SynthRegression:
    j["type"] = "synth_regression";
    j["rho"] = ds.rho;
    j["sigma_x"] = ds.sigma_x;
    j["sigma_y"] = ds.sigma_y;
    j["train_rows"] = ds.train_rows;
    j["eval_rows"] = ds.eval_rows;
    break;
  }
  return j;
}

json method_to_json(const MethodSpec& method) {
  json j;
  switch (method.type) {
  case MethodType::Rps:
    j["type"] = "rps";
    j["mapping"] = to_string(method.mapping);
    j["scaler"] = to_string(method.scaler);
    j["init_stdev"] = method.init_stdev;
    if (!method.target_stds.empty()) j["target_stds"] = method.target_stds;
    break;
  case MethodType::Prune:
    j["type"] = "prune";
    j["scorer"] = to_string(method.scorer);
    j["rounds"] = method.rounds;
    break;
  case MethodType::SmallModel:
    j["type"] = "small_model";
    break;
  }
  return j;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  json layers = json::array();
  for (const auto& layer : cfg.model.layers)
    layers.push_back({{"in", layer.in},
                      {"out", layer.out},
                      {"activation", to_string(layer.activation)},
                      {"bias", layer.has_bias}});
  j["model"] = {{"layers", std::move(layers)}, {"loss", to_string(cfg.model.loss)}};
  j["dataset"] = dataset_to_json(cfg.dataset);
  j["method"] = method_to_json(cfg.method);
  j["compression"] = cfg.compression;
  j["lr"] = cfg.lr;
  j["steps"] = cfg.steps;
  j["batch"] = cfg.batch;
  j["seeds"] = cfg.seeds;
  if (!cfg.lr_milestones.empty()) {
    j["lr_milestones"] = cfg.lr_milestones;
    j["lr_drop"] = cfg.lr_drop;
  }
  return j;
}

DatasetSpec dataset_from_json(const json& j) {
  DatasetSpec ds;
  const std::string type = j.value("type", "blobs");
  if (type == "blobs") {
    ds.kind = DatasetKind::Blobs;
    ds.classes = j.value("classes", ds.classes);
    ds.dim = j.value("dim", ds.dim);
    ds.separation = j.value("separation", ds.separation);
    ds.train_rows = j.value("train_rows", ds.train_rows);
    ds.eval_rows = j.value("eval_rows", ds.eval_rows);
  } else if (type == "csv") {
    ds.kind = DatasetKind::Csv;
    ds.path = j.at("path").get<std::string>();
    ds.csv_classification = j.value("task", "classification") == "classification";
  } else if (type == "synth_regression") {
    ds.kind = DatasetKind::SynthRegression;
    ds.rho = j.at("rho").get<std::vector<double>>();
    ds.sigma_x = j.value("sigma_x", ds.sigma_x);
    ds.sigma_y = j.value("sigma_y", ds.sigma_y);
    ds.train_rows = j.value("train_rows", ds.train_rows);
    ds.eval_rows = j.value("eval_rows", ds.eval_rows);
  } else {
    throw std::invalid_argument("config: unknown dataset type: " + type);
  }
  return ds;
}

MethodSpec method_from_json(const json& j) {
  MethodSpec method;
  const std::string type = j.value("type", "rps");
  if (type == "rps") {
    method.type = MethodType::Rps;
    method.mapping = mapping_kind_from_string(j.value("mapping", "stable_rps"));
    method.scaler = gamma_kind_from_string(j.value("scaler", "effective_update"));
    method.init_stdev = j.value("init_stdev", method.init_stdev);
    if (j.contains("target_stds"))
      method.target_stds = j.at("target_stds").get<std::vector<double>>();
  } else if (type == "prune") {
    method.type = MethodType::Prune;
    method.scorer = scorer_from_string(j.value("scorer", "mag"));
    method.rounds = j.value("rounds", method.rounds);
  } else if (type == "small_model") {
    method.type = MethodType::SmallModel;
  } else {
    throw std::invalid_argument("config: unknown method type: " + type);
  }
  return method;
}

ExperimentConfig config_from_json_value(const json& j) {
  ExperimentConfig cfg;
  if (j.contains("model")) {
    cfg.model.layers.clear();
    for (const auto& layer : j.at("model").at("layers"))
      cfg.model.layers.push_back(
          {layer.at("in").get<std::uint64_t>(), layer.at("out").get<std::uint64_t>(),
           activation_from_string(layer.value("activation", "relu")),
           layer.value("bias", true)});
    cfg.model.loss = loss_from_string(j.at("model").value("loss", "softmax_ce"));
  }
  if (j.contains("dataset")) cfg.dataset = dataset_from_json(j.at("dataset"));
  if (j.contains("method")) cfg.method = method_from_json(j.at("method"));
  cfg.compression = j.value("compression", cfg.compression);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.steps = j.value("steps", cfg.steps);
  cfg.batch = j.value("batch", cfg.batch);
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("lr_milestones")) {
    cfg.lr_milestones = j.at("lr_milestones").get<std::vector<std::uint64_t>>();
    cfg.lr_drop = j.value("lr_drop", cfg.lr_drop);
  }
  return cfg;
}

} // namespace

void write_csv(const std::vector<RunRecord>& records, std::ostream& out) {
  out << "method,mapping,scaler,compression,seed,steps,final_loss,accuracy,norm,diverged\n";
  for (const auto& r : records) {
    out << r.method << ',' << r.mapping << ',' << r.scaler << ','
        << format_double(r.compression) << ',' << r.seed << ',' << r.steps << ','
        << format_double(r.final_loss) << ',' << format_double(r.accuracy) << ','
        << format_double(r.norm) << ',' << (r.diverged ? 1 : 0) << '\n';
  }
}

std::string records_json(const std::vector<RunRecord>& records) {
  json arr = json::array();
  for (const auto& r : records) {
    json j;
    j["config_hash"] = r.config_hash;
    j["method"] = r.method;
    j["mapping"] = r.mapping;
    j["scaler"] = r.scaler;
    j["compression"] = r.compression;
    j["seed"] = r.seed;
    j["steps"] = r.steps;
    j["final_loss"] = r.final_loss;
    j["accuracy"] = r.accuracy;
    j["norm"] = r.norm;
    j["diverged"] = r.diverged;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
  return finalize(config_from_json_value(json::parse(text)));
}

ExperimentConfig config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  return finalize(config_from_json_value(json::parse(in)));
}

std::vector<ExperimentConfig> sweep_from_json(const std::string& text) {
  const json j = json::parse(text);
  const ExperimentConfig base = config_from_json_value(j.value("base", json::object()));
  std::vector<ExperimentConfig> configs;
  const json methods = j.contains("methods") ? j.at("methods")
                                             : json::array({method_to_json(base.method)});
  const json compressions = j.contains("compressions")
                                ? j.at("compressions")
                                : json::array({base.compression});
  for (const auto& method : methods) {
    for (const auto& compression : compressions) {
      ExperimentConfig cfg = base;
      cfg.method = method_from_json(method);
      cfg.compression = compression.get<double>();
      if (j.contains("seeds"))
        cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      configs.push_back(finalize(std::move(cfg)));
    }
  }
  return configs;
}

std::vector<ExperimentConfig> sweep_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return sweep_from_json(ss.str());
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string dump = config_to_json(config).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : dump) h = (h ^ c) * 1099511628211ULL;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace rps::harness
