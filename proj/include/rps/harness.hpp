#pragma once

// Desk-scale experiment harness: synthetic tasks, one training loop per
// compression method (parameter sharing, pruning, small dense models),
// and deterministic sweeps emitted as CSV.

#include "rps/model.hpp"
#include "rps/prune.hpp"
#include "rps/store.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rps::harness {

enum class DatasetKind { Blobs, Csv, SynthRegression };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::Blobs;
  // Blobs
  std::uint64_t classes = 4;
  std::uint64_t dim = 20;
  double separation = 4.0;
  // Blobs / SynthRegression
  std::uint64_t train_rows = 2048;
  std::uint64_t eval_rows = 2048;
  // Csv
  std::string path;
  bool csv_classification = true;
  // SynthRegression
  std::vector<double> rho;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
};

enum class MethodType { Rps, Prune, SmallModel };

struct MethodSpec {
  MethodType type = MethodType::Rps;
  // Rps
  MappingKind mapping = MappingKind::StableRps;
  GammaKind scaler = GammaKind::EffectiveUpdate;
  double init_stdev = 0.05;
  std::vector<double> target_stds; // empty: sqrt(2 / fan_in) per layer
  // Prune
  ScorerKind scorer = ScorerKind::Magnitude;
  std::uint64_t rounds = 100;
};

struct ExperimentConfig {
  ModelSpec model;       // empty layers: derived from the dataset shape
  DatasetSpec dataset;
  MethodSpec method;
  double compression = 10.0; // budget = round(weight_count / compression)
  double lr = 0.05;
  std::uint64_t steps = 2000;
  std::uint64_t batch = 128;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<std::uint64_t> lr_milestones; // steps at which lr *= lr_drop
  double lr_drop = 0.1;
};

struct RunRecord {
  std::string config_hash;
  std::string method;  // rps | prune-<scorer> | small_model
  std::string mapping; // mapping kind for rps, '-' otherwise
  std::string scaler;  // gamma kind for rps, '-' otherwise
  double compression = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t steps = 0; // steps completed (early stop on divergence)
  double final_loss = 0.0;
  double accuracy = 0.0; // NaN for regression tasks; chance level if diverged
  double norm = 0.0;     // l2 norm of the recovered/masked parameter vector
  bool diverged = false; // non-finite loss or norm above 1e6
};

// Class centers sit at `separation` times seeded unit directions; inputs
// add unit Gaussian noise; labels are balanced. The centers depend only on
// `seed`, the noise also on `sample_stream`, so stream 0 and 1 give
// train/eval splits of one task.
Dataset synth_classification(std::uint64_t classes, std::uint64_t dim, double separation,
                             std::uint64_t rows, HashSeed seed,
                             std::uint64_t sample_stream = 0);

// Features x_i = sigma_x z_i; target y = sigma_y (sum rho_i z_i +
// sqrt(1 - sum rho^2) z_0) with iid standard normal z.
Dataset synth_regression(std::span<const double> rho, double sigma_x, double sigma_y,
                         std::uint64_t rows, HashSeed seed,
                         std::uint64_t sample_stream = 0);

// Fill defaults that depend on other fields (e.g. a model derived from
// the dataset shape) and validate the whole config.
ExperimentConfig finalize(ExperimentConfig config);

std::vector<RunRecord> run_experiment(const ExperimentConfig& config);

// Runs every config (parallel across configs when threads > 1); row order
// is configs in order, seeds in order, independent of the thread count.
std::vector<RunRecord> sweep(const std::vector<ExperimentConfig>& configs,
                             unsigned threads);

// Fixed column order:
// method,mapping,scaler,compression,seed,steps,final_loss,accuracy,norm,diverged
void write_csv(const std::vector<RunRecord>& records, std::ostream& out);
std::string records_json(const std::vector<RunRecord>& records);

ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig config_from_file(const std::string& path);
// Sweep files hold a base config plus "methods" and "compressions" arrays
// expanded as a cartesian product.
std::vector<ExperimentConfig> sweep_from_json(const std::string& text);
std::vector<ExperimentConfig> sweep_from_file(const std::string& path);

std::string config_hash(const ExperimentConfig& config);

} // namespace rps::harness
