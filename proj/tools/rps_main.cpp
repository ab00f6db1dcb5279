// Command line front end: mapping statistics, self-checks of the variance,
// stability, and residual formulas, and training/sweep runs from JSON
// configs. Verify subcommands exit nonzero when any check fails.

#include "rps/harness.hpp"
#include "rps/mapping.hpp"
#include "rps/store.hpp"
#include "rps/theory.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

int g_failures = 0;

void check(bool ok, const std::string& label) {
  std::printf("%s %s\n", ok ? "PASS" : "FAIL", label.c_str());
  if (!ok) ++g_failures;
}

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open " + out_path);
  out << text << '\n';
}

void run_map_stats(const std::string& kind_name, std::uint64_t n, std::uint64_t m,
                   std::uint64_t seed, std::uint64_t robe_chunk,
                   std::uint64_t line_width, const std::string& out_path) {
  rps::MappingSpec spec;
  spec.kind = rps::mapping_kind_from_string(kind_name);
  spec.n = n;
  spec.m = m;
  spec.seed = rps::HashSeed{seed};
  spec.robe_chunk = robe_chunk;
  if (spec.kind == rps::MappingKind::RoastChunked) {
    std::uint64_t remaining = n, next_id = 0;
    while (remaining > 0) {
      const std::uint64_t len = std::min(remaining, m);
      spec.chunks.push_back({next_id++, len});
      remaining -= len;
    }
  }
  const rps::Mapping mapping(spec);
  const rps::LoadReport loads = rps::load_report(mapping);

  std::vector<std::pair<std::uint64_t, std::uint64_t>> chunks;
  if (spec.kind == rps::MappingKind::RoastChunked) {
    std::uint64_t start = 0;
    for (const auto& c : spec.chunks) {
      chunks.emplace_back(start, c.length);
      start += c.length;
    }
  } else {
    std::uint64_t start = 0;
    while (start < n) {
      const std::uint64_t len = std::min(n - start, m);
      chunks.emplace_back(start, len);
      start += len;
    }
  }
  const rps::CacheReport cache = rps::cache_report(mapping, chunks, line_width);

  json j;
  j["kind"] = rps::to_string(spec.kind);
  j["n"] = n;
  j["m"] = m;
  j["seed"] = seed;
  j["max_load"] = loads.max_load;
  j["min_load"] = loads.min_load;
  j["optimal_max_load"] = (n + m - 1) / m;
  j["line_width"] = line_width;
  j["chunk_fetches"] = cache.fetches;
  write_output(j.dump(2), out_path);
}

void run_verify_variance(std::uint64_t n, const std::vector<std::uint64_t>& ms,
                         std::uint64_t trials, std::uint64_t seed) {
  using namespace rps::theory;
  char label[160];

  // Exact enumeration agrees with the closed forms on a small grid.
  {
    const std::vector<double> x = {1.0, -0.5, 2.0, 0.25};
    const std::vector<double> y = {0.5, 1.5, -1.0, 1.0};
    for (Method method : {Method::Prune, Method::StableRps}) {
      for (std::uint64_t m : {std::uint64_t{1}, std::uint64_t{2}}) {
        const ExactMoments exact = exact_variance(method, x, y, m);
        const ClosedForm closed = variance_closed_form(method, x, y, m);
        double dot = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
        std::snprintf(label, sizeof(label),
                      "enumeration n=4 m=%llu %s: mean and variance match",
                      static_cast<unsigned long long>(m), to_string(method));
        check(std::abs(exact.mean - dot) < 1e-10 &&
                  std::abs(exact.variance - closed.value) < 1e-10,
              label);
      }
    }
  }

  // Monte Carlo agrees with the closed forms.
  rps::Prng vec_rng(rps::HashSeed{seed}, rps::stream::data);
  std::vector<double> x(n), y(n);
  for (auto& v : x) v = vec_rng.next_normal();
  for (auto& v : y) v = vec_rng.next_normal();
  for (Method method : {Method::Prune, Method::StableRps}) {
    for (std::uint64_t m : ms) {
      const VarianceReport report =
          mc_variance(method, x, y, m, trials, rps::HashSeed{seed});
      double dot = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
      const bool mean_ok = std::abs(report.mc_mean - dot) < 4.0 * report.standard_error;
      const double err = std::abs(report.mc_var - report.closed_form);
      const bool var_ok = err < 0.03 * std::abs(report.closed_form) ||
                          err < 4.0 * report.se_variance;
      std::snprintf(label, sizeof(label),
                    "monte carlo n=%llu m=%llu %s: unbiased and variance within "
                    "tolerance (closed %.6g, mc %.6g)",
                    static_cast<unsigned long long>(n),
                    static_cast<unsigned long long>(m), to_string(method),
                    report.closed_form, report.mc_var);
      check(mean_ok && var_ok, label);
    }
  }

  // Expected-variance dominance of subsampling over folding.
  rps::Prng sig_rng(rps::HashSeed{seed}, rps::stream::score);
  bool dominance = true;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> sigmas(8);
    for (auto& s : sigmas) s = 0.1 + 2.0 * sig_rng.next_unit();
    for (Quantity q : {Quantity::Inner, Quantity::Norm}) {
      const double prune = expected_variance(Method::Prune, q, sigmas, 2).value;
      const double fold = expected_variance(Method::StableRps, q, sigmas, 2).value;
      if (prune < fold - 1e-12 * std::abs(fold)) dominance = false;
    }
  }
  check(dominance, "expected variance: subsampling never beats folding");
}

void run_verify_stability(std::uint64_t n, std::uint64_t m, std::uint64_t seed) {
  rps::MappingSpec spec;
  spec.kind = rps::MappingKind::StableRps;
  spec.n = n;
  spec.m = m;
  spec.seed = rps::HashSeed{seed};
  rps::CompressedStore store{rps::Mapping(spec), {}, {}, 1.0};
  rps::Prng lambda_rng(rps::HashSeed{seed}, rps::stream::score);
  store.lambda.resize(n);
  for (auto& l : store.lambda) l = 1.0 + 4.0 * lambda_rng.next_unit();
  rps::Prng psi_rng(rps::HashSeed{seed}, rps::stream::psi_init);
  store.psi.resize(m);
  for (auto& p : store.psi) p = psi_rng.next_normal();
  const double lipschitz = 1.0;

  const auto run = [&](double eta, const rps::GammaVector& gamma) {
    rps::CompressedStore s = store;
    double norm = 0.0;
    for (int step = 0; step < 500; ++step) {
      const std::vector<double> theta = rps::recover_weights(s);
      std::vector<double> grad(theta.size());
      for (std::size_t i = 0; i < theta.size(); ++i) grad[i] = lipschitz * theta[i];
      const std::vector<double> grad_psi = rps::accumulate_gradient(s, grad);
      for (std::uint64_t j = 0; j < s.m(); ++j)
        s.psi[j] -= eta * gamma.values[j] * grad_psi[j];
      norm = 0.0;
      for (double t : rps::recover_weights(s)) norm += t * t;
      norm = std::sqrt(norm);
      if (!std::isfinite(norm) || norm > 1e6) return std::make_pair(norm, true);
    }
    return std::make_pair(norm, false);
  };

  double init_norm = 0.0;
  for (double t : rps::recover_weights(store)) init_norm += t * t;
  init_norm = std::sqrt(init_norm);

  const rps::GammaVector ones = rps::compute_gamma(store, rps::GammaKind::None);
  const rps::GammaVector theory_gamma =
      rps::compute_gamma(store, rps::GammaKind::TheoryDriven);
  const double raw_bound = rps::stability_bound(store, lipschitz, false).upper;
  const double scaled_bound = rps::stability_bound(store, lipschitz, true).upper;

  const auto [conv_norm, conv_div] = run(0.95 * raw_bound, ones);
  check(!conv_div && conv_norm < init_norm,
        "unscaled: converges just below the bucket-weighted step bound");
  check(run(1.05 * raw_bound, ones).second,
        "unscaled: diverges just above the bucket-weighted step bound");
  const auto [sconv_norm, sconv_div] = run(0.95 * scaled_bound, theory_gamma);
  check(!sconv_div && sconv_norm < init_norm,
        "scaled: converges just below 2/L with the theory scaler");
  check(run(1.05 * scaled_bound, theory_gamma).second,
        "scaled: diverges just above 2/L with the theory scaler");
}

void run_verify_residual(std::uint64_t n, std::uint64_t m, std::uint64_t samples,
                         std::uint64_t seed) {
  using namespace rps::theory;
  RegressionSpec spec;
  spec.n = n;
  spec.m = m;
  spec.sigma_x = 1.3;
  spec.sigma_y = 0.8;
  rps::Prng rng(rps::HashSeed{seed}, rps::stream::data);
  spec.rho.resize(n);
  double ss = 0.0;
  for (auto& r : spec.rho) {
    r = rng.next_normal();
    ss += r * r;
  }
  const double target = 0.5 + 0.3 * rng.next_unit(); // sum rho^2 in [0.5, 0.8]
  for (auto& r : spec.rho) r *= std::sqrt(target / ss);

  char label[160];
  const double full = residual_full(spec);
  for (Method method : {Method::Prune, Method::StableRps}) {
    const CompressionDraw draw = draw_compression(method, n, m, rps::HashSeed{seed});
    const ResidualReport predicted = residual_compressed(spec, draw);
    const double excess_identity =
        (predicted.value - full) / full - predicted.relative_excess;
    const double fitted = residual_empirical(spec, draw, samples, rps::HashSeed{seed});
    std::snprintf(label, sizeof(label),
                  "residual %s: fitted %.6g vs predicted %.6g within 2%%",
                  to_string(method), fitted, predicted.value);
    check(std::abs(fitted - predicted.value) < 0.02 * predicted.value, label);
    std::snprintf(label, sizeof(label), "residual %s: relative-excess identity",
                  to_string(method));
    check(std::abs(excess_identity) < 1e-12, label);
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"randomized parameter sharing toolkit"};
  app.require_subcommand(1);

  std::string kind = "stable_rps";
  std::uint64_t n = 1000, m = 100, seed = 1, robe_chunk = 8, line_width = 8;
  std::string out_path;

  auto* map_stats = app.add_subcommand("map-stats", "load and cache statistics of a mapping");
  map_stats->add_option("--kind", kind, "element_wise|robe_z|roast_chunked|stable_rps|stable_rps_permuted");
  map_stats->add_option("--n", n, "index domain size");
  map_stats->add_option("--m", m, "bucket count");
  map_stats->add_option("--seed", seed, "hash seed");
  map_stats->add_option("--robe-chunk", robe_chunk, "RobeZ chunk size");
  map_stats->add_option("--line-width", line_width, "buckets per cache line");
  map_stats->add_option("--out", out_path, "write JSON here instead of stdout");

  std::uint64_t var_n = 12, var_trials = 100000, var_seed = 1;
  std::vector<std::uint64_t> var_ms = {2, 3, 4, 6};
  auto* verify_variance = app.add_subcommand("verify-variance", "estimator checks: enumeration, monte carlo, dominance");
  verify_variance->add_option("--n", var_n, "vector length for monte carlo");
  verify_variance->add_option("--m", var_ms, "bucket counts");
  verify_variance->add_option("--trials", var_trials, "monte carlo trials");
  verify_variance->add_option("--seed", var_seed, "seed");

  std::uint64_t stab_n = 64, stab_m = 16, stab_seed = 1;
  auto* verify_stability = app.add_subcommand("verify-stability", "step-size stability checks on a quadratic");
  verify_stability->add_option("--n", stab_n, "weight count");
  verify_stability->add_option("--m", stab_m, "bucket count");
  verify_stability->add_option("--seed", stab_seed, "seed");

  std::uint64_t res_n = 8, res_m = 4, res_samples = 1000000, res_seed = 1;
  auto* verify_residual = app.add_subcommand("verify-residual", "regression residual checks");
  verify_residual->add_option("--n", res_n, "feature count");
  verify_residual->add_option("--m", res_m, "compressed feature count");
  verify_residual->add_option("--samples", res_samples, "fit sample count");
  verify_residual->add_option("--seed", res_seed, "seed");

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  bool as_json = false;
  unsigned threads = 1;
  auto* train = app.add_subcommand("train", "run one experiment config");
  train->add_option("--config", config_path, "JSON config file")->required();
  train->add_option("--seed", seed_override, "override the config's seed list");
  train->add_flag("--json", as_json, "emit JSON records instead of CSV");
  train->add_option("--out", out_path, "write results here instead of stdout");

  auto* sweep_cmd = app.add_subcommand("sweep", "run a sweep config (methods x compressions)");
  sweep_cmd->add_option("--config", config_path, "JSON sweep file")->required();
  sweep_cmd->add_option("--threads", threads, "parallelism across configs");
  sweep_cmd->add_option("--out", out_path, "write CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (map_stats->parsed()) {
      run_map_stats(kind, n, m, seed, robe_chunk, line_width, out_path);
    } else if (verify_variance->parsed()) {
      run_verify_variance(var_n, var_ms, var_trials, var_seed);
    } else if (verify_stability->parsed()) {
      run_verify_stability(stab_n, stab_m, stab_seed);
    } else if (verify_residual->parsed()) {
      run_verify_residual(res_n, res_m, res_samples, res_seed);
    } else if (train->parsed()) {
      rps::harness::ExperimentConfig cfg = rps::harness::config_from_file(config_path);
      if (seed_override) cfg.seeds = {*seed_override};
      const std::vector<rps::harness::RunRecord> records =
          rps::harness::run_experiment(cfg);
      if (as_json) {
        write_output(rps::harness::records_json(records), out_path);
      } else {
        std::ostringstream ss;
        rps::harness::write_csv(records, ss);
        write_output(ss.str(), out_path);
      }
    } else if (sweep_cmd->parsed()) {
      const std::vector<rps::harness::ExperimentConfig> configs =
          rps::harness::sweep_from_file(config_path);
      const std::vector<rps::harness::RunRecord> records =
          rps::harness::sweep(configs, threads);
      std::ostringstream ss;
      rps::harness::write_csv(records, ss);
      write_output(ss.str(), out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return g_failures == 0 ? 0 : 1;
}
