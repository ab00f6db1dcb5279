#include "rps/store.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rps {

using nlohmann::json;

const char* to_string(GammaKind kind) {
  switch (kind) {
  case GammaKind::None: return "none";
  case GammaKind::TheoryDriven: return "theory";
  case GammaKind::EffectiveUpdate: return "effective_update";
  }
  throw std::invalid_argument("unknown gamma kind");
}

GammaKind gamma_kind_from_string(const std::string& name) {
  if (name == "none") return GammaKind::None;
  if (name == "theory") return GammaKind::TheoryDriven;
  if (name == "effective_update") return GammaKind::EffectiveUpdate;
  throw std::invalid_argument("unknown gamma kind: " + name);
}

void CompressedStore::validate() const {
  if (psi.size() != m()) throw std::invalid_argument("store: psi size must be m");
  if (lambda.size() != n()) throw std::invalid_argument("store: lambda size must be n");
  for (double l : lambda)
    if (!(l > 0.0)) throw std::invalid_argument("store: lambda must be positive");
  if (!(init_stdev > 0.0))
    throw std::invalid_argument("store: init_stdev must be positive");
}

std::vector<double> default_target_stds(const ModelSpec& model) {
  std::vector<double> stds;
  stds.reserve(model.layers.size());
  for (const auto& layer : model.layers)
    stds.push_back(std::sqrt(2.0 / static_cast<double>(layer.in)));
  return stds;
}

CompressedStore init_store(const ModelSpec& model, MappingKind kind, std::uint64_t m,
                           double init_stdev, std::span<const double> target_stds,
                           HashSeed seed) {
  model.validate();
  if (target_stds.size() != model.layers.size())
    throw std::invalid_argument("store: one target std per layer required");
  for (double s : target_stds)
    if (!(s > 0.0)) throw std::invalid_argument("store: target stds must be positive");
  if (!(init_stdev > 0.0))
    throw std::invalid_argument("store: init_stdev must be positive");

  MappingSpec spec;
  spec.kind = kind;
  spec.n = model.weight_count();
  spec.m = m;
  spec.seed = seed;
  if (kind == MappingKind::RobeZ) spec.robe_chunk = std::min<std::uint64_t>(8, m);
  if (kind == MappingKind::RoastChunked) {
    // One chunk per layer, split into m-sized pieces when a layer is
    // larger than the bucket array.
    std::uint64_t next_id = 0;
    for (const auto& layer : model.layers) {
      std::uint64_t remaining = layer.in * layer.out;
      while (remaining > 0) {
        const std::uint64_t len = std::min(remaining, m);
        spec.chunks.push_back({next_id++, len});
        remaining -= len;
      }
    }
  }

  CompressedStore store{Mapping(spec), {}, {}, init_stdev};
  store.psi.resize(m);
  Prng rng(seed, stream::psi_init);
  for (std::uint64_t j = 0; j < m; ++j)
    store.psi[j] = init_stdev * rng.next_normal();
  store.lambda.reserve(spec.n);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const double lam = target_stds[l] / init_stdev;
    const std::uint64_t count = model.layers[l].in * model.layers[l].out;
    store.lambda.insert(store.lambda.end(), count, lam);
  }
  store.validate();
  return store;
}

double recover_weight(const CompressedStore& store, std::uint64_t i) {
  return static_cast<double>(store.mapping.sign(i)) * store.lambda[i] *
         store.psi[store.mapping.bucket(i)];
}

std::vector<double> recover_weights(const CompressedStore& store) {
  std::vector<double> theta(store.n());
  for (std::uint64_t i = 0; i < store.n(); ++i) theta[i] = recover_weight(store, i);
  return theta;
}

std::vector<double> accumulate_gradient(const CompressedStore& store,
                                        std::span<const double> grad_theta) {
  if (grad_theta.size() != store.n())
    throw std::invalid_argument("store: gradient size must be n");
  std::vector<double> grad_psi(store.m(), 0.0);
  for (std::uint64_t i = 0; i < store.n(); ++i)
    grad_psi[store.mapping.bucket(i)] +=
        static_cast<double>(store.mapping.sign(i)) * store.lambda[i] * grad_theta[i];
  return grad_psi;
}

double effective_update(const CompressedStore& store, std::span<const double> grad_theta,
                        std::uint64_t i, const GammaVector* gamma) {
  if (grad_theta.size() != store.n())
    throw std::invalid_argument("store: gradient size must be n");
  const std::uint64_t bucket = store.mapping.bucket(i);
  double acc = 0.0;
  for (std::uint64_t j = 0; j < store.n(); ++j)
    if (store.mapping.bucket(j) == bucket)
      acc += static_cast<double>(store.mapping.sign(j)) * store.lambda[j] * grad_theta[j];
  const double scale = gamma ? gamma->values.at(bucket) : 1.0;
  return store.lambda[i] * static_cast<double>(store.mapping.sign(i)) * scale * acc;
}

GammaVector compute_gamma(const CompressedStore& store, GammaKind kind) {
  GammaVector gamma;
  gamma.kind = kind;
  gamma.values.assign(store.m(), 1.0);
  if (kind == GammaKind::None) return gamma;
  std::vector<double> sum_sq(store.m(), 0.0);
  std::vector<double> sum(store.m(), 0.0);
  std::vector<std::uint64_t> count(store.m(), 0);
  for (std::uint64_t i = 0; i < store.n(); ++i) {
    const std::uint64_t b = store.mapping.bucket(i);
    sum_sq[b] += store.lambda[i] * store.lambda[i];
    sum[b] += store.lambda[i];
    ++count[b];
  }
  for (std::uint64_t b = 0; b < store.m(); ++b) {
    if (count[b] == 0) continue; // empty bucket keeps 1
    if (kind == GammaKind::TheoryDriven) gamma.values[b] = 1.0 / sum_sq[b];
    else gamma.values[b] = static_cast<double>(count[b]) / (sum[b] * sum[b]);
  }
  return gamma;
}

StabilityRange stability_bound(const CompressedStore& store, double lipschitz,
                               bool theory_scaled) {
  if (!(lipschitz > 0.0))
    throw std::invalid_argument("store: lipschitz constant must be positive");
  if (theory_scaled) return {0.0, 2.0 / lipschitz};
  std::vector<double> sum_sq(store.m(), 0.0);
  for (std::uint64_t i = 0; i < store.n(); ++i)
    sum_sq[store.mapping.bucket(i)] += store.lambda[i] * store.lambda[i];
  double worst = 0.0;
  for (double s : sum_sq) worst = std::max(worst, s);
  if (worst == 0.0) throw std::invalid_argument("store: no occupied buckets");
  return {0.0, 2.0 / (worst * lipschitz)};
}

void save_store(const CompressedStore& store, std::ostream& out) {
  store.validate();
  if (!store.mapping.spec_backed())
    throw std::invalid_argument("store: only spec-backed mappings serialize");
  const MappingSpec& spec = store.mapping.spec();
  json j;
  j["format"] = "compressed-store";
  j["version"] = 1;
  j["mapping"]["kind"] = to_string(spec.kind);
  j["mapping"]["n"] = spec.n;
  j["mapping"]["m"] = spec.m;
  j["mapping"]["seed"] = spec.seed.value;
  if (spec.kind == MappingKind::RobeZ) j["mapping"]["robe_chunk"] = spec.robe_chunk;
  if (spec.kind == MappingKind::RoastChunked) {
    json chunks = json::array();
    for (const auto& c : spec.chunks) chunks.push_back({c.id, c.length});
    j["mapping"]["chunks"] = std::move(chunks);
  }
  j["init_stdev"] = store.init_stdev;
  j["lambda"] = store.lambda;
  j["psi"] = store.psi;
  out << j.dump();
}

CompressedStore load_store(std::istream& in) {
  json j = json::parse(in);
  if (j.value("format", "") != "compressed-store")
    throw std::runtime_error("store: not a compressed-store file");
  MappingSpec spec;
  spec.kind = mapping_kind_from_string(j.at("mapping").at("kind").get<std::string>());
  spec.n = j.at("mapping").at("n").get<std::uint64_t>();
  spec.m = j.at("mapping").at("m").get<std::uint64_t>();
  spec.seed.value = j.at("mapping").at("seed").get<std::uint64_t>();
  spec.robe_chunk = j.at("mapping").value("robe_chunk", std::uint64_t{0});
  if (j.at("mapping").contains("chunks"))
    for (const auto& c : j.at("mapping").at("chunks"))
      spec.chunks.push_back({c.at(0).get<std::uint64_t>(), c.at(1).get<std::uint64_t>()});
  CompressedStore store{Mapping(spec), j.at("psi").get<std::vector<double>>(),
                        j.at("lambda").get<std::vector<double>>(),
                        j.at("init_stdev").get<double>()};
  store.validate();
  return store;
}

void save_store_file(const CompressedStore& store, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("store: cannot open " + path);
  save_store(store, out);
}

CompressedStore load_store_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("store: cannot open " + path);
  return load_store(in);
}

} // namespace rps
