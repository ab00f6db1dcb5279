#include "rps/theory.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace rps::theory {

const char* to_string(Method method) {
  switch (method) {
  case Method::Prune: return "prune";
  case Method::StableRps: return "rps";
  }
  throw std::invalid_argument("unknown method");
}

Method method_from_string(const std::string& name) {
  if (name == "prune") return Method::Prune;
  if (name == "rps") return Method::StableRps;
  throw std::invalid_argument("unknown method: " + name);
}

CompressionDraw draw_compression(Method method, std::uint64_t n, std::uint64_t m,
                                 HashSeed seed) {
  if (n == 0 || m == 0 || m > n)
    throw std::invalid_argument("draw: need 1 <= m <= n");
  CompressionDraw draw;
  draw.method = method;
  draw.n = n;
  draw.m = m;
  if (method == Method::Prune) {
    std::vector<std::uint64_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::uint64_t{0});
    Prng rng(seed, stream::subset);
    for (std::uint64_t k = 0; k < m; ++k)
      std::swap(idx[k], idx[k + rng.next_below(n - k)]);
    draw.kept.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(draw.kept.begin(), draw.kept.end());
  } else {
    MappingSpec spec;
    spec.kind = MappingKind::StableRpsPermuted;
    spec.n = n;
    spec.m = m;
    spec.seed = seed;
    draw.mapping.emplace(spec);
  }
  return draw;
}

double estimate_inner(const CompressionDraw& draw, std::span<const double> x,
                      std::span<const double> y) {
  if (x.size() != draw.n || y.size() != draw.n)
    throw std::invalid_argument("estimate: vector size must be n");
  if (draw.method == Method::Prune) {
    const double k = static_cast<double>(draw.n) / static_cast<double>(draw.m);
    double acc = 0.0;
    for (std::uint64_t j : draw.kept) acc += x[j] * y[j];
    return k * acc;
  }
  const Mapping& mapping = *draw.mapping;
  std::vector<double> bx(draw.m, 0.0), by(draw.m, 0.0);
  for (std::uint64_t i = 0; i < draw.n; ++i) {
    const std::uint64_t b = mapping.bucket(i);
    const double s = static_cast<double>(mapping.sign(i));
    bx[b] += s * x[i];
    by[b] += s * y[i];
  }
  double acc = 0.0;
  for (std::uint64_t b = 0; b < draw.m; ++b) acc += bx[b] * by[b];
  return acc;
}

double estimate_norm(const CompressionDraw& draw, std::span<const double> x) {
  return estimate_inner(draw, x, x);
}

ClosedForm variance_closed_form(Method method, std::span<const double> x,
                                std::span<const double> y, std::uint64_t m) {
  const std::uint64_t n = x.size();
  if (y.size() != n) throw std::invalid_argument("variance: size mismatch");
  if (n == 0 || m == 0 || m > n)
    throw std::invalid_argument("variance: need 1 <= m <= n");
  ClosedForm result;
  result.m_divides_n = (n % m) == 0;
  if (n == 1) return result; // m = 1 = n: both estimators are exact
  double sxy = 0.0, sx2y2 = 0.0, sx2 = 0.0, sy2 = 0.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    sxy += x[i] * y[i];
    sx2y2 += x[i] * x[i] * y[i] * y[i];
    sx2 += x[i] * x[i];
    sy2 += y[i] * y[i];
  }
  const double cross_same = sxy * sxy - sx2y2;       // sum_{i != j} x_i y_i x_j y_j
  const double cross_mixed = sx2 * sy2 - sx2y2;      // sum_{i != j} x_i^2 y_j^2
  const double nd = static_cast<double>(n), md = static_cast<double>(m);
  if (method == Method::Prune) {
    result.value = (nd / md - 1.0) * sx2y2 + (md - nd) / (md * (nd - 1.0)) * cross_same;
  } else {
    result.value = (nd - md) / (nd - 1.0) / md * (cross_mixed + cross_same);
  }
  return result;
}

ClosedForm expected_variance(Method method, Quantity quantity,
                             std::span<const double> sigmas, std::uint64_t m) {
  const std::uint64_t n = sigmas.size();
  if (n == 0 || m == 0 || m > n)
    throw std::invalid_argument("variance: need 1 <= m <= n");
  for (double s : sigmas)
    if (!(s > 0.0)) throw std::invalid_argument("variance: sigmas must be positive");
  ClosedForm result;
  result.m_divides_n = (n % m) == 0;
  if (n == 1) return result;
  double s4 = 0.0, s2 = 0.0;
  for (double s : sigmas) {
    s4 += s * s * s * s;
    s2 += s * s;
  }
  const double cross = s2 * s2 - s4; // sum_{i != j} sigma_i^2 sigma_j^2
  const double nd = static_cast<double>(n), md = static_cast<double>(m);
  if (method == Method::Prune) {
    if (quantity == Quantity::Inner) result.value = (nd - md) / md * s4;
    else
      result.value =
          (nd / md - 1.0) * 3.0 * s4 + (md - nd) / (md * (nd - 1.0)) * cross;
  } else {
    const double base = (nd - md) / (nd - 1.0) / md * cross;
    result.value = quantity == Quantity::Inner ? base : 2.0 * base;
  }
  return result;
}

VarianceReport mc_variance(Method method, std::span<const double> x,
                           std::span<const double> y, std::uint64_t m,
                           std::uint64_t trials, HashSeed seed) {
  if (trials < 2) throw std::invalid_argument("variance: need at least 2 trials");
  const ClosedForm closed = variance_closed_form(method, x, y, m);
  std::vector<double> values(trials);
  for (std::uint64_t t = 0; t < trials; ++t) {
    const CompressionDraw draw =
        draw_compression(method, x.size(), m, HashSeed{mix64(seed.value, t)});
    values[t] = estimate_inner(draw, x, y);
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(trials);
  double m2 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  const double var = m2 / static_cast<double>(trials - 1);
  const double central4 = m4 / static_cast<double>(trials);
  VarianceReport report;
  report.closed_form = closed.value;
  report.m_divides_n = closed.m_divides_n;
  report.mc_mean = mean;
  report.mc_var = var;
  report.standard_error = std::sqrt(var / static_cast<double>(trials));
  report.se_variance =
      std::sqrt(std::max(0.0, central4 - var * var) / static_cast<double>(trials));
  report.trials = trials;
  return report;
}

std::string variance_report_json(const VarianceReport& report, Method method,
                                 std::uint64_t n, std::uint64_t m, HashSeed seed) {
  nlohmann::json j;
  j["method"] = to_string(method);
  j["n"] = n;
  j["m"] = m;
  j["seed"] = seed.value;
  j["closed_form"] = report.closed_form;
  j["m_divides_n"] = report.m_divides_n;
  j["mc_mean"] = report.mc_mean;
  j["mc_var"] = report.mc_var;
  j["standard_error"] = report.standard_error;
  j["se_variance"] = report.se_variance;
  j["trials"] = report.trials;
  return j.dump();
}

namespace {

// Bucket-partition patterns of the StableRps draw (permutation x fold
// offsets), collapsed to canonical group labels with multiplicities. The
// estimator's law given the signs depends only on which coordinates share
// a bucket, so this collapse is lossless.
using Pattern = std::array<std::uint8_t, 6>;

struct PatternTable {
  std::vector<std::pair<Pattern, std::uint64_t>> patterns;
  std::uint64_t total = 0; // sum of multiplicities
};

const PatternTable& fold_patterns(std::uint64_t n, std::uint64_t m) {
  static std::map<std::pair<std::uint64_t, std::uint64_t>, PatternTable> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find({n, m});
  if (it != cache.end()) return it->second;

  PatternTable table;
  std::unordered_map<std::uint64_t, std::uint64_t> counts;
  std::vector<std::uint64_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::uint64_t{0});
  const std::uint64_t partitions = (n + m - 1) / m;
  std::vector<std::uint64_t> u(partitions, 0);
  do {
    std::fill(u.begin(), u.end(), 0);
    while (true) {
      // Canonical labels in first-appearance order.
      std::array<std::int8_t, 6> label_of_bucket;
      label_of_bucket.fill(-1);
      std::uint64_t key = 0;
      std::uint8_t next = 0;
      for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t b = (u[perm[i] / m] + perm[i] % m) % m;
        if (label_of_bucket[b] < 0) label_of_bucket[b] = static_cast<std::int8_t>(next++);
        key = key * 8 + static_cast<std::uint64_t>(label_of_bucket[b]);
      }
      ++counts[key];
      // Odometer over u in [m]^partitions.
      std::size_t pos = 0;
      while (pos < partitions && ++u[pos] == m) u[pos++] = 0;
      if (pos == partitions) break;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  for (const auto& [key, count] : counts) {
    Pattern pattern{};
    std::uint64_t k = key;
    for (std::uint64_t i = n; i-- > 0;) {
      pattern[i] = static_cast<std::uint8_t>(k % 8);
      k /= 8;
    }
    table.patterns.emplace_back(pattern, count);
    table.total += count;
  }
  std::sort(table.patterns.begin(), table.patterns.end());
  return cache.emplace(std::make_pair(n, m), std::move(table)).first->second;
}

} // namespace

ExactMoments exact_variance(Method method, std::span<const double> x,
                            std::span<const double> y, std::uint64_t m) {
  const std::uint64_t n = x.size();
  if (y.size() != n) throw std::invalid_argument("variance: size mismatch");
  if (n == 0 || n > 6) throw std::invalid_argument("variance: enumeration needs n <= 6");
  if (m == 0 || m > n) throw std::invalid_argument("variance: need 1 <= m <= n");
  double wsum = 0.0, wsum2 = 0.0, weight = 0.0;
  if (method == Method::Prune) {
    const double k = static_cast<double>(n) / static_cast<double>(m);
    for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
      if (static_cast<std::uint64_t>(__builtin_popcountll(mask)) != m) continue;
      double acc = 0.0;
      for (std::uint64_t i = 0; i < n; ++i)
        if (mask & (1ull << i)) acc += x[i] * y[i];
      const double est = k * acc;
      wsum += est;
      wsum2 += est * est;
      weight += 1.0;
    }
  } else {
    const PatternTable& table = fold_patterns(n, m);
    for (const auto& [pattern, count] : table.patterns) {
      const double w = static_cast<double>(count);
      for (std::uint64_t signs = 0; signs < (1ull << n); ++signs) {
        std::array<double, 6> bx{}, by{};
        for (std::uint64_t i = 0; i < n; ++i) {
          const double s = (signs >> i) & 1 ? -1.0 : 1.0;
          bx[pattern[i]] += s * x[i];
          by[pattern[i]] += s * y[i];
        }
        double est = 0.0;
        for (std::size_t b = 0; b < 6; ++b) est += bx[b] * by[b];
        wsum += w * est;
        wsum2 += w * est * est;
        weight += w;
      }
    }
  }
  ExactMoments moments;
  moments.mean = wsum / weight;
  moments.variance = wsum2 / weight - moments.mean * moments.mean;
  return moments;
}

void RegressionSpec::validate() const {
  if (n == 0 || m == 0 || m > n)
    throw std::invalid_argument("regression: need 1 <= m <= n");
  if (n % m != 0)
    throw std::invalid_argument("regression: n must be a multiple of m");
  if (rho.size() != n)
    throw std::invalid_argument("regression: rho size must be n");
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0))
    throw std::invalid_argument("regression: sigmas must be positive");
  double ss = 0.0;
  for (double r : rho) ss += r * r;
  if (!(ss < 1.0))
    throw std::invalid_argument("regression: sum of rho^2 must be below 1");
}

double residual_full(const RegressionSpec& spec) {
  spec.validate();
  double ss = 0.0;
  for (double r : spec.rho) ss += r * r;
  return spec.sigma_y * spec.sigma_y * (1.0 - ss);
}

ResidualReport residual_compressed(const RegressionSpec& spec,
                                   const CompressionDraw& draw) {
  spec.validate();
  if (draw.n != spec.n || draw.m != spec.m)
    throw std::invalid_argument("regression: draw shape mismatch");
  const double k = static_cast<double>(spec.n) / static_cast<double>(spec.m);
  const double rho_hat_sq = estimate_norm(draw, spec.rho) / k;
  double ss = 0.0;
  for (double r : spec.rho) ss += r * r;
  ResidualReport report;
  report.value = spec.sigma_y * spec.sigma_y * (1.0 - rho_hat_sq);
  report.relative_excess = (ss - rho_hat_sq) / (1.0 - ss);
  return report;
}

namespace {

// Dense SPD solve via Cholesky, sized for tiny systems.
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b,
                              std::size_t dim) {
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = a[i * dim + j];
      for (std::size_t k = 0; k < j; ++k) acc -= a[i * dim + k] * a[j * dim + k];
      if (i == j) {
        if (!(acc > 0.0)) throw std::runtime_error("regression: singular normal matrix");
        a[i * dim + j] = std::sqrt(acc);
      } else {
        a[i * dim + j] = acc / a[j * dim + j];
      }
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    double acc = b[i];
    for (std::size_t k = 0; k < i; ++k) acc -= a[i * dim + k] * b[k];
    b[i] = acc / a[i * dim + i];
  }
  for (std::size_t i = dim; i-- > 0;) {
    double acc = b[i];
    for (std::size_t k = i + 1; k < dim; ++k) acc -= a[k * dim + i] * b[k];
    b[i] = acc / a[i * dim + i];
  }
  return b;
}

} // namespace

double residual_empirical(const RegressionSpec& spec, const CompressionDraw& draw,
                          std::uint64_t samples, HashSeed seed) {
  spec.validate();
  if (draw.n != spec.n || draw.m != spec.m)
    throw std::invalid_argument("regression: draw shape mismatch");
  if (samples < spec.m + 1)
    throw std::invalid_argument("regression: not enough samples");
  const std::size_t m = spec.m;
  double ss = 0.0;
  for (double r : spec.rho) ss += r * r;
  const double noise = std::sqrt(1.0 - ss);

  std::vector<double> normal_eq(m * m, 0.0);
  std::vector<double> rhs(m, 0.0);
  double syy = 0.0;
  std::vector<double> z(spec.n), f(m);
  Prng rng(seed, stream::data);
  for (std::uint64_t s = 0; s < samples; ++s) {
    for (std::uint64_t i = 0; i < spec.n; ++i) z[i] = rng.next_normal();
    const double z0 = rng.next_normal();
    double y = noise * z0;
    for (std::uint64_t i = 0; i < spec.n; ++i) y += spec.rho[i] * z[i];
    y *= spec.sigma_y;
    std::fill(f.begin(), f.end(), 0.0);
    if (draw.method == Method::Prune) {
      for (std::size_t j = 0; j < m; ++j) f[j] = spec.sigma_x * z[draw.kept[j]];
    } else {
      const Mapping& mapping = *draw.mapping;
      for (std::uint64_t i = 0; i < spec.n; ++i)
        f[mapping.bucket(i)] +=
            static_cast<double>(mapping.sign(i)) * spec.sigma_x * z[i];
    }
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b <= a; ++b) normal_eq[a * m + b] += f[a] * f[b];
      rhs[a] += f[a] * y;
    }
    syy += y * y;
  }
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) normal_eq[a * m + b] = normal_eq[b * m + a];
  const std::vector<double> beta = solve_spd(normal_eq, rhs, m);
  double fit = 0.0;
  for (std::size_t a = 0; a < m; ++a) fit += beta[a] * rhs[a];
  return (syy - fit) / static_cast<double>(samples);
}

} // namespace rps::theory
