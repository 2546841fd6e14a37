#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "otmm/checkpoint.hpp"
#include "otmm/errors.hpp"
#include "otmm/handles.hpp"
#include "otmm/nets.hpp"
#include "otmm/oracle.hpp"
#include "otmm/rng.hpp"

namespace otmm {

/// Deterministic point source: same (seed, n) always yields the same batch.
using Sampler = std::function<PointBatch(uint64_t seed, int n)>;

struct MixtureSpec {
  int dim = 0;
  std::vector<double> weights;
  std::vector<Array> means;  // [1,D] each
  std::vector<Array> covs;   // [D,D] each

  void validate() const {
    if (dim < 1) throw ConfigError("mixture: dimension must be >= 1");
    if (weights.empty() || weights.size() != means.size() || weights.size() != covs.size())
      throw ConfigError("mixture: component counts disagree");
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw ConfigError("mixture: negative weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture: weights must sum to 1");
    for (const Array& c : covs)
      if (!is_spd(c)) throw ConfigError("mixture: covariance not symmetric positive definite");
  }
};

inline MixtureSpec single_gaussian(const Array& mean, const Array& cov) {
  MixtureSpec spec;
  spec.dim = mean.cols();
  spec.weights = {1.0};
  spec.means = {mean};
  spec.covs = {cov};
  spec.validate();
  return spec;
}

/// Component by weight (inverse CDF), then mean + z Sigma^{1/2}.
inline PointBatch sample_mixture(const MixtureSpec& spec, int n, uint64_t seed) {
  if (n < 1) throw ConfigError("sample_mixture: n must be >= 1");
  spec.validate();
  std::vector<Array> factors;
  factors.reserve(spec.covs.size());
  for (const Array& c : spec.covs) factors.push_back(sym_mat_power(c, 0.5));
  Rng rng(seed);
  Array out(n, spec.dim);
  std::vector<double> z(spec.dim);
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    size_t comp = 0;
    for (; comp + 1 < spec.weights.size(); ++comp) {
      if (u < spec.weights[comp]) break;
      u -= spec.weights[comp];
    }
    for (int j = 0; j < spec.dim; ++j) z[j] = rng.normal();
    const Array& f = factors[comp];
    for (int j = 0; j < spec.dim; ++j) {
      double s = spec.means[comp](0, j);
      for (int k = 0; k < spec.dim; ++k) s += z[k] * f(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

inline Sampler mixture_sampler(MixtureSpec spec) {
  spec.validate();
  return [spec = std::move(spec)](uint64_t seed, int n) { return sample_mixture(spec, n, seed); };
}

/// Source sampler, target sampler, and the exact OT map between them.
/// `truth_potential` is the target-side dual potential when it has a closed
/// form (Gaussian pairs); `psi` is the source-side potential whose gradient
/// generated the pair (ICNN pairs).
struct BenchmarkPair {
  std::string kind;  // "gaussian" | "icnn"
  int dim = 0;
  uint64_t seed = 0;
  Sampler source;
  Sampler target;
  std::shared_ptr<const MapFn> truth_map;
  std::shared_ptr<const Potential> truth_potential;
  std::shared_ptr<const StrongPotential> psi;
  MixtureSpec source_spec;
  Array mean_p, cov_p, mean_q, cov_q;  // gaussian kind only
};

inline BenchmarkPair make_gaussian_pair(const Array& mean_p, const Array& cov_p,
                                        const Array& mean_q, const Array& cov_q) {
  if (!is_spd(cov_p) || !is_spd(cov_q))
    throw ConfigError("make_gaussian_pair: covariances must be symmetric positive definite");
  BenchmarkPair pair;
  pair.kind = "gaussian";
  pair.dim = mean_p.cols();
  pair.mean_p = mean_p;
  pair.cov_p = cov_p;
  pair.mean_q = mean_q;
  pair.cov_q = cov_q;
  pair.source_spec = single_gaussian(mean_p, cov_p);
  pair.source = mixture_sampler(pair.source_spec);
  pair.target = mixture_sampler(single_gaussian(mean_q, cov_q));
  auto map = std::make_shared<AffineMap>(gaussian_ot_map(mean_p, cov_p, mean_q, cov_q));
  pair.truth_potential = std::make_shared<QuadraticPotential>(gaussian_dual_potential(*map));
  pair.truth_map = std::move(map);
  return pair;
}

/// Architecture of the ground-truth potential psi*. CELU keeps T* = grad psi*
/// continuous; beta >= 0.1 keeps the pair well conditioned.
struct BenchmarkArch {
  std::vector<int> hidden{64, 64};
  double celu_n = 2.0;
  double beta = 1.0;
  SkipKind skip = SkipKind::Linear;
};

/// Seeded three-component source mixture (means on a ring, random SPD
/// covariances). The construction is pinned by the seed, not by constants.
inline MixtureSpec default_mixture(int dim, int components, uint64_t seed) {
  Rng rng(derive_seed(seed, 0x6d697874ULL));
  MixtureSpec spec;
  spec.dim = dim;
  for (int c = 0; c < components; ++c) {
    Array mean(1, dim);
    const double angle = 2.0 * M_PI * (c + rng.uniform() * 0.25) / components;
    mean(0, 0) = 3.0 * std::cos(angle);
    if (dim > 1) mean(0, 1) = 3.0 * std::sin(angle);
    for (int j = 2; j < dim; ++j) mean(0, j) = rng.normal();
    Array g = rng.normal_array(dim, dim, 0.35);
    Array cov(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        double s = i == j ? 0.4 : 0.0;
        for (int k = 0; k < dim; ++k) s += g(i, k) * g(j, k);
        cov(i, j) = s;
      }
    spec.means.push_back(std::move(mean));
    spec.covs.push_back(std::move(cov));
    spec.weights.push_back(1.0);
  }
  for (auto& w : spec.weights) w /= components;
  double total = 0.0;
  for (size_t i = 0; i + 1 < spec.weights.size(); ++i) total += spec.weights[i];
  spec.weights.back() = 1.0 - total;  // exact sum
  spec.validate();
  return spec;
}

inline Sampler pushforward_sampler(Sampler base, std::shared_ptr<const MapFn> map) {
  return [base = std::move(base), map = std::move(map)](uint64_t seed, int n) {
    return map->apply(base(derive_seed(seed, 0x70757368ULL), n));
  };
}

inline BenchmarkPair make_benchmark_pair_from(MixtureSpec source_spec,
                                              std::shared_ptr<const StrongPotential> psi,
                                              uint64_t seed) {
  BenchmarkPair pair;
  pair.kind = "icnn";
  pair.dim = source_spec.dim;
  pair.seed = seed;
  pair.source_spec = std::move(source_spec);
  pair.source = mixture_sampler(pair.source_spec);
  pair.psi = psi;
  pair.truth_map = std::make_shared<GradientMap>(psi);
  pair.target = pushforward_sampler(pair.source, pair.truth_map);
  return pair;
}

/// Ground truth by construction: draw a random strongly convex psi* and set
/// T* = grad psi*; the target is the pushforward T*#p, so the optimal
/// quadratic-cost map from p to it is exactly T*.
inline BenchmarkPair make_benchmark_pair(int dim, const BenchmarkArch& arch, uint64_t seed) {
  if (arch.beta < 0.1) throw ConfigError("make_benchmark_pair: beta must be >= 0.1");
  auto psi = std::make_shared<StrongPotential>(StrongPotential::init(
      dim, arch.hidden, Activation::Celu, arch.celu_n, arch.skip, arch.beta,
      derive_seed(seed, 0x70736969ULL)));
  return make_benchmark_pair_from(default_mixture(dim, 3, seed), std::move(psi), seed);
}

// ---- benchmark spec files -------------------------------------------------
// Versioned text (schema line first). ICNN pairs store the mixture and point
// at a frozen psi* checkpoint next to the spec file.

namespace detail {

inline void write_array_line(std::ostream& os, const std::string& key, const Array& a) {
  os << key;
  for (size_t i = 0; i < a.size(); ++i) os << " " << fmt17(a[i]);
  os << "\n";
}

inline Array read_array_line(LineReader& r, const std::string& key, int rows, int cols) {
  Array a(rows, cols);
  auto ss = r.expect(key);
  for (size_t i = 0; i < a.size(); ++i)
    if (!(ss >> a[i])) throw ConfigError("benchmark spec: truncated " + key);
  return a;
}

inline std::string dir_of(const std::string& path) {
  const size_t slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

}  // namespace detail

inline void save_benchmark_spec(const std::string& spec_path, const BenchmarkPair& pair,
                                const std::string& checkpoint_name) {
  std::ofstream os(spec_path);
  if (!os) throw ConfigError("cannot write benchmark spec: " + spec_path);
  os << "otmm-benchmark-v1\n";
  os << "kind " << pair.kind << "\n";
  os << "dim " << pair.dim << "\n";
  os << "seed " << pair.seed << "\n";
  if (pair.kind == "gaussian") {
    detail::write_array_line(os, "mean_p", pair.mean_p);
    detail::write_array_line(os, "cov_p", pair.cov_p);
    detail::write_array_line(os, "mean_q", pair.mean_q);
    detail::write_array_line(os, "cov_q", pair.cov_q);
  } else {
    os << "components " << pair.source_spec.weights.size() << "\n";
    for (size_t c = 0; c < pair.source_spec.weights.size(); ++c) {
      os << "weight " << detail::fmt17(pair.source_spec.weights[c]) << "\n";
      detail::write_array_line(os, "mean", pair.source_spec.means[c]);
      detail::write_array_line(os, "cov", pair.source_spec.covs[c]);
    }
    os << "checkpoint " << checkpoint_name << "\n";
    save_checkpoint_file(detail::dir_of(spec_path) + "/" + checkpoint_name, *pair.psi);
  }
}

inline BenchmarkPair load_benchmark_spec(const std::string& spec_path) {
  std::ifstream is(spec_path);
  if (!is) throw ConfigError("cannot open benchmark spec: " + spec_path);
  detail::LineReader r(is);
  r.expect("otmm-benchmark-v1");
  std::string kind;
  r.expect("kind") >> kind;
  int dim = 0;
  r.expect("dim") >> dim;
  uint64_t seed = 0;
  r.expect("seed") >> seed;
  if (kind == "gaussian") {
    Array mean_p = detail::read_array_line(r, "mean_p", 1, dim);
    Array cov_p = detail::read_array_line(r, "cov_p", dim, dim);
    Array mean_q = detail::read_array_line(r, "mean_q", 1, dim);
    Array cov_q = detail::read_array_line(r, "cov_q", dim, dim);
    BenchmarkPair pair = make_gaussian_pair(mean_p, cov_p, mean_q, cov_q);
    pair.seed = seed;
    return pair;
  }
  if (kind != "icnn") throw ConfigError("benchmark spec: unknown kind " + kind);
  int components = 0;
  r.expect("components") >> components;
  MixtureSpec spec;
  spec.dim = dim;
  for (int c = 0; c < components; ++c) {
    double w = 0.0;
    r.expect("weight") >> w;
    spec.weights.push_back(w);
    spec.means.push_back(detail::read_array_line(r, "mean", 1, dim));
    spec.covs.push_back(detail::read_array_line(r, "cov", dim, dim));
  }
  std::string ckpt;
  r.expect("checkpoint") >> ckpt;
  auto psi = std::make_shared<StrongPotential>(
      load_potential_checkpoint_file(detail::dir_of(spec_path) + "/" + ckpt));
  BenchmarkPair pair = make_benchmark_pair_from(std::move(spec), std::move(psi), seed);
  return pair;
}

}  // namespace otmm
