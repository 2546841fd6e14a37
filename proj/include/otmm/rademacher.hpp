#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "otmm/adam.hpp"
#include "otmm/bench.hpp"
#include "otmm/errors.hpp"
#include "otmm/metrics.hpp"
#include "otmm/nets.hpp"

namespace otmm {

/// A parametric function class for the complexity estimators: either the
/// potential class F = {icnn + beta/2 ||.||^2} or the composite class
/// H = {x -> <x,T(x)> - phi(T(x))}. Parameter arrays are kept inside a
/// Frobenius ball of radius `norm_bound` (the class must stay bounded for the
/// sup to be meaningful). The sup over the class is approximated by Adam
/// ascent with restarts, so every estimate is a lower bound on the true sup.
struct FunctionClassSpec {
  enum class Kind { PotentialF, CompositeH };
  Kind kind = Kind::PotentialF;
  int dim = 2;
  std::vector<int> pot_hidden{8};
  Activation act = Activation::Celu;
  double celu_n = 1.0;
  SkipKind skip = SkipKind::Linear;
  double beta = 0.1;
  std::vector<int> map_hidden{8};  // CompositeH only
  double norm_bound = 1.0;         // per-array Frobenius bound; <= 0 disables
  int ascent_iters = 200;          // 0 freezes the initial member (singleton class)
  double ascent_lr = 0.02;
  int restarts = 8;
};

/// Mean estimate over sigma draws with its standard error.
struct ComplexityEstimate {
  double estimate = 0.0;  // lower-bound estimate of the complexity
  double se = 0.0;        // sample std over draws / sqrt(draws)
  int draws = 0;
  int sample_size = 0;
  int flagged = 0;  // diverged draws, excluded with a warning
};

namespace detail {

struct ClassMember {
  StrongPotential pot;
  MapNet map;  // CompositeH only
};

inline ClassMember init_member(const FunctionClassSpec& spec, uint64_t seed) {
  ClassMember m;
  m.pot = StrongPotential::init(spec.dim, spec.pot_hidden, spec.act, spec.celu_n, spec.skip,
                                spec.beta, derive_seed(seed, 0xf));
  clip_frobenius(m.pot.params(), spec.norm_bound);
  if (spec.kind == FunctionClassSpec::Kind::CompositeH) {
    m.map = MapNet::init(spec.dim, spec.map_hidden, derive_seed(seed, 0x1d));
    clip_frobenius(m.map.params(), spec.norm_bound);
  }
  return m;
}

/// Weighted objective sum_i w_i f(x_i) for the current member; f is phi for
/// class F and h(x) = <x,T(x)> - phi(T(x)) for class H.
inline double weighted_objective(const FunctionClassSpec& spec, ClassMember& m, const Array& x,
                                 const Array& w, bool update, Adam* pot_opt, Adam* map_opt) {
  Graph g;
  const int xin = g.input(x, "x");
  const int win = g.input(w, "w");
  int vals;
  if (spec.kind == FunctionClassSpec::Kind::PotentialF) {
    vals = m.pot.build(g, xin);
  } else {
    const int tx = m.map.build(g, xin);
    vals = g.sub(g.dot(xin, tx), m.pot.build(g, tx));
  }
  const int obj = g.sum(g.dot(vals, win));
  g.forward();
  if (update) {
    g.backward(obj);
    pot_opt->step(m.pot.params(), g.param_grads(m.pot.params()), /*direction=*/+1.0);
    m.pot.project_nonneg();
    clip_frobenius(m.pot.params(), spec.norm_bound);
    if (spec.kind == FunctionClassSpec::Kind::CompositeH) {
      map_opt->step(m.map.params(), g.param_grads(m.map.params()), /*direction=*/+1.0);
      clip_frobenius(m.map.params(), spec.norm_bound);
    }
  }
  return g.scalar(obj);
}

/// Approximate sup over the class of sum_i w_i f(x_i) by multi-restart ascent.
inline double approximate_sup(const FunctionClassSpec& spec, const Array& x, const Array& w,
                              uint64_t seed, bool* diverged) {
  double best = -1e300;
  for (int r = 0; r < spec.restarts; ++r) {
    ClassMember m = init_member(spec, derive_seed(seed, 100 + r));
    Adam pot_opt(AdamConfig{spec.ascent_lr, 0.9, 0.999, 1e-8});
    Adam map_opt(AdamConfig{spec.ascent_lr, 0.9, 0.999, 1e-8});
    double value = weighted_objective(spec, m, x, w, false, nullptr, nullptr);
    for (int it = 0; it < spec.ascent_iters; ++it)
      value = weighted_objective(spec, m, x, w, true, &pot_opt, &map_opt);
    // the last update may overshoot; score the final member as-is
    value = weighted_objective(spec, m, x, w, false, nullptr, nullptr);
    if (!std::isfinite(value)) {
      if (diverged) *diverged = true;
      continue;
    }
    best = std::max(best, value);
  }
  if (best == -1e300) {
    if (diverged) *diverged = true;
    return 0.0;
  }
  return best;
}

}  // namespace detail

/// Empirical Rademacher complexity estimate of the class on a fixed sample:
/// mean over S sigma draws of the (ascent-approximated) sup of
/// (1/M) sum_m sigma_m f(y_m). Reported as a lower-bound estimate.
inline ComplexityEstimate empirical_rademacher(const FunctionClassSpec& spec,
                                               const PointBatch& sample, int s_draws,
                                               uint64_t seed) {
  if (s_draws < 1) throw ConfigError("empirical_rademacher: S must be >= 1");
  if (sample.rows() < 1) throw ConfigError("empirical_rademacher: empty sample");
  const int m = sample.rows();
  Rng rng(derive_seed(seed, 0x7261640ULL));
  std::vector<double> values;
  int flagged = 0;
  for (int s = 0; s < s_draws; ++s) {
    Array w(m, 1);
    for (int i = 0; i < m; ++i) w(i, 0) = rng.sign() / m;
    bool diverged = false;
    const double sup = detail::approximate_sup(spec, sample, w, derive_seed(seed, 7000 + s),
                                               &diverged);
    if (diverged) {
      ++flagged;
      continue;
    }
    values.push_back(sup);
  }
  if (values.empty()) throw NumericalError("empirical_rademacher: every draw diverged");
  const McEstimate e = mc_mean(values);
  ComplexityEstimate out;
  out.estimate = e.mean;
  out.se = e.se;
  out.draws = static_cast<int>(values.size());
  out.sample_size = m;
  out.flagged = flagged;
  return out;
}

/// Representativeness of `sample` w.r.t. a reference sampler:
/// sup over the class of |reference mean of f - sample mean of f|,
/// approximated by running the ascent on both signs of the difference.
inline double representativeness(const FunctionClassSpec& spec, const PointBatch& sample,
                                 const Sampler& reference, int n_ref, uint64_t seed) {
  if (sample.rows() < 1) throw ConfigError("representativeness: empty sample");
  const int wanted = std::max(10 * sample.rows(), 10000);
  if (n_ref <= 0) n_ref = wanted;
  const Array ref = reference(derive_seed(seed, 0x726566ULL), n_ref);
  // single stacked input; weights +1/n_ref on reference rows, -1/M on sample
  Array x(ref.rows() + sample.rows(), sample.cols());
  Array w(x.rows(), 1);
  for (int i = 0; i < ref.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) x(i, j) = ref(i, j);
    w(i, 0) = 1.0 / ref.rows();
  }
  for (int i = 0; i < sample.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) x(ref.rows() + i, j) = sample(i, j);
    w(ref.rows() + i, 0) = -1.0 / sample.rows();
  }
  double best = 0.0;
  for (int sign = 0; sign < 2; ++sign) {
    const double sup =
        detail::approximate_sup(spec, x, w, derive_seed(seed, 9000 + sign), nullptr);
    best = std::max(best, sup);
    for (auto& v : w) v = -v;
  }
  return best;
}

/// Exact empirical Rademacher complexity of a finite explicit class
/// (enumeration over members); used to test the estimator's invariants.
inline ComplexityEstimate empirical_rademacher_finite(
    const std::vector<std::function<Array(const PointBatch&)>>& members, const PointBatch& sample,
    int s_draws, uint64_t seed) {
  if (members.empty()) throw ConfigError("empirical_rademacher_finite: empty class");
  if (s_draws < 1) throw ConfigError("empirical_rademacher_finite: S must be >= 1");
  const int m = sample.rows();
  std::vector<Array> values;
  values.reserve(members.size());
  for (const auto& f : members) values.push_back(f(sample));
  Rng rng(derive_seed(seed, 0x7261640ULL));
  std::vector<double> sups;
  for (int s = 0; s < s_draws; ++s) {
    std::vector<double> sigma(m);
    for (int i = 0; i < m; ++i) sigma[i] = rng.sign();
    double sup = -1e300;
    for (const Array& v : values) {
      double acc = 0.0;
      for (int i = 0; i < m; ++i) acc += sigma[i] * v(i, 0);
      sup = std::max(sup, acc / m);
    }
    sups.push_back(sup);
  }
  const McEstimate e = mc_mean(sups);
  ComplexityEstimate out;
  out.estimate = e.mean;
  out.se = e.se;
  out.draws = s_draws;
  out.sample_size = m;
  return out;
}

}  // namespace otmm
