#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "otmm/bench.hpp"
#include "otmm/conjugate.hpp"
#include "otmm/errors.hpp"
#include "otmm/handles.hpp"

namespace otmm {

/// Monte-Carlo mean with its standard error.
struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
};

inline McEstimate mc_mean(const std::vector<double>& xs) {
  McEstimate e;
  e.n = static_cast<int>(xs.size());
  if (e.n == 0) return e;
  e.mean = neumaier_sum(xs.data(), xs.size()) / e.n;
  if (e.n > 1) {
    std::vector<double> sq(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - e.mean) * (xs[i] - e.mean);
    const double var = neumaier_sum(sq.data(), sq.size()) / (e.n - 1);
    e.se = std::sqrt(var / e.n);
  }
  return e;
}

/// Monte-Carlo estimate of ||T - T*||^2_{L2(p)} on a shared sample set.
inline McEstimate map_l2_error_mc(const MapFn& map, const MapFn& truth, const PointBatch& x) {
  const Array a = map.apply(x);
  const Array b = truth.apply(x);
  std::vector<double> sq(x.rows());
  for (int i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < x.cols(); ++j) {
      const double diff = a(i, j) - b(i, j);
      s += diff * diff;
    }
    sq[i] = s;
  }
  return mc_mean(sq);
}

inline double map_l2_error(const MapFn& map, const MapFn& truth, const Sampler& source,
                           int n_test, uint64_t seed) {
  if (n_test < 1) throw ConfigError("map_l2_error: n_test must be >= 1");
  return map_l2_error_mc(map, truth, source(seed, n_test)).mean;
}

/// Monte-Carlo value of the population functional
///   L(phi, T) = int [<x,T(x)> - phi(T(x))] p + int phi q.
inline double functional_L(const Potential& pot, const MapFn& map, const Sampler& p,
                           const Sampler& q, int n, uint64_t seed) {
  if (n < 1) throw ConfigError("functional_L: n must be >= 1");
  const Array x = p(derive_seed(seed, 1), n);
  const Array y = q(derive_seed(seed, 2), n);
  const Array tx = map.apply(x);
  const Array phi_tx = pot.eval(tx);
  const Array phi_y = pot.eval(y);
  std::vector<double> terms(n);
  for (int i = 0; i < n; ++i)
    terms[i] = dot_rows(x.row_ptr(i), tx.row_ptr(i), x.cols()) - phi_tx(i, 0);
  return neumaier_sum(terms.data(), terms.size()) / n + neumaier_mean(phi_y);
}

enum class CostKind { Quadratic, ScalarProduct };

inline double transport_cost_on(const MapFn& map, const PointBatch& x, CostKind kind) {
  const Array tx = map.apply(x);
  std::vector<double> terms(x.rows());
  for (int i = 0; i < x.rows(); ++i) {
    if (kind == CostKind::Quadratic) {
      double s = 0.0;
      for (int j = 0; j < x.cols(); ++j) {
        const double diff = x(i, j) - tx(i, j);
        s += diff * diff;
      }
      terms[i] = 0.5 * s;
    } else {
      terms[i] = -dot_rows(x.row_ptr(i), tx.row_ptr(i), x.cols());
    }
  }
  return neumaier_sum(terms.data(), terms.size()) / x.rows();
}

inline double transport_cost(const MapFn& map, const Sampler& source, int n, CostKind kind,
                             uint64_t seed) {
  if (n < 1) throw ConfigError("transport_cost: n must be >= 1");
  return transport_cost_on(map, source(seed, n), kind);
}

/// Inner/outer duality gaps of a candidate (phi, T) on a benchmark pair.
///
/// E1 = E_x[f_x(T_phi(x)) - f_x(T(x))] and
/// E2 = E_x[f_x(T_phi(x)) - f_x(T*(x))] with f_x(y) = <x,y> - phi(y) and
/// T_phi from the conjugate solver; the E2 form uses T*#p = q to replace the
/// target integral of phi with a same-sample pushforward evaluation. Both are
/// maxima minus feasible evaluations, so they are nonnegative up to the
/// conjugate tolerance. The squared L2(p) map error is bounded by
/// (4/beta)(E1 + E2).
///
/// The individual approximation/estimation components of the bound involve
/// population optima over whole function classes and have no computable
/// handle; only the two observable gaps are reported.
struct GapReport {
  McEstimate e1;
  McEstimate e2;
  double beta = 0.0;
  double bound = 0.0;           // (4/beta)(E1 + E2)
  McEstimate map_error;         // vs the pair's ground truth
  int samples = 0;
  int conjugate_not_converged = 0;
  int conjugate_boundary_hits = 0;
  double gap_tolerance = 0.0;   // E1, E2 >= -gap_tolerance up to MC noise
};

inline GapReport duality_gaps(const Potential& pot, const MapFn& map, const BenchmarkPair& pair,
                              ConjugateConfig cfg, int n_mc, uint64_t seed) {
  if (!(pot.beta() > 0.0)) throw ConfigError("duality_gaps: potential must have beta > 0");
  const Array x = pair.source(derive_seed(seed, 0x67617073ULL), n_mc);
  const Array t_hat = map.apply(x);
  const Array t_star = pair.truth_map->apply(x);

  // widen the box if the candidate maps outside it
  cfg.box_radius = std::max({cfg.box_radius, box_radius_for(t_hat), box_radius_for(t_star)});

  const ConjugateBatchResult conj = conjugate_batch(pot, x, cfg);
  const Array phi_that = pot.eval(t_hat);
  const Array phi_tstar = pot.eval(t_star);

  std::vector<double> e1(n_mc), e2(n_mc), err(n_mc);
  for (int i = 0; i < n_mc; ++i) {
    const double fx_best = conj.values(i, 0);
    const double fx_that =
        dot_rows(x.row_ptr(i), t_hat.row_ptr(i), x.cols()) - phi_that(i, 0);
    const double fx_tstar =
        dot_rows(x.row_ptr(i), t_star.row_ptr(i), x.cols()) - phi_tstar(i, 0);
    e1[i] = fx_best - fx_that;
    e2[i] = fx_best - fx_tstar;
    double s = 0.0;
    for (int j = 0; j < x.cols(); ++j) {
      const double diff = t_hat(i, j) - t_star(i, j);
      s += diff * diff;
    }
    err[i] = s;
  }

  GapReport rep;
  rep.e1 = mc_mean(e1);
  rep.e2 = mc_mean(e2);
  rep.beta = pot.beta();
  rep.bound = 4.0 / rep.beta * (rep.e1.mean + rep.e2.mean);
  rep.map_error = mc_mean(err);
  rep.samples = n_mc;
  rep.conjugate_not_converged = conj.not_converged;
  rep.conjugate_boundary_hits = conj.boundary_hits;
  // a solve stopping at gradient norm g underestimates the max by <= g^2/(2 beta)
  rep.gap_tolerance = cfg.grad_tol * cfg.grad_tol / (2.0 * pot.beta()) + 1e-12;
  return rep;
}

inline std::string to_text(const GapReport& r) {
  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "E1 (inner gap):    %.6e +- %.2e\n", r.e1.mean, r.e1.se);
  s += buf;
  std::snprintf(buf, sizeof buf, "E2 (outer gap):    %.6e +- %.2e\n", r.e2.mean, r.e2.se);
  s += buf;
  std::snprintf(buf, sizeof buf, "beta:              %.6g\n", r.beta);
  s += buf;
  std::snprintf(buf, sizeof buf, "(4/beta)(E1+E2):   %.6e\n", r.bound);
  s += buf;
  std::snprintf(buf, sizeof buf, "map L2 error:      %.6e +- %.2e\n", r.map_error.mean,
                r.map_error.se);
  s += buf;
  std::snprintf(buf, sizeof buf, "samples:           %d\n", r.samples);
  s += buf;
  if (r.conjugate_not_converged > 0) {
    std::snprintf(buf, sizeof buf, "WARNING: %d conjugate solves did not converge\n",
                  r.conjugate_not_converged);
    s += buf;
  }
  if (r.conjugate_boundary_hits > 0) {
    std::snprintf(buf, sizeof buf, "WARNING: %d conjugate argmaxes hit the search box boundary\n",
                  r.conjugate_boundary_hits);
    s += buf;
  }
  return s;
}

/// Ordinary least squares on (log10 n, log10 error).
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
  int points = 0;
};

inline RateFit rate_fit(const std::vector<std::pair<double, double>>& n_error) {
  if (n_error.size() < 2) throw ConfigError("rate_fit: need at least 2 points");
  std::vector<double> lx, ly;
  for (const auto& [n, err] : n_error) {
    if (!(n > 0.0) || !(err > 0.0))
      throw ConfigError("rate_fit: points must be positive");
    lx.push_back(std::log10(n));
    ly.push_back(std::log10(err));
  }
  const int m = static_cast<int>(lx.size());
  const double mx = neumaier_sum(lx.data(), m) / m;
  const double my = neumaier_sum(ly.data(), m) / m;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("rate_fit: all sample sizes equal");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (int i = 0; i < m; ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    rss += r * r;
  }
  fit.residual_rms = std::sqrt(rss / m);
  fit.points = m;
  return fit;
}

namespace detail {
inline std::vector<double> ranks(const std::vector<double>& xs) {
  const int n = static_cast<int>(xs.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return xs[a] < xs[b]; });
  std::vector<double> rank(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;  // average rank for ties
    for (int k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}
}  // namespace detail

/// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw ConfigError("spearman: need two same-length series");
  const std::vector<double> rx = detail::ranks(xs);
  const std::vector<double> ry = detail::ranks(ys);
  const int n = static_cast<int>(xs.size());
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace otmm
