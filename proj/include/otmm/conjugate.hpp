#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "otmm/errors.hpp"
#include "otmm/handles.hpp"
#include "otmm/rng.hpp"

namespace otmm {

/// Settings for the inner maximization y -> <x,y> - phi(y) over the box
/// [-R, R]^D. The objective is beta(phi)-strongly concave, so the maximizer
/// is unique and plain projected gradient ascent converges linearly.
struct ConjugateConfig {
  int max_iters = 500;
  double grad_tol = 1e-6;
  int restarts = 4;
  bool backtracking_only = false;  // skip the 1/(beta+L) step estimate
  double box_radius = 10.0;        // R > 0

  void validate() const {
    if (!(grad_tol > 0.0)) throw ConfigError("conjugate: tolerance must be > 0");
    if (restarts < 1) throw ConfigError("conjugate: restarts must be >= 1");
    if (!(box_radius > 0.0)) throw ConfigError("conjugate: box radius must be > 0");
    if (max_iters < 1) throw ConfigError("conjugate: max_iters must be >= 1");
  }
};

struct ConjugateResult {
  double value = 0.0;
  Array argmax;         // [1,D]
  bool converged = false;
  bool boundary_hit = false;
  int iters = 0;
};

struct ConjugateBatchResult {
  Array values;    // [n,1]
  Array argmax;    // [n,D]
  int not_converged = 0;
  int boundary_hits = 0;
};

/// R = 1.5 x the largest sample norm; realizes the compact target support as
/// a box that comfortably contains the data.
inline double box_radius_for(const Array& target_samples) {
  double worst = 0.0;
  for (int i = 0; i < target_samples.rows(); ++i)
    worst = std::max(worst,
                     std::sqrt(sqnorm_row(target_samples.row_ptr(i), target_samples.cols())));
  return 1.5 * worst;
}

namespace detail {

inline void clamp_box(Array& y, double r) {
  for (auto& v : y) v = v > r ? r : (v < -r ? -r : v);
}

/// Largest Hessian eigenvalue of phi near y0, by power iteration on
/// finite-difference Hessian-vector products.
inline double power_iteration_lipschitz(const Potential& pot, const Array& y0, int iters = 8) {
  const int d = y0.cols();
  Rng rng(0x4c697073ULL);
  Array v(1, d);
  for (auto& x : v) x = rng.normal();
  double vnorm = std::sqrt(sqnorm_row(v.row_ptr(0), d));
  if (vnorm == 0.0) return 0.0;
  for (auto& x : v) x /= vnorm;
  Array g0;
  pot.eval_grad(y0, g0);
  const double eps = 1e-4 * (1.0 + std::sqrt(sqnorm_row(y0.row_ptr(0), d)));
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    Array yp = y0;
    for (int j = 0; j < d; ++j) yp(0, j) += eps * v(0, j);
    Array gp;
    pot.eval_grad(yp, gp);
    Array hv(1, d);
    for (int j = 0; j < d; ++j) hv(0, j) = (gp(0, j) - g0(0, j)) / eps;
    lambda = std::sqrt(sqnorm_row(hv.row_ptr(0), d));
    if (lambda < 1e-12) return 0.0;
    for (int j = 0; j < d; ++j) v(0, j) = hv(0, j) / lambda;
  }
  return lambda;
}

/// Ascend f(y) = <x,y> - phi(y) from y0. Fixed step 1/(beta + L) with
/// per-iterate halving whenever a step fails to increase f.
inline ConjugateResult ascend(const Potential& pot, const double* x, Array y,
                              const ConjugateConfig& cfg, double step0) {
  const int d = y.cols();
  const double r = cfg.box_radius;
  clamp_box(y, r);

  auto objective = [&](const Array& yy, Array& grad) {
    Array val = pot.eval_grad(yy, grad);
    double f = -val(0, 0);
    for (int j = 0; j < d; ++j) {
      f += x[j] * yy(0, j);
      grad(0, j) = x[j] - grad(0, j);  // grad of f
    }
    return f;
  };

  Array grad(1, d);
  double f = objective(y, grad);
  double step = step0;
  ConjugateResult res;
  for (res.iters = 0; res.iters < cfg.max_iters; ++res.iters) {
    // effective (projected) gradient: zero where the box is active
    double gnorm2 = 0.0;
    for (int j = 0; j < d; ++j) {
      const bool blocked = (y(0, j) >= r && grad(0, j) > 0.0) || (y(0, j) <= -r && grad(0, j) < 0.0);
      if (!blocked) gnorm2 += grad(0, j) * grad(0, j);
    }
    if (std::sqrt(gnorm2) <= cfg.grad_tol) {
      res.converged = true;
      break;
    }
    Array ytry(1, d);
    double ftry = 0.0;
    Array gtry(1, d);
    bool accepted = false;
    while (step > 1e-14 * step0 + 1e-300) {
      for (int j = 0; j < d; ++j) ytry(0, j) = y(0, j) + step * grad(0, j);
      clamp_box(ytry, r);
      ftry = objective(ytry, gtry);
      if (!std::isfinite(ftry))
        throw NumericalError("conjugate: non-finite objective at iterate " +
                             std::to_string(res.iters));
      if (ftry >= f - 1e-14 * (1.0 + std::abs(f))) {
        accepted = true;
        break;
      }
      step *= 0.5;  // fall back to backtracking on non-monotone steps
    }
    if (!accepted) break;
    y = ytry;
    f = ftry;
    grad = gtry;
  }
  for (int j = 0; j < d; ++j)
    if (std::abs(y(0, j)) >= r * (1.0 - 1e-12)) res.boundary_hit = true;
  res.argmax = y;
  // value = <x, argmax> - phi(argmax)
  Array val = pot.eval(y);
  res.value = dot_rows(x, y.row_ptr(0), d) - val(0, 0);
  if (!std::isfinite(res.value)) throw NumericalError("conjugate: non-finite value");
  return res;
}

inline double initial_step(const Potential& pot, const Array& y0, const ConjugateConfig& cfg) {
  if (cfg.backtracking_only) return 1.0;
  const double lhat = power_iteration_lipschitz(pot, y0);
  // phi's Hessian is H_icnn + beta I, so lhat already includes beta; guard
  // against underestimates with a small inflation.
  return 1.0 / (1.05 * std::max(lhat, pot.beta()) + 1e-12);
}

}  // namespace detail

/// One ascent per restart: start 0 at clamp(x), the rest at distinct corners
/// of the box (sign pattern from the restart index).
inline std::vector<ConjugateResult> conjugate_restarts(const Potential& pot, const Array& x,
                                                       const ConjugateConfig& cfg) {
  cfg.validate();
  if (x.rows() != 1 || x.cols() != pot.dim())
    throw ShapeError("conjugate_value: x is " + x.shape_str() + ", expected [1 x " +
                     std::to_string(pot.dim()) + "]");
  if (!(pot.beta() > 0.0))
    throw ConfigError("conjugate_value: potential must have beta > 0");
  const int d = pot.dim();
  std::vector<ConjugateResult> out;
  for (int s = 0; s < cfg.restarts; ++s) {
    Array y0(1, d);
    if (s == 0) {
      y0 = x;
    } else {
      for (int j = 0; j < d; ++j)
        y0(0, j) = ((static_cast<unsigned>(s - 1) >> j) & 1u) ? cfg.box_radius : -cfg.box_radius;
    }
    detail::clamp_box(y0, cfg.box_radius);
    const double step = detail::initial_step(pot, y0, cfg);
    out.push_back(detail::ascend(pot, x.row_ptr(0), y0, cfg, step));
  }
  return out;
}

/// Conjugate value phibar(x) = max_y <x,y> - phi(y) and its argmax (the map
/// T_phi(x)). Takes the best over restarts.
inline ConjugateResult conjugate_value(const Potential& pot, const Array& x,
                                       const ConjugateConfig& cfg) {
  auto all = conjugate_restarts(pot, x, cfg);
  int best = 0;
  for (size_t i = 1; i < all.size(); ++i)
    if (all[i].value > all[best].value) best = static_cast<int>(i);
  return all[best];
}

/// Chained batch evaluation: sample i warm-starts at the previous argmax
/// shifted by the x difference. Falls back to full restarts when a chained
/// solve fails to converge.
inline ConjugateBatchResult conjugate_batch(const Potential& pot, const Array& x,
                                            const ConjugateConfig& cfg) {
  cfg.validate();
  const int n = x.rows(), d = x.cols();
  if (d != pot.dim()) throw ShapeError("conjugate_batch: dimension mismatch");
  ConjugateBatchResult out;
  out.values = Array(n, 1);
  out.argmax = Array(n, d);
  Array prev_x(1, d), prev_y(1, d);
  bool have_prev = false;
  double step = 0.0;
  for (int i = 0; i < n; ++i) {
    Array xi(1, d);
    for (int j = 0; j < d; ++j) xi(0, j) = x(i, j);
    ConjugateResult r;
    if (have_prev) {
      Array y0 = prev_y;
      for (int j = 0; j < d; ++j) y0(0, j) += xi(0, j) - prev_x(0, j);
      detail::clamp_box(y0, cfg.box_radius);
      r = detail::ascend(pot, xi.row_ptr(0), y0, cfg, step);
      if (!r.converged) r = conjugate_value(pot, xi, cfg);
    } else {
      step = detail::initial_step(pot, xi, cfg);
      r = conjugate_value(pot, xi, cfg);
    }
    out.values(i, 0) = r.value;
    for (int j = 0; j < d; ++j) out.argmax(i, j) = r.argmax(0, j);
    if (!r.converged) ++out.not_converged;
    if (r.boundary_hit) ++out.boundary_hits;
    prev_x = xi;
    prev_y = r.argmax;
    have_prev = true;
  }
  return out;
}

}  // namespace otmm
