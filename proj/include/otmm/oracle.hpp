#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "otmm/array.hpp"
#include "otmm/errors.hpp"
#include "otmm/handles.hpp"

namespace otmm {

// Independent ground-truth solvers. Everything here is exact (up to the
// stated iteration tolerances) and kept free of the learned-solver code paths
// so it can act as an oracle for them.

struct SymEig {
  std::vector<double> values;  // ascending
  Array vectors;               // columns are eigenvectors
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix; iterates until the
/// off-diagonal Frobenius norm drops below 1e-12 (dimensions here are tiny).
inline SymEig sym_eig(const Array& m) {
  const int d = m.rows();
  if (m.cols() != d) throw ShapeError("sym_eig: matrix not square " + m.shape_str());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-9 * (1.0 + std::abs(m(i, j))))
        throw ConfigError("sym_eig: matrix not symmetric");
  Array a = m;
  Array v(d, d);
  for (int i = 0; i < d; ++i) v(i, i) = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) off += 2.0 * a(i, j) * a(i, j);
    if (std::sqrt(off) < 1e-12) break;
    for (int p = 0; p < d - 1; ++p) {
      for (int q = p + 1; q < d; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < d; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < d; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < d; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  // sort ascending, permute columns accordingly
  std::vector<int> order(d);
  for (int i = 0; i < d; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) < a(y, y); });
  SymEig out;
  out.values.resize(d);
  out.vectors = Array(d, d);
  for (int j = 0; j < d; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (int i = 0; i < d; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

/// m^power for symmetric positive definite m via eigendecomposition.
/// Throws NumericalError when an eigenvalue is <= 1e-12 (near-singular).
inline Array sym_mat_power(const Array& m, double power) {
  const SymEig eig = sym_eig(m);
  const int d = m.rows();
  for (double w : eig.values)
    if (w <= 1e-12) throw NumericalError("sym_mat_power: near-singular matrix (eigenvalue <= 1e-12)");
  Array out(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k)
        s += eig.vectors(i, k) * std::pow(eig.values[k], power) * eig.vectors(j, k);
      out(i, j) = s;
    }
  return out;
}

inline bool is_spd(const Array& m) {
  if (m.rows() != m.cols()) return false;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-9 * (1.0 + std::abs(m(i, j)))) return false;
  for (double w : sym_eig(m).values)
    if (w <= 1e-12) return false;
  return true;
}

/// T(x) = x A + b (row-vector convention).
class AffineMap final : public MapFn {
 public:
  AffineMap(Array a, Array b) : a_(std::move(a)), b_(std::move(b)) {}

  int dim() const override { return a_.rows(); }

  Array apply(const Array& x) const override {
    if (x.cols() != a_.rows()) throw ShapeError("AffineMap::apply: dimension mismatch");
    Array y(x.rows(), a_.cols());
    gemm_nn(x, a_, y);
    for (int i = 0; i < y.rows(); ++i)
      for (int j = 0; j < y.cols(); ++j) y(i, j) += b_(0, j);
    return y;
  }

  const Array& matrix() const { return a_; }
  const Array& offset() const { return b_; }

 private:
  Array a_;  // [D,D], symmetric positive definite for OT maps
  Array b_;  // [1,D]
};

/// Closed-form OT map between Gaussians (quadratic cost):
///   A = Sp^{-1/2} (Sp^{1/2} Sq Sp^{1/2})^{1/2} Sp^{-1/2},  b = mq - A mp.
inline AffineMap gaussian_ot_map(const Array& mean_p, const Array& cov_p, const Array& mean_q,
                                 const Array& cov_q) {
  const int d = cov_p.rows();
  const Array sp_half = sym_mat_power(cov_p, 0.5);
  const Array sp_neg_half = sym_mat_power(cov_p, -0.5);
  Array inner(d, d), tmp(d, d);
  gemm_nn(sp_half, cov_q, tmp);
  gemm_nn(tmp, sp_half, inner);
  // symmetrize against roundoff before the matrix square root
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const double s = 0.5 * (inner(i, j) + inner(j, i));
      inner(i, j) = inner(j, i) = s;
    }
  const Array mid = sym_mat_power(inner, 0.5);
  Array left(d, d), a(d, d);
  gemm_nn(sp_neg_half, mid, left);
  gemm_nn(left, sp_neg_half, a);
  Array b(1, d);
  for (int j = 0; j < d; ++j) {
    double s = mean_q(0, j);
    for (int k = 0; k < d; ++k) s -= mean_p(0, k) * a(k, j);
    b(0, j) = s;
  }
  return AffineMap(a, b);
}

/// Target-side potential for a Gaussian pair whose OT map is T*(x) = xA + b:
/// phi*(y) = 1/2 (y-b) A^{-1} (y-b)ᵀ, the function with grad phi*(T*(x)) = x.
inline QuadraticPotential gaussian_dual_potential(const AffineMap& map) {
  const Array q = sym_mat_power(map.matrix(), -1.0);
  const int d = q.rows();
  Array l(1, d);
  double c = 0.0;
  const Array& b = map.offset();
  for (int i = 0; i < d; ++i) {
    double qb = 0.0;
    for (int j = 0; j < d; ++j) qb += q(i, j) * b(0, j);
    l(0, i) = -qb;
    c += 0.5 * b(0, i) * qb;
  }
  const double beta = sym_eig(q).values.front();
  return QuadraticPotential(q, l, c, beta);
}

/// 1D quadratic-cost OT between equal-size samples: the i-th order statistic
/// of X maps to the i-th order statistic of Y. New points use piecewise-linear
/// interpolation of the quantile pairing (linear extension at the ends).
class MonotoneMap1d final : public MapFn {
 public:
  MonotoneMap1d(std::vector<double> xs, std::vector<double> ys)
      : xs_(std::move(xs)), ys_(std::move(ys)) {
    if (xs_.size() != ys_.size()) throw ConfigError("monotone_map_1d: N != M");
    if (xs_.empty()) throw ConfigError("monotone_map_1d: empty input");
    if (!std::is_sorted(xs_.begin(), xs_.end()) || !std::is_sorted(ys_.begin(), ys_.end()))
      throw ConfigError("monotone_map_1d: inputs must be sorted ascending");
  }

  int dim() const override { return 1; }

  double at(double x) const {
    const size_t n = xs_.size();
    if (n == 1) return ys_[0];
    size_t hi = std::lower_bound(xs_.begin(), xs_.end(), x) - xs_.begin();
    if (hi == 0) hi = 1;
    if (hi == n) hi = n - 1;
    const size_t lo = hi - 1;
    if (x == xs_[hi]) return ys_[hi];  // sample points map exactly
    if (x == xs_[lo]) return ys_[lo];
    const double dx = xs_[hi] - xs_[lo];
    if (dx <= 0.0) return x <= xs_[lo] ? ys_[lo] : ys_[hi];
    const double t = (x - xs_[lo]) / dx;
    return ys_[lo] + t * (ys_[hi] - ys_[lo]);
  }

  Array apply(const Array& x) const override {
    if (x.cols() != 1) throw ShapeError("MonotoneMap1d::apply: expected [n x 1]");
    Array y(x.rows(), 1);
    for (int i = 0; i < x.rows(); ++i) y(i, 0) = at(x(i, 0));
    return y;
  }

 private:
  std::vector<double> xs_, ys_;
};

inline MonotoneMap1d monotone_map_1d(std::vector<double> sorted_x, std::vector<double> sorted_y) {
  return MonotoneMap1d(std::move(sorted_x), std::move(sorted_y));
}

struct AssignmentResult {
  std::vector<int> perm;  // x_i pairs with y_{perm[i]}
  double cost = 0.0;      // (1/N) sum 1/2 ||x_i - y_{perm(i)}||^2
};

/// Exact minimizer of the empirical quadratic matching cost via the
/// augmenting-path (Hungarian) algorithm; O(n^3), n <= 256.
inline AssignmentResult discrete_assignment(const Array& x, const Array& y) {
  const int n = x.rows();
  if (y.rows() != n || y.cols() != x.cols())
    throw ShapeError("discrete_assignment: size mismatch " + x.shape_str() + " vs " +
                     y.shape_str());
  if (n == 0) throw ConfigError("discrete_assignment: empty input");
  if (n > 256) throw ConfigError("discrete_assignment: N must be <= 256");
  const int d = x.cols();
  Array cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        const double diff = x(i, k) - y(j, k);
        s += diff * diff;
      }
      cost(i, j) = 0.5 * s;
    }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }

  AssignmentResult out;
  out.perm.assign(n, -1);
  for (int j = 1; j <= n; ++j) out.perm[match[j] - 1] = j - 1;
  std::vector<double> terms(n);
  for (int i = 0; i < n; ++i) terms[i] = cost(i, out.perm[i]);
  out.cost = neumaier_sum(terms.data(), terms.size()) / n;
  return out;
}

}  // namespace otmm
