#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "otmm/errors.hpp"

namespace otmm {

/// Dense row-major matrix of 64-bit floats. Batches of D-dimensional points
/// are stored as [n, D]; per-sample scalars as [n, 1]; scalars as [1, 1].
class Array {
 public:
  Array() = default;
  Array(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(static_cast<size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw ShapeError("Array: negative dimension");
  }

  static Array row(std::initializer_list<double> xs) {
    Array a(1, static_cast<int>(xs.size()));
    std::copy(xs.begin(), xs.end(), a.v_.begin());
    return a;
  }

  static Array from(int rows, int cols, std::vector<double> xs) {
    if (static_cast<size_t>(rows) * cols != xs.size())
      throw ShapeError("Array::from: size mismatch");
    Array a;
    a.rows_ = rows;
    a.cols_ = cols;
    a.v_ = std::move(xs);
    return a;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return v_.size(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  double& operator()(int i, int j) { return v_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return v_[static_cast<size_t>(i) * cols_ + j]; }
  double& operator[](size_t i) { return v_[i]; }
  double operator[](size_t i) const { return v_[i]; }

  double* row_ptr(int i) { return v_.data() + static_cast<size_t>(i) * cols_; }
  const double* row_ptr(int i) const { return v_.data() + static_cast<size_t>(i) * cols_; }

  bool same_shape(const Array& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  std::string shape_str() const {
    return "[" + std::to_string(rows_) + " x " + std::to_string(cols_) + "]";
  }

  void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  auto begin() { return v_.begin(); }
  auto end() { return v_.end(); }
  auto begin() const { return v_.begin(); }
  auto end() const { return v_.end(); }

  friend bool operator==(const Array& a, const Array& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.v_ == b.v_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> v_;
};

/// A batch of points from p or q: rows are samples, cols is the dimension D.
using PointBatch = Array;

// ---- dense kernels ------------------------------------------------------
// Loop orders below keep the innermost loop free of reduction dependencies
// so they vectorize under plain -O3 (no fast-math required).

/// out += a (same shape).
inline void add_inplace(Array& out, const Array& a) {
  if (!out.same_shape(a)) throw ShapeError("add_inplace: " + out.shape_str() + " vs " + a.shape_str());
  double* o = out.data();
  const double* p = a.data();
  for (size_t i = 0; i < out.size(); ++i) o[i] += p[i];
}

/// out = a · b, shapes [n,p]·[p,m] -> [n,m]. `accumulate` adds into out.
inline void gemm_nn(const Array& a, const Array& b, Array& out, bool accumulate = false) {
  const int n = a.rows(), p = a.cols(), m = b.cols();
  if (b.rows() != p)
    throw ShapeError("gemm_nn: " + a.shape_str() + " x " + b.shape_str());
  if (out.rows() != n || out.cols() != m)
    throw ShapeError("gemm_nn: bad output " + out.shape_str());
  if (!accumulate) out.fill(0.0);
  for (int i = 0; i < n; ++i) {
    double* orow = out.row_ptr(i);
    const double* arow = a.row_ptr(i);
    for (int k = 0; k < p; ++k) {
      const double aik = arow[k];
      const double* brow = b.row_ptr(k);
      for (int j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
}

/// out += aᵀ · b, shapes [n,p]ᵀ·[n,m] -> [p,m].
inline void gemm_tn_acc(const Array& a, const Array& b, Array& out) {
  const int n = a.rows(), p = a.cols(), m = b.cols();
  if (b.rows() != n)
    throw ShapeError("gemm_tn_acc: " + a.shape_str() + " x " + b.shape_str());
  if (out.rows() != p || out.cols() != m)
    throw ShapeError("gemm_tn_acc: bad output " + out.shape_str());
  for (int i = 0; i < n; ++i) {
    const double* arow = a.row_ptr(i);
    const double* brow = b.row_ptr(i);
    for (int k = 0; k < p; ++k) {
      const double aik = arow[k];
      double* orow = out.row_ptr(k);
      for (int j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
}

inline Array transpose(const Array& a) {
  Array t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// out += a · bᵀ via an explicit transpose of b (keeps the hot loop nn-shaped).
inline void gemm_nt_acc(const Array& a, const Array& b, Array& out) {
  Array bt = transpose(b);
  gemm_nn(a, bt, out, /*accumulate=*/true);
}

/// Compensated (Neumaier) sum; used wherever identities are asserted at
/// tolerances near machine precision.
inline double neumaier_sum(const double* xs, size_t n) {
  double s = 0.0, comp = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = s + xs[i];
    if (std::abs(s) >= std::abs(xs[i]))
      comp += (s - t) + xs[i];
    else
      comp += (xs[i] - t) + s;
    s = t;
  }
  return s + comp;
}

inline double neumaier_sum(const Array& a) { return neumaier_sum(a.data(), a.size()); }

inline double neumaier_mean(const Array& a) {
  return a.size() == 0 ? 0.0 : neumaier_sum(a) / static_cast<double>(a.size());
}

inline double dot_rows(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int j = 0; j < d; ++j) s += a[j] * b[j];
  return s;
}

inline double sqnorm_row(const double* a, int d) { return dot_rows(a, a, d); }

}  // namespace otmm
