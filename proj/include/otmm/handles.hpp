#pragma once

#include <memory>

#include "otmm/array.hpp"

namespace otmm {

/// A transport-map handle: x batch [n,D] -> y batch [n,D].
class MapFn {
 public:
  virtual ~MapFn() = default;
  virtual int dim() const = 0;
  virtual Array apply(const Array& x) const = 0;
};

/// A beta-strongly convex scalar potential on R^D.
class Potential {
 public:
  virtual ~Potential() = default;
  virtual int dim() const = 0;
  virtual double beta() const = 0;
  /// Per-sample values, [n,D] -> [n,1].
  virtual Array eval(const Array& y) const = 0;
  /// Values plus input gradients ([n,1], grads [n,D]).
  virtual Array eval_grad(const Array& y, Array& grads) const = 0;
};

class IdentityMap final : public MapFn {
 public:
  explicit IdentityMap(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  Array apply(const Array& x) const override { return x; }

 private:
  int dim_;
};

/// T(x) = inner(x) + shift; used in tests as T* + c.
class ShiftedMap final : public MapFn {
 public:
  ShiftedMap(std::shared_ptr<const MapFn> inner, Array shift)
      : inner_(std::move(inner)), shift_(std::move(shift)) {}
  int dim() const override { return inner_->dim(); }
  Array apply(const Array& x) const override {
    Array y = inner_->apply(x);
    for (int i = 0; i < y.rows(); ++i)
      for (int j = 0; j < y.cols(); ++j) y(i, j) += shift_(0, j);
    return y;
  }

 private:
  std::shared_ptr<const MapFn> inner_;
  Array shift_;
};

/// phi(y) = 1/2 yᵀQy + lᵀy + c with Q symmetric positive definite.
/// `beta` must be a lower bound on the smallest eigenvalue of Q.
class QuadraticPotential final : public Potential {
 public:
  QuadraticPotential(Array q, Array l, double c, double beta)
      : q_(std::move(q)), l_(std::move(l)), c_(c), beta_(beta) {}

  int dim() const override { return q_.rows(); }
  double beta() const override { return beta_; }

  Array eval(const Array& y) const override {
    Array v(y.rows(), 1);
    evaluate(y, v, nullptr);
    return v;
  }

  Array eval_grad(const Array& y, Array& grads) const override {
    Array v(y.rows(), 1);
    grads = Array(y.rows(), y.cols());
    evaluate(y, v, &grads);
    return v;
  }

  const Array& quadratic_form() const { return q_; }

 private:
  void evaluate(const Array& y, Array& v, Array* grads) const {
    const int d = q_.rows();
    for (int i = 0; i < y.rows(); ++i) {
      const double* yr = y.row_ptr(i);
      double acc = c_;
      for (int r = 0; r < d; ++r) {
        double qy = 0.0;
        for (int s = 0; s < d; ++s) qy += q_(r, s) * yr[s];
        acc += 0.5 * yr[r] * qy + l_(0, r) * yr[r];
        if (grads) (*grads)(i, r) = qy + l_(0, r);
      }
      v(i, 0) = acc;
    }
  }

  Array q_;      // [D,D]
  Array l_;      // [1,D]
  double c_;
  double beta_;
};

}  // namespace otmm
