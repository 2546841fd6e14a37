#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "otmm/autodiff.hpp"
#include "otmm/errors.hpp"
#include "otmm/handles.hpp"
#include "otmm/rng.hpp"

namespace otmm {

enum class Activation { Relu, Celu };
enum class SkipKind { Linear, Quadratic };

inline std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "celu"; }
inline std::string to_string(SkipKind s) { return s == SkipKind::Linear ? "linear" : "quadratic"; }

namespace detail {
inline void check_widths(int dim, const std::vector<int>& hidden) {
  if (dim < 1) throw ConfigError("net: dimension must be >= 1");
  for (int h : hidden)
    if (h < 1) throw ConfigError("net: hidden widths must be >= 1");
}
}  // namespace detail

/// Feed-forward ReLU map T: R^D -> R^D (linear output layer).
class MapNet final : public MapFn {
 public:
  MapNet() = default;

  static MapNet init(int dim, std::vector<int> hidden, uint64_t seed) {
    detail::check_widths(dim, hidden);
    MapNet net;
    net.dim_ = dim;
    net.hidden_ = std::move(hidden);
    Rng rng(derive_seed(seed, 0x6d61706eULL));
    int in = dim;
    for (size_t l = 0; l <= net.hidden_.size(); ++l) {
      const int out = l < net.hidden_.size() ? net.hidden_[l] : dim;
      Array& w = net.params_.add("W" + std::to_string(l), in, out);
      const double scale = 1.0 / std::sqrt(static_cast<double>(in));
      for (auto& x : w) x = scale * rng.normal();
      net.params_.add("b" + std::to_string(l), 1, out);
      in = out;
    }
    return net;
  }

  int dim() const override { return dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Append the forward computation for input node `x` ([n,D]); returns the
  /// output node id ([n,D]).
  int build(Graph& g, int x) const {
    int h = x;
    for (size_t l = 0; l <= hidden_.size(); ++l) {
      const std::string suffix = std::to_string(l);
      int z = g.add(g.matmul(h, g.param(params_, "W" + suffix)), g.param(params_, "b" + suffix));
      h = l < hidden_.size() ? g.relu(z) : z;
    }
    return h;
  }

  Array apply(const Array& x) const override {
    if (x.cols() != dim_)
      throw ShapeError("MapNet::apply: input " + x.shape_str() + ", expected cols " +
                       std::to_string(dim_));
    Graph g;
    const int in = g.input(x, "x");
    const int out = build(g, in);
    g.forward();
    return g.value(out);
  }

 private:
  int dim_ = 0;
  std::vector<int> hidden_;
  ParamStore params_;
};

/// Input convex network: hidden recursion
///   z_1 = s(y a_1 + b_1),  z_{i+1} = s(z_i w_{i+1} + y a_{i+1} + b_{i+1}),
/// with entrywise-nonnegative internal weights w_i and convex nondecreasing
/// activation s (ReLU or CELU_n); scalar linear readout
///   out = z_{K-1} w_K + y a_K + b_K.
/// The quadratic-skip variant adds one convex feature per layer,
/// lam_i * ||y u_i + c_i||^2 with lam_i >= 0.
class IcnnNet {
 public:
  IcnnNet() = default;

  static IcnnNet init(int dim, std::vector<int> hidden, Activation act, double celu_n,
                      SkipKind skip, uint64_t seed) {
    detail::check_widths(dim, hidden);
    if (act == Activation::Celu && !(celu_n > 0.0))
      throw ConfigError("icnn: celu sharpness must be > 0");
    IcnnNet net;
    net.dim_ = dim;
    net.hidden_ = std::move(hidden);
    net.act_ = act;
    net.celu_n_ = celu_n;
    net.skip_ = skip;
    Rng rng(derive_seed(seed, 0x69636e6eULL));
    // skip weights a_i ~ N(0, 1/fan_in); internal weights w_i = |same|
    const int layers = static_cast<int>(net.hidden_.size()) + 1;
    for (int l = 1; l <= layers; ++l) {
      const int out = l <= static_cast<int>(net.hidden_.size()) ? net.hidden_[l - 1] : 1;
      const std::string i = std::to_string(l);
      if (l > 1) {
        const int in = net.hidden_[l - 2];
        Array& w = net.params_.add("w" + i, in, out, /*nonneg=*/true);
        const double scale = 1.0 / std::sqrt(static_cast<double>(in));
        for (auto& x : w) x = std::abs(scale * rng.normal());
      }
      Array& a = net.params_.add("a" + i, dim, out);
      const double ascale = 1.0 / std::sqrt(static_cast<double>(dim));
      for (auto& x : a) x = ascale * rng.normal();
      net.params_.add("b" + i, 1, out);
      if (net.skip_ == SkipKind::Quadratic) {
        Array& u = net.params_.add("u" + i, dim, out);
        for (auto& x : u) x = ascale * rng.normal();
        net.params_.add("c" + i, 1, out);
        Array& lam = net.params_.add("lam" + i, 1, out, /*nonneg=*/true);
        for (auto& x : lam) x = std::abs(0.1 * rng.normal());
      }
    }
    return net;
  }

  int dim() const { return dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  Activation activation() const { return act_; }
  double celu_n() const { return celu_n_; }
  SkipKind skip() const { return skip_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Same parameters, different activation family; used to compare CELU_n
  /// against the ReLU limit.
  IcnnNet with_activation(Activation act, double celu_n) const {
    IcnnNet copy = *this;
    copy.act_ = act;
    copy.celu_n_ = celu_n;
    return copy;
  }

  int build(Graph& g, int y) const {
    const int layers = static_cast<int>(hidden_.size()) + 1;
    int z = -1;
    for (int l = 1; l <= layers; ++l) {
      const std::string i = std::to_string(l);
      int pre = g.matmul(y, g.param(params_, "a" + i));
      if (l > 1) pre = g.add(pre, g.matmul(z, g.param(params_, "w" + i)));
      if (skip_ == SkipKind::Quadratic) {
        int feat = g.sqnorm(g.add(g.matmul(y, g.param(params_, "u" + i)),
                                  g.param(params_, "c" + i)));
        pre = g.add(pre, g.matmul(feat, g.param(params_, "lam" + i)));
      }
      pre = g.add(pre, g.param(params_, "b" + i));
      if (l < layers)
        z = act_ == Activation::Relu ? g.relu(pre) : g.celu_op(pre, celu_n_);
      else
        z = pre;  // linear scalar readout
    }
    return z;
  }

  Array eval(const Array& y) const {
    Graph g;
    const int in = g.input(y, "y");
    const int out = build(g, in);
    g.forward();
    return g.value(out);
  }

 private:
  int dim_ = 0;
  std::vector<int> hidden_;
  Activation act_ = Activation::Relu;
  double celu_n_ = 1.0;
  SkipKind skip_ = SkipKind::Linear;
  ParamStore params_;
};

/// phi(y) = icnn(y) + beta/2 ||y||^2: the beta-strongly convex potential
/// family used everywhere a potential is learned or frozen as ground truth.
class StrongPotential final : public Potential {
 public:
  StrongPotential() = default;
  StrongPotential(IcnnNet icnn, double beta) : icnn_(std::move(icnn)), beta_(beta) {
    if (!(beta >= 0.0)) throw ConfigError("StrongPotential: beta must be >= 0");
  }

  static StrongPotential init(int dim, std::vector<int> hidden, Activation act, double celu_n,
                              SkipKind skip, double beta, uint64_t seed) {
    return StrongPotential(IcnnNet::init(dim, std::move(hidden), act, celu_n, skip, seed), beta);
  }

  int dim() const override { return icnn_.dim(); }
  double beta() const override { return beta_; }
  IcnnNet& icnn() { return icnn_; }
  const IcnnNet& icnn() const { return icnn_; }
  ParamStore& params() { return icnn_.params(); }
  const ParamStore& params() const { return icnn_.params(); }

  int build(Graph& g, int y) const {
    const int base = icnn_.build(g, y);
    if (beta_ == 0.0) return base;
    return g.add(base, g.scale(g.sqnorm(y), 0.5 * beta_));
  }

  Array eval(const Array& y) const override {
    Graph g;
    const int in = g.input(y, "y");
    const int out = build(g, in);
    g.forward();
    return g.value(out);
  }

  Array eval_grad(const Array& y, Array& grads) const override {
    Graph g;
    const int in = g.input(y, "y");
    const int out = build(g, in);
    const int total = g.sum(out);
    g.forward();
    g.backward(total);
    grads = g.grad(in);
    return g.value(out);
  }

  /// Clamp ICNN internal weights to [0, inf). a_i and b_i are untouched.
  void project_nonneg() { icnn_.params().project_nonneg(); }

 private:
  IcnnNet icnn_;
  double beta_ = 0.0;
};

/// Clamp the flagged (internal) weights of a potential, returning the result.
inline StrongPotential project_nonneg(StrongPotential pot) {
  pot.project_nonneg();
  return pot;
}

/// T(x) = grad of a strong potential; smooth when the potential uses CELU.
class GradientMap final : public MapFn {
 public:
  explicit GradientMap(std::shared_ptr<const StrongPotential> pot) : pot_(std::move(pot)) {}
  int dim() const override { return pot_->dim(); }
  Array apply(const Array& x) const override {
    Array grads;
    pot_->eval_grad(x, grads);
    return grads;
  }
  const StrongPotential& potential() const { return *pot_; }

 private:
  std::shared_ptr<const StrongPotential> pot_;
};

/// Scale each parameter array to Frobenius norm <= bound (bound <= 0: no-op).
/// Positive scaling preserves the nonnegativity flags' invariant.
inline void clip_frobenius(ParamStore& ps, double bound) {
  if (!(bound > 0.0)) return;
  for (int i = 0; i < ps.count(); ++i) {
    Array& v = ps.value(i);
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm > bound) {
      const double k = bound / norm;
      for (auto& x : v) x *= k;
    }
  }
}

/// Worst violation of phi(l y1 + (1-l) y2) <= l phi(y1) + (1-l) phi(y2) over
/// random triples with coordinates in [-radius, radius]. Nonpositive for a
/// convex phi (up to roundoff). `eval` maps [n,D] -> [n,1].
template <typename F>
double convexity_violation(F&& eval, int dim, int trials, double radius, Rng& rng) {
  Array y1(trials, dim), y2(trials, dim), ym(trials, dim);
  std::vector<double> lam(trials);
  for (int t = 0; t < trials; ++t) {
    lam[t] = rng.uniform();
    for (int j = 0; j < dim; ++j) {
      y1(t, j) = rng.uniform(-radius, radius);
      y2(t, j) = rng.uniform(-radius, radius);
      ym(t, j) = lam[t] * y1(t, j) + (1.0 - lam[t]) * y2(t, j);
    }
  }
  const Array v1 = eval(y1);
  const Array v2 = eval(y2);
  const Array vm = eval(ym);
  double worst = -1e300;
  for (int t = 0; t < trials; ++t) {
    const double bound = lam[t] * v1(t, 0) + (1.0 - lam[t]) * v2(t, 0);
    worst = std::max(worst, vm(t, 0) - bound);
  }
  return worst;
}

inline double convexity_violation(const Potential& pot, int trials, double radius, Rng& rng) {
  return convexity_violation([&](const Array& y) { return pot.eval(y); }, pot.dim(), trials,
                             radius, rng);
}

}  // namespace otmm
