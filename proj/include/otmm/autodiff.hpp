#pragma once

#include <cmath>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "otmm/array.hpp"
#include "otmm/errors.hpp"

namespace otmm {

/// Named parameter arrays. Entries keep declaration order (checkpoints and
/// gradient collections rely on it). `nonneg` marks arrays whose entries must
/// stay >= 0 after every projection step (ICNN internal weights).
class ParamStore {
 public:
  Array& add(const std::string& name, int rows, int cols, bool nonneg = false) {
    if (index_.count(name)) throw ConfigError("ParamStore: duplicate name " + name);
    index_[name] = static_cast<int>(names_.size());
    names_.push_back(name);
    values_.emplace_back(rows, cols);
    nonneg_.push_back(nonneg);
    return values_.back();
  }

  int count() const { return static_cast<int>(names_.size()); }
  const std::string& name(int i) const { return names_[i]; }
  Array& value(int i) { return values_[i]; }
  const Array& value(int i) const { return values_[i]; }
  bool nonneg(int i) const { return nonneg_[i] != 0; }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  Array& operator[](const std::string& name) {
    int i = find(name);
    if (i < 0) throw ConfigError("ParamStore: unknown name " + name);
    return values_[i];
  }
  const Array& operator[](const std::string& name) const {
    int i = find(name);
    if (i < 0) throw ConfigError("ParamStore: unknown name " + name);
    return values_[i];
  }

  /// Clamp every flagged array entrywise to [0, inf).
  void project_nonneg() {
    for (int i = 0; i < count(); ++i)
      if (nonneg_[i])
        for (auto& x : values_[i]) x = x < 0.0 ? 0.0 : x;
  }

  bool all_finite() const {
    for (const auto& v : values_)
      if (!v.all_finite()) return false;
    return true;
  }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

 private:
  std::vector<std::string> names_;
  std::deque<Array> values_;  // deque: references stay valid across add()
  std::vector<char> nonneg_;
  std::unordered_map<std::string, int> index_;
};

/// Gradient arrays parallel to one ParamStore (same order and shapes).
struct Gradients {
  std::vector<Array> g;
};

enum class OpKind { Input, Param, MatMul, Add, Relu, Celu, Dot, SqNorm, Scale, Sum, Mean };

/// CELU_n(x) = max(0,x) + min(0, (e^{nx} - 1)/n). Smooth; tends to ReLU as n
/// grows. Derivative at 0 is 1.
inline double celu(double x, double n) {
  return x > 0.0 ? x : std::expm1(n * x) / n;
}
inline double celu_deriv(double x, double n) {
  return x > 0.0 ? 1.0 : std::exp(n * x);
}

/// One reverse-mode graph over dense arrays. Nodes are appended in
/// topological order; `forward` evaluates in order, `backward` sweeps in
/// reverse from a scalar output. A graph instance is single-threaded; build a
/// fresh graph per batch.
class Graph {
 public:
  struct Node {
    OpKind op;
    int a = -1, b = -1;
    double c = 0.0;  // scale factor, or CELU sharpness n
    const ParamStore* store = nullptr;
    int slot = -1;
    std::string label;
    Array value;
    Array grad;
  };

  int input(Array value, std::string label = "input") {
    Node n;
    n.op = OpKind::Input;
    n.value = std::move(value);
    n.label = std::move(label);
    return push(std::move(n));
  }

  int param(const ParamStore& store, const std::string& name) {
    const int slot = store.find(name);
    if (slot < 0) throw ConfigError("Graph::param: unknown parameter " + name);
    Node n;
    n.op = OpKind::Param;
    n.store = &store;
    n.slot = slot;
    n.label = name;
    n.value = store.value(slot);
    return push(std::move(n));
  }

  int matmul(int a, int b) {
    const Array& va = nodes_[a].value;
    const Array& vb = nodes_[b].value;
    if (va.cols() != vb.rows())
      throw ShapeError("matmul node " + std::to_string(nodes_.size()) + ": " + describe(a) +
                       " x " + describe(b));
    Node n;
    n.op = OpKind::MatMul;
    n.a = a;
    n.b = b;
    n.value = Array(va.rows(), vb.cols());
    return push(std::move(n));
  }

  /// add(a, b): same shape, or b a [1,cols] row broadcast over a's rows.
  int add(int a, int b) {
    const Array& va = nodes_[a].value;
    const Array& vb = nodes_[b].value;
    const bool bcast = vb.rows() == 1 && va.cols() == vb.cols();
    if (!va.same_shape(vb) && !bcast)
      throw ShapeError("add node " + std::to_string(nodes_.size()) + ": " + describe(a) + " + " +
                       describe(b));
    Node n;
    n.op = OpKind::Add;
    n.a = a;
    n.b = b;
    n.value = Array(va.rows(), va.cols());
    return push(std::move(n));
  }

  int relu(int a) { return unary(OpKind::Relu, a, 0.0); }
  int celu_op(int a, double sharpness) { return unary(OpKind::Celu, a, sharpness); }
  int scale(int a, double c) { return unary(OpKind::Scale, a, c); }

  /// Rowwise dot product: [n,d] x [n,d] -> [n,1].
  int dot(int a, int b) {
    const Array& va = nodes_[a].value;
    const Array& vb = nodes_[b].value;
    if (!va.same_shape(vb))
      throw ShapeError("dot node " + std::to_string(nodes_.size()) + ": " + describe(a) + " . " +
                       describe(b));
    Node n;
    n.op = OpKind::Dot;
    n.a = a;
    n.b = b;
    n.value = Array(va.rows(), 1);
    return push(std::move(n));
  }

  /// Rowwise squared norm: [n,d] -> [n,1].
  int sqnorm(int a) {
    Node n;
    n.op = OpKind::SqNorm;
    n.a = a;
    n.value = Array(nodes_[a].value.rows(), 1);
    return push(std::move(n));
  }

  int sum(int a) { return reduce(OpKind::Sum, a); }
  int mean(int a) { return reduce(OpKind::Mean, a); }

  /// a - b as add(a, scale(b, -1)).
  int sub(int a, int b) { return add(a, scale(b, -1.0)); }

  void set_input(int id, const Array& value) {
    Node& n = nodes_[id];
    if (n.op != OpKind::Input) throw ConfigError("set_input: node is not an input");
    if (!n.value.same_shape(value))
      throw ShapeError("set_input node " + std::to_string(id) + ": shape changed");
    n.value = value;
  }

  void forward() {
    for (Node& n : nodes_) eval(n);
  }

  /// Reverse sweep from scalar node `out`; accumulates grads for every
  /// reachable node (params and inputs included).
  void backward(int out) {
    Node& o = nodes_[out];
    if (o.value.rows() != 1 || o.value.cols() != 1)
      throw ShapeError("backward: output node " + std::to_string(out) + " is " +
                       o.value.shape_str() + ", expected scalar");
    for (Node& n : nodes_) {
      if (!n.grad.same_shape(n.value)) n.grad = Array(n.value.rows(), n.value.cols());
      else n.grad.fill(0.0);
    }
    o.grad[0] = 1.0;
    for (int i = out; i >= 0; --i) propagate(nodes_[i]);
  }

  const Array& value(int id) const { return nodes_[id].value; }
  const Array& grad(int id) const { return nodes_[id].grad; }
  double scalar(int id) const {
    const Array& v = nodes_[id].value;
    if (v.size() != 1) throw ShapeError("scalar: node value is " + v.shape_str());
    return v[0];
  }

  /// Gradients for `store`, zero for parameters no node touches.
  Gradients param_grads(const ParamStore& store) const {
    Gradients out;
    out.g.reserve(store.count());
    for (int i = 0; i < store.count(); ++i)
      out.g.emplace_back(store.value(i).rows(), store.value(i).cols());
    for (const Node& n : nodes_)
      if (n.op == OpKind::Param && n.store == &store && n.grad.size() > 0)
        add_inplace(out.g[n.slot], n.grad);
    return out;
  }

  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  int push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::string describe(int id) const {
    return "node " + std::to_string(id) + (nodes_[id].label.empty() ? "" : " '" + nodes_[id].label + "'") +
           " " + nodes_[id].value.shape_str();
  }

  int unary(OpKind op, int a, double c) {
    Node n;
    n.op = op;
    n.a = a;
    n.c = c;
    const Array& va = nodes_[a].value;
    n.value = Array(va.rows(), va.cols());
    return push(std::move(n));
  }

  int reduce(OpKind op, int a) {
    Node n;
    n.op = op;
    n.a = a;
    n.value = Array(1, 1);
    return push(std::move(n));
  }

  void eval(Node& n) {
    switch (n.op) {
      case OpKind::Input:
        break;
      case OpKind::Param:
        n.value = n.store->value(n.slot);
        break;
      case OpKind::MatMul:
        gemm_nn(nodes_[n.a].value, nodes_[n.b].value, n.value);
        break;
      case OpKind::Add: {
        const Array& a = nodes_[n.a].value;
        const Array& b = nodes_[n.b].value;
        if (a.same_shape(b)) {
          for (size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] + b[i];
        } else {
          for (int i = 0; i < a.rows(); ++i) {
            const double* ar = a.row_ptr(i);
            const double* br = b.row_ptr(0);
            double* orow = n.value.row_ptr(i);
            for (int j = 0; j < a.cols(); ++j) orow[j] = ar[j] + br[j];
          }
        }
        break;
      }
      case OpKind::Relu: {
        const Array& a = nodes_[n.a].value;
        for (size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] > 0.0 ? a[i] : 0.0;
        break;
      }
      case OpKind::Celu: {
        const Array& a = nodes_[n.a].value;
        for (size_t i = 0; i < a.size(); ++i) n.value[i] = celu(a[i], n.c);
        break;
      }
      case OpKind::Dot: {
        const Array& a = nodes_[n.a].value;
        const Array& b = nodes_[n.b].value;
        for (int i = 0; i < a.rows(); ++i)
          n.value(i, 0) = dot_rows(a.row_ptr(i), b.row_ptr(i), a.cols());
        break;
      }
      case OpKind::SqNorm: {
        const Array& a = nodes_[n.a].value;
        for (int i = 0; i < a.rows(); ++i) n.value(i, 0) = sqnorm_row(a.row_ptr(i), a.cols());
        break;
      }
      case OpKind::Scale: {
        const Array& a = nodes_[n.a].value;
        for (size_t i = 0; i < a.size(); ++i) n.value[i] = n.c * a[i];
        break;
      }
      case OpKind::Sum:
        n.value[0] = neumaier_sum(nodes_[n.a].value);
        break;
      case OpKind::Mean:
        n.value[0] = neumaier_mean(nodes_[n.a].value);
        break;
    }
  }

  void propagate(Node& n) {
    switch (n.op) {
      case OpKind::Input:
      case OpKind::Param:
        break;
      case OpKind::MatMul: {
        // dA += dC·Bᵀ ; dB += Aᵀ·dC
        gemm_nt_acc(n.grad, nodes_[n.b].value, nodes_[n.a].grad);
        gemm_tn_acc(nodes_[n.a].value, n.grad, nodes_[n.b].grad);
        break;
      }
      case OpKind::Add: {
        Array& da = nodes_[n.a].grad;
        Array& db = nodes_[n.b].grad;
        add_inplace(da, n.grad);
        if (db.same_shape(n.grad)) {
          add_inplace(db, n.grad);
        } else {
          for (int i = 0; i < n.grad.rows(); ++i) {
            const double* gr = n.grad.row_ptr(i);
            double* br = db.row_ptr(0);
            for (int j = 0; j < n.grad.cols(); ++j) br[j] += gr[j];
          }
        }
        break;
      }
      case OpKind::Relu: {
        const Array& a = nodes_[n.a].value;
        Array& da = nodes_[n.a].grad;
        // subgradient at 0 taken as 0
        for (size_t i = 0; i < a.size(); ++i) da[i] += a[i] > 0.0 ? n.grad[i] : 0.0;
        break;
      }
      case OpKind::Celu: {
        const Array& a = nodes_[n.a].value;
        Array& da = nodes_[n.a].grad;
        for (size_t i = 0; i < a.size(); ++i) da[i] += celu_deriv(a[i], n.c) * n.grad[i];
        break;
      }
      case OpKind::Dot: {
        const Array& a = nodes_[n.a].value;
        const Array& b = nodes_[n.b].value;
        Array& da = nodes_[n.a].grad;
        Array& db = nodes_[n.b].grad;
        for (int i = 0; i < a.rows(); ++i) {
          const double g = n.grad(i, 0);
          const double* ar = a.row_ptr(i);
          const double* br = b.row_ptr(i);
          double* dar = da.row_ptr(i);
          double* dbr = db.row_ptr(i);
          for (int j = 0; j < a.cols(); ++j) {
            dar[j] += g * br[j];
            dbr[j] += g * ar[j];
          }
        }
        break;
      }
      case OpKind::SqNorm: {
        const Array& a = nodes_[n.a].value;
        Array& da = nodes_[n.a].grad;
        for (int i = 0; i < a.rows(); ++i) {
          const double g = 2.0 * n.grad(i, 0);
          const double* ar = a.row_ptr(i);
          double* dar = da.row_ptr(i);
          for (int j = 0; j < a.cols(); ++j) dar[j] += g * ar[j];
        }
        break;
      }
      case OpKind::Scale: {
        Array& da = nodes_[n.a].grad;
        for (size_t i = 0; i < da.size(); ++i) da[i] += n.c * n.grad[i];
        break;
      }
      case OpKind::Sum: {
        Array& da = nodes_[n.a].grad;
        const double g = n.grad[0];
        for (auto& x : da) x += g;
        break;
      }
      case OpKind::Mean: {
        Array& da = nodes_[n.a].grad;
        const double g = n.grad[0] / static_cast<double>(da.size());
        for (auto& x : da) x += g;
        break;
      }
    }
  }

  std::vector<Node> nodes_;
};

/// Max over coordinates of |analytic - central difference| /
/// (|analytic| + |central difference| + 1e-12) for the scalar graph output
/// `out` with respect to input node `input_id`.
inline double grad_check(Graph& g, int input_id, int out, double step) {
  if (!(step > 0.0)) throw ConfigError("grad_check: step must be > 0");
  g.forward();
  g.backward(out);
  const Array analytic = g.grad(input_id);
  Array point = g.value(input_id);
  double worst = 0.0;
  for (size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + step;
    g.set_input(input_id, point);
    g.forward();
    const double fp = g.scalar(out);
    point[i] = saved - step;
    g.set_input(input_id, point);
    g.forward();
    const double fm = g.scalar(out);
    point[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericalError("grad_check: non-finite function value");
    const double numeric = (fp - fm) / (2.0 * step);
    const double denom = std::abs(analytic[i]) + std::abs(numeric) + 1e-12;
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  if (!std::isfinite(worst)) throw NumericalError("grad_check: non-finite result");
  g.set_input(input_id, point);
  g.forward();
  return worst;
}

}  // namespace otmm
