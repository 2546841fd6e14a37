#pragma once

#include <cmath>
#include <vector>

#include "otmm/autodiff.hpp"

namespace otmm {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-store Adam moments. One state per network; never reset during a run.
class Adam {
 public:
  Adam() = default;
  explicit Adam(const AdamConfig& cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }

  /// Apply one update. direction = -1 descends, +1 ascends.
  void step(ParamStore& ps, const Gradients& grads, double direction = -1.0) {
    if (m_.empty()) {
      for (int i = 0; i < ps.count(); ++i) {
        m_.emplace_back(ps.value(i).rows(), ps.value(i).cols());
        v_.emplace_back(ps.value(i).rows(), ps.value(i).cols());
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (int i = 0; i < ps.count(); ++i) {
      Array& w = ps.value(i);
      const Array& g = grads.g[i];
      Array& m = m_[i];
      Array& v = v_[i];
      for (size_t k = 0; k < w.size(); ++k) {
        m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
        v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        w[k] += direction * cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<Array> m_, v_;
  long t_ = 0;
};

}  // namespace otmm
