#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "otmm/adam.hpp"
#include "otmm/bench.hpp"
#include "otmm/checkpoint.hpp"
#include "otmm/errors.hpp"
#include "otmm/nets.hpp"

namespace otmm {

struct TrainConfig {
  int steps = 10000;       // outer steps
  int inner_iters = 10;    // map ascent iterations per outer step (k_T)
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;
  int n_train = 1024;      // source pool size N
  int m_train = 1024;      // target pool size M
  int batch_cap = 1024;    // batch size = min(batch_cap, pool size)
  bool fresh_batches = false;  // continuous emulation: draw fresh samples per batch
  int eval_every = 1000;
  int holdout = 1024;
  int eval_cap = 4096;     // pool rows used for the logged training loss
  double clip_norm = 0.0;  // optional potential weight-norm bound; 0 = off

  void validate() const {
    if (steps < 1) throw ConfigError("train: steps must be >= 1");
    if (inner_iters < 1) throw ConfigError("train: inner_iters must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("train: learning rate must be > 0");
    if (n_train < 1 || m_train < 1) throw ConfigError("train: pool sizes must be >= 1");
  }

  AdamConfig adam() const { return AdamConfig{lr, adam_beta1, adam_beta2, adam_eps}; }
};

struct TrainEvalRecord {
  long step = 0;
  double loss = 0.0;
  double holdout_loss = 0.0;
  double map_error = std::nan("");  // NaN when no ground truth is available
  double seconds = 0.0;             // wall clock; excluded from determinism checks
};

struct TrainHistory {
  std::vector<TrainEvalRecord> records;
};

struct TrainResult {
  StrongPotential pot;
  MapNet map;
  TrainHistory history;
};

/// Empirical minimax objective on fixed batches:
///   (1/N) sum_n [<x_n, T(x_n)> - phi(T(x_n))] + (1/M) sum_m phi(y_m).
inline double empirical_loss(const Potential& pot, const MapFn& map, const PointBatch& x,
                             const PointBatch& y) {
  if (x.rows() == 0 || y.rows() == 0) throw ConfigError("empirical_loss: empty batch");
  const Array tx = map.apply(x);
  const Array phi_tx = pot.eval(tx);
  const Array phi_y = pot.eval(y);
  std::vector<double> terms(x.rows());
  for (int i = 0; i < x.rows(); ++i)
    terms[i] = dot_rows(x.row_ptr(i), tx.row_ptr(i), x.cols()) - phi_tx(i, 0);
  return neumaier_sum(terms.data(), terms.size()) / x.rows() + neumaier_mean(phi_y);
}

namespace detail {

inline Array draw_rows(const Array& pool, int count, Rng& rng) {
  Array out(count, pool.cols());
  for (int i = 0; i < count; ++i) {
    const int r = rng.uniform_int(pool.rows());
    for (int j = 0; j < pool.cols(); ++j) out(i, j) = pool(r, j);
  }
  return out;
}

inline Array head_rows(const Array& pool, int count) {
  count = std::min(count, pool.rows());
  Array out(count, pool.cols());
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < pool.cols(); ++j) out(i, j) = pool(i, j);
  return out;
}

}  // namespace detail

/// One ascent step on the map parameters for the batch objective
/// (1/B) sum [<x,T(x)> - phi(T(x))] (the y-term of the loss does not depend
/// on the map). Exposed for the ascent-direction tests.
inline void map_ascent_step(StrongPotential& pot, MapNet& map, const Array& xbatch, Adam& opt) {
  Graph g;
  const int x = g.input(xbatch, "x");
  const int tx = map.build(g, x);
  const int obj = g.mean(g.sub(g.dot(x, tx), pot.build(g, tx)));
  g.forward();
  g.backward(obj);
  opt.step(map.params(), g.param_grads(map.params()), /*direction=*/+1.0);
}

/// One descent step on the potential parameters for the batch objective
/// mean phi(y) - mean phi(T(x)); clamps ICNN weights afterwards.
inline void potential_descent_step(StrongPotential& pot, const Array& tx_batch,
                                   const Array& ybatch, Adam& opt, double clip_norm) {
  Graph g;
  const int t = g.input(tx_batch, "tx");
  const int y = g.input(ybatch, "y");
  const int obj = g.sub(g.mean(pot.build(g, y)), g.mean(pot.build(g, t)));
  g.forward();
  g.backward(obj);
  opt.step(pot.params(), g.param_grads(pot.params()), /*direction=*/-1.0);
  pot.project_nonneg();
  clip_frobenius(pot.params(), clip_norm);
}

/// Alternating solver for the empirical minimax objective: per outer step,
/// k_T Adam ascent iterations on the map with the potential frozen, then one
/// Adam descent step on the potential with the map frozen (fresh batch),
/// then the nonnegativity projection. Deterministic given cfg.seed.
///
/// `checkpoint_cb`, when set, is invoked after each evaluation record.
inline TrainResult train(
    const TrainConfig& cfg, const Sampler& source, const Sampler& target, StrongPotential pot,
    MapNet map, const MapFn* truth_map = nullptr,
    const std::function<void(long, const StrongPotential&, const MapNet&)>& checkpoint_cb = {}) {
  cfg.validate();
  if (pot.dim() != map.dim()) throw ConfigError("train: potential and map dimensions differ");
  const auto t_start = std::chrono::steady_clock::now();

  const Array x_pool = source(derive_seed(cfg.seed, 1), cfg.n_train);
  const Array y_pool = target(derive_seed(cfg.seed, 2), cfg.m_train);
  const Array x_hold = source(derive_seed(cfg.seed, 3), cfg.holdout);
  const Array y_hold = target(derive_seed(cfg.seed, 4), cfg.holdout);
  const Array x_eval = detail::head_rows(x_pool, cfg.eval_cap);
  const Array y_eval = detail::head_rows(y_pool, cfg.eval_cap);
  const Array x_test =
      truth_map ? source(derive_seed(cfg.seed, 5), cfg.eval_cap) : Array();

  const int bx = std::min(cfg.batch_cap, cfg.n_train);
  const int by = std::min(cfg.batch_cap, cfg.m_train);
  Rng rng(derive_seed(cfg.seed, 6));
  uint64_t fresh_counter = 0;

  auto next_x = [&]() {
    if (cfg.fresh_batches) return source(derive_seed(cfg.seed, 1000 + fresh_counter++), bx);
    return detail::draw_rows(x_pool, bx, rng);
  };
  auto next_y = [&]() {
    if (cfg.fresh_batches) return target(derive_seed(cfg.seed, 1000 + fresh_counter++), by);
    return detail::draw_rows(y_pool, by, rng);
  };

  Adam map_opt(cfg.adam());
  Adam pot_opt(cfg.adam());
  TrainResult result;
  result.history.records.reserve(cfg.steps / std::max(cfg.eval_every, 1) + 2);

  std::string last_good_pot = checkpoint_string(pot);
  std::string last_good_map = checkpoint_string(map);

  auto evaluate = [&](long step) {
    TrainEvalRecord rec;
    rec.step = step;
    rec.loss = empirical_loss(pot, map, x_eval, y_eval);
    rec.holdout_loss = empirical_loss(pot, map, x_hold, y_hold);
    if (truth_map) {
      const Array a = map.apply(x_test);
      const Array b = truth_map->apply(x_test);
      std::vector<double> sq(a.rows());
      for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) {
          const double diff = a(i, j) - b(i, j);
          s += diff * diff;
        }
        sq[i] = s;
      }
      rec.map_error = neumaier_sum(sq.data(), sq.size()) / a.rows();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    if (!std::isfinite(rec.loss))
      throw NumericalError("train: non-finite loss at step " + std::to_string(step),
                           last_good_pot + "\x1e" + last_good_map);
    result.history.records.push_back(rec);
    last_good_pot = checkpoint_string(pot);
    last_good_map = checkpoint_string(map);
    if (checkpoint_cb) checkpoint_cb(step, pot, map);
  };

  for (long step = 0; step < cfg.steps; ++step) {
    for (int k = 0; k < cfg.inner_iters; ++k) map_ascent_step(pot, map, next_x(), map_opt);
    const Array xb = next_x();
    potential_descent_step(pot, map.apply(xb), next_y(), pot_opt, cfg.clip_norm);
    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) evaluate(step + 1);
  }
  if (result.history.records.empty() || result.history.records.back().step != cfg.steps)
    evaluate(cfg.steps);

  if (!pot.params().all_finite() || !map.params().all_finite())
    throw NumericalError("train: non-finite parameters after training",
                         last_good_pot + "\x1e" + last_good_map);

  result.pot = std::move(pot);
  result.map = std::move(map);
  return result;
}

}  // namespace otmm
