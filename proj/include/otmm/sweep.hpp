#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "otmm/bench.hpp"
#include "otmm/io.hpp"
#include "otmm/metrics.hpp"
#include "otmm/minimax.hpp"

namespace otmm {

/// Worker count: the requested parallelism capped by OTMM_THREADS when set.
inline int resolve_parallelism(int requested) {
  if (requested < 1) requested = 1;
  if (const char* env = std::getenv("OTMM_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) requested = std::min(requested, cap);
  }
  return requested;
}

/// Run fn(0..n-1) on a pool of `workers` threads; results keep index order,
/// so output is deterministic regardless of scheduling.
template <typename R>
std::vector<R> parallel_map(int workers, int n, const std::function<R(int)>& fn) {
  std::vector<R> results(n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) results[i] = fn(i);
    return results;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          results[i] = fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

/// One sweep cell result; the estimation CSV row layout.
struct ExperimentRecord {
  int n = 0, m = 0, dim = 0;
  uint64_t seed = 0;
  double l2_error = 0.0;
  double e1 = 0.0;
  double e2 = 0.0;
  double runtime_s = 0.0;
};

struct NetWidths {
  std::vector<int> map_hidden{32, 32};
  std::vector<int> pot_hidden{32, 32};
  double pot_beta = 0.1;
  double celu_n = 2.0;
  Activation act = Activation::Celu;
  SkipKind skip = SkipKind::Linear;
};

struct EstimationSweepConfig {
  std::vector<int> grid{100, 1000, 10000, 20000};  // N = M values
  int seeds_per_cell = 3;
  uint64_t master_seed = 0;
  TrainConfig base;
  NetWidths nets;
  int n_test = 4096;
  int gap_samples = 1024;
  int parallelism = 4;
};

namespace detail {

struct CellOutcome {
  ExperimentRecord record;
  std::string error;  // nonempty on numerical failure
};

inline CellOutcome run_estimation_cell(const EstimationSweepConfig& cfg,
                                       const BenchmarkPair& pair, int n, int cell_index) {
  CellOutcome out;
  const uint64_t cell_seed = derive_seed(cfg.master_seed, cell_index);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    TrainConfig tc = cfg.base;
    tc.seed = cell_seed;
    tc.n_train = n;
    tc.m_train = n;
    StrongPotential pot =
        StrongPotential::init(pair.dim, cfg.nets.pot_hidden, cfg.nets.act, cfg.nets.celu_n,
                              cfg.nets.skip, cfg.nets.pot_beta, derive_seed(cell_seed, 0xa));
    MapNet map = MapNet::init(pair.dim, cfg.nets.map_hidden, derive_seed(cell_seed, 0xb));
    TrainResult res = train(tc, pair.source, pair.target, std::move(pot), std::move(map),
                            pair.truth_map.get());

    out.record.n = n;
    out.record.m = n;
    out.record.dim = pair.dim;
    out.record.seed = cell_seed;
    out.record.l2_error = map_l2_error(res.map, *pair.truth_map, pair.source, cfg.n_test,
                                       derive_seed(cfg.master_seed, 0xe));
    ConjugateConfig cc;
    cc.box_radius = box_radius_for(pair.target(derive_seed(cfg.master_seed, 0xd), 1024));
    const GapReport gaps =
        duality_gaps(res.pot, res.map, pair, cc, cfg.gap_samples, derive_seed(cell_seed, 0xc));
    out.record.e1 = gaps.e1.mean;
    out.record.e2 = gaps.e2.mean;
  } catch (const NumericalError& e) {
    out.error = e.what();
  }
  out.record.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace detail

struct EstimationSweepResult {
  std::vector<ExperimentRecord> records;
  RateFit fit;
  std::vector<std::string> failures;  // numerical failures, by message
};

/// Train one solver per (N, seed) cell and record error and duality gaps.
/// Cells run on a worker pool; each derives its RNG stream from
/// (master seed, cell index).
inline EstimationSweepResult sweep_estimation(const EstimationSweepConfig& cfg,
                                              const BenchmarkPair& pair) {
  const int cells = static_cast<int>(cfg.grid.size()) * cfg.seeds_per_cell;
  const int workers = resolve_parallelism(cfg.parallelism);
  auto outcomes = parallel_map<detail::CellOutcome>(workers, cells, [&](int i) {
    const int n = cfg.grid[i / cfg.seeds_per_cell];
    return detail::run_estimation_cell(cfg, pair, n, i);
  });
  EstimationSweepResult result;
  std::vector<std::pair<double, double>> pts;
  for (const auto& o : outcomes) {
    if (!o.error.empty()) {
      result.failures.push_back(o.error);
      continue;
    }
    result.records.push_back(o.record);
    pts.emplace_back(static_cast<double>(o.record.n), o.record.l2_error);
  }
  if (pts.size() >= 2) result.fit = rate_fit(pts);
  return result;
}

inline CsvTable estimation_csv(const EstimationSweepResult& r) {
  CsvTable t;
  t.kind = "estimation-sweep";
  t.header = {"n", "m", "dim", "seed", "l2_error", "e1", "e2", "runtime_s"};
  for (const auto& rec : r.records)
    t.rows.push_back({static_cast<double>(rec.n), static_cast<double>(rec.m),
                      static_cast<double>(rec.dim), static_cast<double>(rec.seed), rec.l2_error,
                      rec.e1, rec.e2, rec.runtime_s});
  if (r.records.size() >= 2) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", r.fit.slope);
    t.meta["rate_fit_slope"] = buf;
    std::snprintf(buf, sizeof buf, "%.17g", r.fit.intercept);
    t.meta["rate_fit_intercept"] = buf;
    std::snprintf(buf, sizeof buf, "%.17g", r.fit.residual_rms);
    t.meta["rate_fit_residual_rms"] = buf;
    t.meta["rate_fit_points"] = std::to_string(r.fit.points);
  }
  return t;
}

struct ApproxRecord {
  int h_phi = 0, h_t = 0, dim = 0;
  uint64_t seed = 0;
  double l2_error = 0.0;
  double runtime_s = 0.0;
};

struct ApproximationSweepConfig {
  std::vector<int> pot_widths{4, 8, 16, 32, 64};  // max H_phi axis
  std::vector<int> map_widths{1, 2, 4, 8};        // max H_T axis
  int seeds_per_cell = 3;
  uint64_t master_seed = 0;
  TrainConfig base;  // n_train/m_train act as the large-pool size
  NetWidths nets;    // depths taken from these; widths overridden per cell
  int n_test = 4096;
  int parallelism = 4;
};

struct ApproximationSweepResult {
  std::vector<ApproxRecord> records;
  std::vector<std::string> failures;
};

/// Grid over (max H_phi, max H_T) with a large fixed sample pool, so the
/// remaining error is dominated by network capacity.
inline ApproximationSweepResult sweep_approximation(const ApproximationSweepConfig& cfg,
                                                    const BenchmarkPair& pair) {
  struct Outcome {
    ApproxRecord record;
    std::string error;
  };
  const int grid = static_cast<int>(cfg.pot_widths.size() * cfg.map_widths.size());
  const int cells = grid * cfg.seeds_per_cell;
  const int workers = resolve_parallelism(cfg.parallelism);
  auto outcomes = parallel_map<Outcome>(workers, cells, [&](int i) {
    const int cell = i / cfg.seeds_per_cell;
    Outcome out;
    out.record.h_phi = cfg.pot_widths[cell / cfg.map_widths.size()];
    out.record.h_t = cfg.map_widths[cell % cfg.map_widths.size()];
    out.record.dim = pair.dim;
    out.record.seed = derive_seed(cfg.master_seed, i);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      TrainConfig tc = cfg.base;
      tc.seed = out.record.seed;
      const std::vector<int> pot_hidden(cfg.nets.pot_hidden.size(), out.record.h_phi);
      const std::vector<int> map_hidden(cfg.nets.map_hidden.size(), out.record.h_t);
      StrongPotential pot = StrongPotential::init(pair.dim, pot_hidden, cfg.nets.act,
                                                  cfg.nets.celu_n, cfg.nets.skip,
                                                  cfg.nets.pot_beta,
                                                  derive_seed(out.record.seed, 0xa));
      MapNet map = MapNet::init(pair.dim, map_hidden, derive_seed(out.record.seed, 0xb));
      TrainResult res = train(tc, pair.source, pair.target, std::move(pot), std::move(map),
                              pair.truth_map.get());
      out.record.l2_error = map_l2_error(res.map, *pair.truth_map, pair.source, cfg.n_test,
                                         derive_seed(cfg.master_seed, 0xe));
    } catch (const NumericalError& e) {
      out.error = e.what();
    }
    out.record.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  });
  ApproximationSweepResult result;
  for (const auto& o : outcomes) {
    if (!o.error.empty())
      result.failures.push_back(o.error);
    else
      result.records.push_back(o.record);
  }
  return result;
}

inline CsvTable approximation_csv(const ApproximationSweepResult& r) {
  CsvTable t;
  t.kind = "approximation-sweep";
  t.header = {"h_phi", "h_t", "dim", "seed", "l2_error", "runtime_s"};
  for (const auto& rec : r.records)
    t.rows.push_back({static_cast<double>(rec.h_phi), static_cast<double>(rec.h_t),
                      static_cast<double>(rec.dim), static_cast<double>(rec.seed), rec.l2_error,
                      rec.runtime_s});
  return t;
}

}  // namespace otmm
