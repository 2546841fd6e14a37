#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "otmm/metrics.hpp"
#include "otmm/minimax.hpp"

using namespace otmm;

namespace {

Array eye(int d, double scale = 1.0) {
  Array m(d, d);
  for (int i = 0; i < d; ++i) m(i, i) = scale;
  return m;
}

StrongPotential quadratic_pot(int dim, double beta) {
  StrongPotential pot = StrongPotential::init(dim, {2}, Activation::Relu, 1.0, SkipKind::Linear,
                                              beta, 1);
  for (int i = 0; i < pot.params().count(); ++i) pot.params().value(i).fill(0.0);
  return pot;
}

Sampler normal_sampler(int dim) {
  return [dim](uint64_t seed, int n) {
    Rng rng(seed);
    return rng.normal_array(n, dim);
  };
}

Sampler point_mass(Array point) {
  return [point = std::move(point)](uint64_t, int n) {
    Array out(n, point.cols());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < point.cols(); ++j) out(i, j) = point(0, j);
    return out;
  };
}

}  // namespace

TEST_CASE("map_l2_error: zero for the truth itself, ||c||^2 for a shift") {
  BenchmarkPair pair = make_gaussian_pair(Array(1, 2), eye(2), Array::row({3.0, 1.0}), eye(2));
  CHECK(map_l2_error(*pair.truth_map, *pair.truth_map, pair.source, 2048, 7) <= 1e-12);
  auto shifted = ShiftedMap(pair.truth_map, Array::row({0.3, -0.4}));
  const double err = map_l2_error(shifted, *pair.truth_map, pair.source, 2048, 7);
  CHECK(err == Catch::Approx(0.25).margin(1e-12));  // constant integrand, no MC noise
}

TEST_CASE("map_l2_error: 1D case agrees with dense quadrature") {
  // p = N(0,1); T(x) = x + sin(x) vs truth T*(x) = x: error = E sin^2(x)
  struct SinShift final : MapFn {
    int dim() const override { return 1; }
    Array apply(const Array& x) const override {
      Array y = x;
      for (auto& v : y) v += std::sin(v);
      return y;
    }
  } map;
  IdentityMap id(1);
  // Simpson holds the quadrature-side truth on [-6, 6]
  const int pts = 2001;
  const double a = -6.0, b = 6.0, h = (b - a) / (pts - 1);
  double quad = 0.0;
  for (int i = 0; i < pts; ++i) {
    const double x = a + i * h;
    const double w = (i == 0 || i == pts - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    quad += w * std::sin(x) * std::sin(x) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  }
  quad *= h / 3.0;
  const int n = 200000;
  const Array xs = normal_sampler(1)(31, n);
  const McEstimate mc = map_l2_error_mc(map, id, xs);
  CHECK(std::abs(mc.mean - quad) <= 3.0 * mc.se);
}

TEST_CASE("functional_L: point mass matches empirical loss") {
  StrongPotential pot = quadratic_pot(2, 1.0);
  IdentityMap id(2);
  const Array pt = Array::row({1.0, 0.0});
  CHECK(functional_L(pot, id, point_mass(pt), point_mass(pt), 64, 5) ==
        Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("functional_L: standard normal pair evaluates to D") {
  StrongPotential pot = quadratic_pot(2, 1.0);
  IdentityMap id(2);
  // E<x,x> - E ||x||^2/2 + E ||y||^2/2 = 2 - 1 + 1 = 2
  const double v = functional_L(pot, id, normal_sampler(2), normal_sampler(2), 400000, 17);
  CHECK(v == Catch::Approx(2.0).margin(0.02));
}

TEST_CASE("functional_L: equals empirical_loss on finite equal samplers") {
  StrongPotential pot = StrongPotential::init(2, {8}, Activation::Celu, 1.0, SkipKind::Linear,
                                              0.2, 3);
  MapNet map = MapNet::init(2, {8}, 4);
  Rng rng(6);
  const Array x = rng.normal_array(32, 2);
  const Array y = rng.normal_array(32, 2);
  auto fixed = [](Array data) {
    return Sampler([data = std::move(data)](uint64_t, int n) {
      if (n != data.rows()) throw ConfigError("fixed sampler: wrong n");
      return data;
    });
  };
  CHECK(functional_L(pot, map, fixed(x), fixed(y), 32, 9) ==
        Catch::Approx(empirical_loss(pot, map, x, y)).margin(1e-14));
}

TEST_CASE("transport_cost: identity and shift maps") {
  IdentityMap id(2);
  CHECK(transport_cost(id, normal_sampler(2), 4096, CostKind::Quadratic, 3) <= 1e-15);
  ShiftedMap shift(std::make_shared<IdentityMap>(2), Array::row({1.0, 2.0}));
  CHECK(transport_cost(shift, normal_sampler(2), 4096, CostKind::Quadratic, 3) ==
        Catch::Approx(2.5).margin(1e-12));  // 1/2 ||c||^2
}

TEST_CASE("transport_cost: quadratic/scalar-product decomposition identity") {
  Rng rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    MapNet map = MapNet::init(2, {8}, 5000 + rep);
    const uint64_t seed = 100 + rep;
    const Array x = normal_sampler(2)(seed, 512);
    const double quad = transport_cost_on(map, x, CostKind::Quadratic);
    const double scalar = transport_cost_on(map, x, CostKind::ScalarProduct);
    const Array tx = map.apply(x);
    std::vector<double> xs(x.rows()), ts(x.rows());
    for (int i = 0; i < x.rows(); ++i) {
      xs[i] = 0.5 * sqnorm_row(x.row_ptr(i), 2);
      ts[i] = 0.5 * sqnorm_row(tx.row_ptr(i), 2);
    }
    const double decomposition = neumaier_sum(xs.data(), xs.size()) / x.rows() +
                                 neumaier_sum(ts.data(), ts.size()) / x.rows() + scalar;
    CHECK(std::abs(quad - decomposition) <= 1e-10);
  }
}

TEST_CASE("duality_gaps: exact potential and map have vanishing gaps") {
  BenchmarkPair pair = make_gaussian_pair(Array(1, 2), eye(2), Array::row({2.0, -1.0}),
                                          eye(2, 0.8));
  ConjugateConfig cc;
  cc.box_radius = 8.0;
  const GapReport rep =
      duality_gaps(*pair.truth_potential, *pair.truth_map, pair, cc, 256, 99);
  CHECK(std::abs(rep.e1.mean) <= 1e-4);
  CHECK(std::abs(rep.e2.mean) <= 1e-4);
  CHECK(rep.e1.mean >= -rep.gap_tolerance);
  CHECK(rep.e2.mean >= -rep.gap_tolerance);
  CHECK(rep.map_error.mean <= 1e-20);
}

TEST_CASE("duality_gaps: shifted map gives E1 = 1/2 c^T H c") {
  // anisotropic pair so the Hessian H = A^{-1} is not a multiple of I
  Array cov_q(2, 2);
  cov_q(0, 0) = 4.0;
  cov_q(1, 1) = 0.25;
  BenchmarkPair pair = make_gaussian_pair(Array(1, 2), eye(2), Array(1, 2), cov_q);
  const Array c = Array::row({0.4, -0.2});
  auto shifted = std::make_shared<ShiftedMap>(pair.truth_map, c);
  ConjugateConfig cc;
  cc.box_radius = 10.0;
  const GapReport rep = duality_gaps(*pair.truth_potential, *shifted, pair, cc, 512, 17);
  // H = A^{-1} = diag(1/2, 2): expected E1 = 1/2 (0.4^2 * 0.5 + 0.2^2 * 2)
  const double expected = 0.5 * (0.16 * 0.5 + 0.04 * 2.0);
  CHECK(rep.e1.mean == Catch::Approx(expected).margin(3.0 * rep.e1.se + 1e-6));
  CHECK(rep.e2.mean >= -rep.gap_tolerance);
  // the error bound holds: ||c||^2 = map error <= (4/beta)(E1+E2) + slack
  CHECK(rep.map_error.mean <=
        rep.bound + 3.0 * (rep.map_error.se + 4.0 / rep.beta * (rep.e1.se + rep.e2.se)));
}

TEST_CASE("duality_gaps: trained instance satisfies the error bound") {
  BenchmarkPair pair = make_gaussian_pair(Array(1, 2), eye(2), Array::row({2.0, 2.0}), eye(2));
  TrainConfig cfg;
  cfg.steps = 300;
  cfg.inner_iters = 10;
  cfg.eval_every = 0;
  cfg.n_train = 1024;
  cfg.m_train = 1024;
  cfg.seed = 5;
  const TrainResult res = train(
      cfg, pair.source, pair.target,
      StrongPotential::init(2, {16, 16}, Activation::Celu, 2.0, SkipKind::Linear, 0.1, 51),
      MapNet::init(2, {16, 16}, 52));
  ConjugateConfig cc;
  cc.box_radius = box_radius_for(pair.target(1, 1024));
  const GapReport rep = duality_gaps(res.pot, res.map, pair, cc, 512, 3);
  CHECK(rep.e1.mean >= -rep.gap_tolerance);
  CHECK(rep.e2.mean >= -rep.gap_tolerance);
  const double slack = 3.0 * (rep.map_error.se + 4.0 / rep.beta * (rep.e1.se + rep.e2.se));
  CHECK(rep.map_error.mean <= rep.bound + slack);
}

TEST_CASE("rate_fit: two exact points give slope -1/2") {
  const RateFit fit = rate_fit({{1e2, 1e-1}, {1e4, 1e-2}});
  CHECK(fit.slope == Catch::Approx(-0.5).margin(1e-12));
  CHECK(fit.residual_rms <= 1e-12);
}

TEST_CASE("rate_fit: constant errors give slope 0") {
  const RateFit fit = rate_fit({{10, 0.5}, {100, 0.5}, {1000, 0.5}});
  CHECK(fit.slope == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("rate_fit: matches the closed-form normal equations on noisy points") {
  // independent oracle: explicit normal equations
  Rng rng(44);
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 5; ++i) {
    const double n = std::pow(10.0, 2 + i * 0.5);
    const double err = 3.0 * std::pow(n, -0.62) * std::exp(0.05 * rng.normal());
    pts.emplace_back(n, err);
  }
  const RateFit fit = rate_fit(pts);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int m = static_cast<int>(pts.size());
  for (const auto& [n, e] : pts) {
    const double lx = std::log10(n), ly = std::log10(e);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / m;
  CHECK(fit.slope == Catch::Approx(slope).margin(1e-12));
  CHECK(fit.intercept == Catch::Approx(intercept).margin(1e-12));
}

TEST_CASE("rate_fit: rejects nonpositive errors and short input") {
  CHECK_THROWS_AS(rate_fit({{10, 0.1}}), ConfigError);
  CHECK_THROWS_AS(rate_fit({{10, 0.0}, {100, 0.1}}), ConfigError);
}

TEST_CASE("spearman: monotone series") {
  CHECK(spearman({1, 2, 3, 4}, {0.1, 0.2, 0.3, 0.4}) == Catch::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == Catch::Approx(-1.0));
}
