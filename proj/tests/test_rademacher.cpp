#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "otmm/rademacher.hpp"

using namespace otmm;

namespace {

Sampler normal_sampler(int dim) {
  return [dim](uint64_t seed, int n) {
    Rng rng(seed);
    return rng.normal_array(n, dim);
  };
}

FunctionClassSpec small_potential_class() {
  FunctionClassSpec spec;
  spec.kind = FunctionClassSpec::Kind::PotentialF;
  spec.dim = 2;
  spec.pot_hidden = {8};
  spec.beta = 0.1;
  spec.norm_bound = 1.0;
  spec.ascent_iters = 60;
  spec.restarts = 4;
  return spec;
}

}  // namespace

TEST_CASE("rademacher: singleton class estimate is zero within noise") {
  FunctionClassSpec spec = small_potential_class();
  spec.ascent_iters = 0;  // frozen member
  spec.restarts = 1;
  const Array sample = normal_sampler(2)(3, 256);
  const ComplexityEstimate est = empirical_rademacher(spec, sample, 64, 5);
  CHECK(std::abs(est.estimate) <= 3.0 * est.se + 1e-12);
  CHECK(est.draws == 64);
  CHECK(est.sample_size == 256);
}

TEST_CASE("rademacher: finite class bounded by c stays below c") {
  // members bounded by c = 2 on any sample
  std::vector<std::function<Array(const PointBatch&)>> members;
  for (double a : {-2.0, -1.0, 0.5, 2.0}) {
    members.push_back([a](const PointBatch& y) {
      Array v(y.rows(), 1);
      for (int i = 0; i < y.rows(); ++i) v(i, 0) = a * std::tanh(y(i, 0));
      return v;
    });
  }
  const Array sample = normal_sampler(2)(7, 128);
  const ComplexityEstimate est = empirical_rademacher_finite(members, sample, 48, 9);
  CHECK(est.estimate <= 2.0 + 3.0 * est.se);
  CHECK(est.estimate >= 0.0);  // class is symmetric, sup >= 0 per draw
}

TEST_CASE("rademacher: enumeration is monotone in class size") {
  std::vector<std::function<Array(const PointBatch&)>> members;
  auto linear = [](double a, double b) {
    return [a, b](const PointBatch& y) {
      Array v(y.rows(), 1);
      for (int i = 0; i < y.rows(); ++i) v(i, 0) = a * y(i, 0) + b * y(i, 1);
      return v;
    };
  };
  members.push_back(linear(1.0, 0.0));
  members.push_back(linear(-0.5, 0.5));
  const Array sample = normal_sampler(2)(11, 64);
  const ComplexityEstimate small = empirical_rademacher_finite(members, sample, 32, 13);
  members.push_back(linear(0.3, -1.2));  // add a member, same sigma seed
  const ComplexityEstimate bigger = empirical_rademacher_finite(members, sample, 32, 13);
  CHECK(bigger.estimate >= small.estimate - 1e-15);
}

TEST_CASE("rademacher: enumeration is scale equivariant") {
  std::vector<std::function<Array(const PointBatch&)>> members, scaled;
  const double lambda = 2.5;
  for (double a : {0.7, -1.1}) {
    members.push_back([a](const PointBatch& y) {
      Array v(y.rows(), 1);
      for (int i = 0; i < y.rows(); ++i) v(i, 0) = a * y(i, 0);
      return v;
    });
    scaled.push_back([a, lambda](const PointBatch& y) {
      Array v(y.rows(), 1);
      for (int i = 0; i < y.rows(); ++i) v(i, 0) = lambda * a * y(i, 0);
      return v;
    });
  }
  const Array sample = normal_sampler(2)(17, 64);
  const ComplexityEstimate base = empirical_rademacher_finite(members, sample, 32, 19);
  const ComplexityEstimate big = empirical_rademacher_finite(scaled, sample, 32, 19);
  CHECK(big.estimate == Catch::Approx(lambda * base.estimate).margin(1e-12));
}

TEST_CASE("rademacher: estimate shrinks with sample size") {
  FunctionClassSpec spec = small_potential_class();
  spec.ascent_iters = 40;
  spec.restarts = 2;
  const ComplexityEstimate small =
      empirical_rademacher(spec, normal_sampler(2)(23, 32), 8, 29);
  const ComplexityEstimate large =
      empirical_rademacher(spec, normal_sampler(2)(23, 512), 8, 29);
  CHECK(large.estimate < small.estimate);
}

TEST_CASE("representativeness: exact two-point sample of its own support") {
  FunctionClassSpec spec = small_potential_class();
  spec.ascent_iters = 30;
  spec.restarts = 2;
  Array support(2, 2);
  support(0, 0) = 1.0;
  support(1, 0) = -1.0;
  // reference sampler cycles the support deterministically: exact proportions
  Sampler reference = [support](uint64_t, int n) {
    Array out(n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 2; ++j) out(i, j) = support(i % 2, j);
    return out;
  };
  const double rep = representativeness(spec, support, reference, 10000, 3);
  CHECK(std::abs(rep) <= 1e-9);  // the objective is identically zero
}

TEST_CASE("representativeness: bounded by twice the complexity on average") {
  FunctionClassSpec spec = small_potential_class();
  spec.ascent_iters = 40;
  spec.restarts = 2;
  const int m = 64;
  std::vector<double> reps;
  for (int resample = 0; resample < 6; ++resample) {
    const Array y = normal_sampler(2)(1000 + resample, m);
    reps.push_back(representativeness(spec, y, normal_sampler(2), 20000, 7));
  }
  const McEstimate rep_mc = mc_mean(reps);
  const ComplexityEstimate rad = empirical_rademacher(spec, normal_sampler(2)(77, m), 16, 11);
  CHECK(rep_mc.mean <= 2.0 * rad.estimate + 3.0 * (rep_mc.se + 2.0 * rad.se) + 0.05);
}

TEST_CASE("rademacher: input validation") {
  FunctionClassSpec spec = small_potential_class();
  CHECK_THROWS_AS(empirical_rademacher(spec, Array(0, 2), 8, 1), ConfigError);
  CHECK_THROWS_AS(empirical_rademacher(spec, Array(4, 2), 0, 1), ConfigError);
  CHECK_THROWS_AS(empirical_rademacher_finite({}, Array(4, 2), 8, 1), ConfigError);
}
