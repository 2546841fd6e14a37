#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "otmm/autodiff.hpp"
#include "otmm/nets.hpp"
#include "otmm/rng.hpp"

using namespace otmm;

namespace {

// f(x) = 1/2 ||x||^2 as a graph over a [1,d] input.
struct HalfSqNorm {
  Graph g;
  int in, out;
  explicit HalfSqNorm(const Array& x) {
    in = g.input(x, "x");
    out = g.sum(g.scale(g.sqnorm(in), 0.5));
  }
};

}  // namespace

TEST_CASE("forward: half squared norm") {
  HalfSqNorm f(Array::row({3.0, 4.0}));
  f.g.forward();
  CHECK(f.g.scalar(f.out) == Catch::Approx(12.5).margin(1e-15));
}

TEST_CASE("forward: celu closed form") {
  Graph g;
  const int in = g.input(Array::row({-1.0}));
  const int out = g.celu_op(in, 1.0);
  g.forward();
  CHECK(g.value(out)[0] == Catch::Approx(std::exp(-1.0) - 1.0).margin(1e-12));
  CHECK(celu(0.0, 4.0) == 0.0);
  CHECK(celu_deriv(0.0, 4.0) == 1.0);  // continuous at the joint
  CHECK(celu(2.0, 4.0) == 2.0);
}

TEST_CASE("forward: two ReLU layers with identity weights") {
  ParamStore ps;
  Array& w0 = ps.add("W0", 2, 2);
  Array& w1 = ps.add("W1", 2, 2);
  w0(0, 0) = w0(1, 1) = 1.0;
  w1(0, 0) = w1(1, 1) = 1.0;
  Graph g;
  const int in = g.input(Array::row({1.0, -2.0}));
  const int h = g.relu(g.matmul(in, g.param(ps, "W0")));
  const int out = g.relu(g.matmul(h, g.param(ps, "W1")));
  g.forward();
  CHECK(g.value(out)(0, 0) == 1.0);
  CHECK(g.value(out)(0, 1) == 0.0);
}

TEST_CASE("backward: gradient of half squared norm is x") {
  HalfSqNorm f(Array::row({3.0, 4.0}));
  f.g.forward();
  f.g.backward(f.out);
  CHECK(f.g.grad(f.in)(0, 0) == Catch::Approx(3.0).margin(1e-15));
  CHECK(f.g.grad(f.in)(0, 1) == Catch::Approx(4.0).margin(1e-15));
}

TEST_CASE("backward: gradient of <a,x> is a") {
  Graph g;
  const int x = g.input(Array::row({0.3, -0.7, 2.0}), "x");
  const int a = g.input(Array::row({1.5, -2.5, 0.25}), "a");
  const int out = g.sum(g.dot(a, x));
  g.forward();
  g.backward(out);
  CHECK(g.grad(x)(0, 0) == Catch::Approx(1.5).margin(1e-15));
  CHECK(g.grad(x)(0, 1) == Catch::Approx(-2.5).margin(1e-15));
  CHECK(g.grad(x)(0, 2) == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("backward: random 3-layer ICNN matches finite differences") {
  Rng rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    StrongPotential pot = StrongPotential::init(3, {8, 8}, Activation::Celu, 2.0,
                                                SkipKind::Linear, 0.5, 100 + rep);
    Array y = rng.normal_array(1, 3);
    Graph g;
    const int in = g.input(y, "y");
    const int out = g.sum(pot.build(g, in));
    CHECK(grad_check(g, in, out, 1e-5) <= 1e-5);
  }
}

TEST_CASE("grad_check: quadratic is exact up to roundoff") {
  HalfSqNorm f(Array::row({0.3, -1.2, 5.0}));
  CHECK(grad_check(f.g, f.in, f.out, 1e-5) <= 1e-8);
}

TEST_CASE("grad_check: ReLU net away from kinks") {
  Rng rng(7);
  MapNet net = MapNet::init(2, {16, 16}, 42);
  int checked = 0;
  while (checked < 3) {
    Array x = rng.normal_array(1, 2);
    // keep x away from pre-activation kinks by rejecting near-zero units
    Graph probe;
    const int pin = probe.input(x, "x");
    net.build(probe, pin);
    probe.forward();
    bool near_kink = false;
    for (int id = 0; id < probe.node_count(); ++id)
      for (double v : probe.value(id))
        if (std::abs(v) < 1e-4 && v != 0.0) near_kink = true;
    if (near_kink) continue;
    Graph g;
    const int in = g.input(x, "x");
    const int out = g.sum(g.sqnorm(net.build(g, in)));
    CHECK(grad_check(g, in, out, 1e-5) <= 1e-5);
    ++checked;
  }
}

TEST_CASE("grad_check: rejects nonpositive step") {
  HalfSqNorm f(Array::row({1.0}));
  CHECK_THROWS_AS(grad_check(f.g, f.in, f.out, 0.0), ConfigError);
}

TEST_CASE("backward: linearity over shared parameters") {
  // h = alpha f + beta g built in one graph; grads must combine linearly.
  const double alpha = 0.7, beta = -1.3;
  ParamStore ps;
  Array& w = ps.add("w", 3, 1);
  w(0, 0) = 0.4;
  w(1, 0) = -0.2;
  w(2, 0) = 1.1;
  const Array x = Array::row({1.0, 2.0, -0.5});

  auto build_f = [&](Graph& g, int in) { return g.sum(g.matmul(in, g.param(ps, "w"))); };
  auto build_g = [&](Graph& g, int in) { return g.sum(g.sqnorm(g.matmul(in, g.param(ps, "w")))); };

  Graph gf;
  int inf = gf.input(x);
  int outf = build_f(gf, inf);
  gf.forward();
  gf.backward(outf);
  Gradients grad_f = gf.param_grads(ps);

  Graph gg;
  int ing = gg.input(x);
  int outg = build_g(gg, ing);
  gg.forward();
  gg.backward(outg);
  Gradients grad_g = gg.param_grads(ps);

  Graph gh;
  int inh = gh.input(x);
  int outh = gh.add(gh.scale(build_f(gh, inh), alpha), gh.scale(build_g(gh, inh), beta));
  gh.forward();
  gh.backward(outh);
  Gradients grad_h = gh.param_grads(ps);

  for (size_t k = 0; k < grad_h.g[0].size(); ++k)
    CHECK(grad_h.g[0][k] ==
          Catch::Approx(alpha * grad_f.g[0][k] + beta * grad_g.g[0][k]).margin(1e-12));
}

TEST_CASE("backward: unreachable parameters get zero gradient") {
  ParamStore ps;
  ps.add("used", 2, 1).fill(1.0);
  ps.add("unused", 4, 4).fill(2.0);
  Graph g;
  const int in = g.input(Array::row({1.0, 2.0}));
  const int out = g.sum(g.matmul(in, g.param(ps, "used")));
  g.forward();
  g.backward(out);
  Gradients grads = g.param_grads(ps);
  CHECK(grads.g[1].size() == 16);
  for (double v : grads.g[1]) CHECK(v == 0.0);
  CHECK(grads.g[0](0, 0) == 1.0);
  CHECK(grads.g[0](1, 0) == 2.0);
}

TEST_CASE("backward: requires scalar output") {
  Graph g;
  const int in = g.input(Array::row({1.0, 2.0}));
  const int out = g.relu(in);
  g.forward();
  CHECK_THROWS_AS(g.backward(out), ShapeError);
}

TEST_CASE("shape mismatch names the node") {
  Graph g;
  const int a = g.input(Array(2, 3), "lhs");
  const int b = g.input(Array(2, 3), "rhs");
  try {
    g.matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("lhs") != std::string::npos);
    CHECK(msg.find("matmul") != std::string::npos);
  }
}

TEST_CASE("determinism: identical graphs give bit-identical results") {
  auto run = [] {
    StrongPotential pot = StrongPotential::init(4, {16, 16}, Activation::Celu, 1.0,
                                                SkipKind::Linear, 0.3, 9);
    Rng rng(5);
    Array y = rng.normal_array(64, 4);
    Graph g;
    const int in = g.input(y, "y");
    const int out = g.sum(pot.build(g, in));
    g.forward();
    g.backward(out);
    return std::make_pair(g.scalar(out), g.grad(in));
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  CHECK(v1 == v2);
  CHECK(g1 == g2);
}

TEST_CASE("gradient correctness: 100 random smooth graphs") {
  Rng rng(2024);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int d = 1 + rng.uniform_int(4);
    const int h = 2 + rng.uniform_int(10);
    StrongPotential pot = StrongPotential::init(
        d, {h, h}, Activation::Celu, 0.5 + rng.uniform(), SkipKind::Linear, 0.1, rng.next_u64());
    Array y = rng.normal_array(1, d);
    Graph g;
    const int in = g.input(y, "y");
    const int out = g.sum(pot.build(g, in));
    worst = std::max(worst, grad_check(g, in, out, 1e-5));
  }
  CHECK(worst <= 1e-5);
}
