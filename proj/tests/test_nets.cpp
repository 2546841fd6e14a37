#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "otmm/checkpoint.hpp"
#include "otmm/nets.hpp"
#include "otmm/rng.hpp"

using namespace otmm;

TEST_CASE("icnn: two-layer ReLU example is max(y, 0)") {
  // a1 = 1, b1 = 0, w2 = 1, a2 = 0, b2 = 0
  StrongPotential pot = StrongPotential::init(1, {1}, Activation::Relu, 1.0, SkipKind::Linear,
                                              0.0, 1);
  pot.params()["a1"](0, 0) = 1.0;
  pot.params()["b1"](0, 0) = 0.0;
  pot.params()["w2"](0, 0) = 1.0;
  pot.params()["a2"](0, 0) = 0.0;
  pot.params()["b2"](0, 0) = 0.0;
  Array y(2, 1);
  y(0, 0) = 2.0;
  y(1, 0) = -1.0;
  const Array v = pot.eval(y);
  CHECK(v(0, 0) == 2.0);
  CHECK(v(1, 0) == 0.0);
}

TEST_CASE("potential: all-zero ICNN reduces to the quadratic wrapper") {
  StrongPotential pot = StrongPotential::init(2, {4, 4}, Activation::Relu, 1.0, SkipKind::Linear,
                                              2.0, 3);
  for (int i = 0; i < pot.params().count(); ++i) pot.params().value(i).fill(0.0);
  const Array v = pot.eval(Array::row({1.0, 1.0}));
  CHECK(v(0, 0) == Catch::Approx(2.0).margin(1e-15));
}

TEST_CASE("potential: dimension mismatch is rejected") {
  StrongPotential pot = StrongPotential::init(2, {4}, Activation::Relu, 1.0, SkipKind::Linear,
                                              1.0, 3);
  CHECK_THROWS_AS(pot.eval(Array(3, 3)), ShapeError);
}

TEST_CASE("map: identity weights act as identity") {
  MapNet net = MapNet::init(2, {}, 7);  // single linear layer
  net.params()["W0"].fill(0.0);
  net.params()["W0"](0, 0) = 1.0;
  net.params()["W0"](1, 1) = 1.0;
  net.params()["b0"].fill(0.0);
  const Array y = net.apply(Array::row({1.0, 2.0}));
  CHECK(y(0, 0) == 1.0);
  CHECK(y(0, 1) == 2.0);
}

TEST_CASE("map: zero weights send everything to zero") {
  MapNet net = MapNet::init(3, {8}, 9);
  for (int i = 0; i < net.params().count(); ++i) net.params().value(i).fill(0.0);
  Rng rng(4);
  const Array y = net.apply(rng.normal_array(5, 3));
  for (double v : y) CHECK(v == 0.0);
}

TEST_CASE("map: deterministic re-evaluation") {
  MapNet net = MapNet::init(4, {16, 16}, 1234);
  Rng rng(8);
  const Array x = rng.normal_array(32, 4);
  CHECK(net.apply(x) == net.apply(x));
}

TEST_CASE("init: same seed reproduces, different seed differs") {
  const MapNet a = MapNet::init(3, {8, 8}, 42);
  const MapNet b = MapNet::init(3, {8, 8}, 42);
  const MapNet c = MapNet::init(3, {8, 8}, 43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < a.params().count(); ++i) {
    all_equal = all_equal && (a.params().value(i) == b.params().value(i));
    any_diff = any_diff || !(a.params().value(i) == c.params().value(i));
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("init: zero width is rejected") {
  CHECK_THROWS_AS(MapNet::init(2, {0}, 1), ConfigError);
  CHECK_THROWS_AS(StrongPotential::init(0, {4}, Activation::Relu, 1.0, SkipKind::Linear, 1.0, 1),
                  ConfigError);
}

TEST_CASE("init: ICNN internal weights start nonnegative") {
  StrongPotential pot = StrongPotential::init(2, {16, 16}, Activation::Celu, 2.0,
                                              SkipKind::Linear, 0.1, 77);
  const ParamStore& ps = pot.params();
  for (int i = 0; i < ps.count(); ++i)
    if (ps.nonneg(i))
      for (double v : ps.value(i)) CHECK(v >= 0.0);
}

TEST_CASE("convexity: triples hold at init for both activations and skips") {
  Rng rng(1001);
  for (int rep = 0; rep < 8; ++rep) {
    const Activation act = rep % 2 == 0 ? Activation::Celu : Activation::Relu;
    const SkipKind skip = rep % 4 < 2 ? SkipKind::Linear : SkipKind::Quadratic;
    StrongPotential pot =
        StrongPotential::init(2, {8, 8}, act, 1.0 + rep, skip, 0.1, 500 + rep);
    CHECK(convexity_violation(pot, 1000, 5.0, rng) <= 1e-9);
    // beta-strong convexity: the inner ICNN itself is convex
    CHECK(convexity_violation([&](const Array& y) { return pot.icnn().eval(y); }, 2, 1000, 5.0,
                              rng) <= 1e-9);
  }
}

TEST_CASE("project_nonneg: clamps internal weights only") {
  StrongPotential pot = StrongPotential::init(1, {2}, Activation::Relu, 1.0, SkipKind::Linear,
                                              0.5, 5);
  pot.params()["w2"](0, 0) = -0.3;
  pot.params()["w2"](1, 0) = 0.7;
  pot.params()["a1"](0, 0) = -2.0;
  pot.project_nonneg();
  CHECK(pot.params()["w2"](0, 0) == 0.0);
  CHECK(pot.params()["w2"](1, 0) == 0.7);
  CHECK(pot.params()["a1"](0, 0) == -2.0);
}

TEST_CASE("project_nonneg: restores convexity on perturbed nets") {
  Rng rng(2002);
  for (int rep = 0; rep < 100; ++rep) {
    StrongPotential pot = StrongPotential::init(2, {6, 6}, Activation::Celu, 2.0,
                                                SkipKind::Linear, 0.1, 9000 + rep);
    // corrupt internal weights with negative noise, then project
    for (int i = 0; i < pot.params().count(); ++i)
      if (pot.params().nonneg(i))
        for (auto& v : pot.params().value(i)) v -= 0.5 * rng.uniform();
    pot.project_nonneg();
    CHECK(convexity_violation(pot, 100, 4.0, rng) <= 1e-9);
  }
}

TEST_CASE("celu family approaches the ReLU net as sharpness grows") {
  IcnnNet relu_net = IcnnNet::init(2, {8, 8}, Activation::Relu, 1.0, SkipKind::Linear, 33);
  Rng rng(5);
  const Array grid = rng.normal_array(256, 2, 2.0);
  const Array ref = relu_net.eval(grid);
  std::vector<double> devs;
  for (double n : {1.0, 4.0, 16.0, 64.0}) {
    const IcnnNet celu_net = relu_net.with_activation(Activation::Celu, n);
    const Array v = celu_net.eval(grid);
    double dev = 0.0;
    for (int i = 0; i < grid.rows(); ++i) dev = std::max(dev, std::abs(v(i, 0) - ref(i, 0)));
    devs.push_back(dev);
  }
  int inversions = 0;
  for (size_t i = 1; i < devs.size(); ++i)
    if (devs[i] >= devs[i - 1]) ++inversions;
  CHECK(inversions <= 1);
  CHECK(devs.back() < devs.front());
}

TEST_CASE("checkpoint: round-trips maps and potentials bit-exactly") {
  MapNet map = MapNet::init(3, {8, 4}, 21);
  std::ostringstream os;
  save_checkpoint(os, map);
  const std::string text = os.str();
  CHECK(text.rfind("OTMM1\n", 0) == 0);
  std::istringstream is(text);
  MapNet loaded = load_map_checkpoint(is);
  for (int i = 0; i < map.params().count(); ++i)
    CHECK(map.params().value(i) == loaded.params().value(i));

  StrongPotential pot = StrongPotential::init(2, {8}, Activation::Celu, 2.5,
                                              SkipKind::Quadratic, 0.25, 77);
  std::ostringstream osp;
  save_checkpoint(osp, pot);
  std::istringstream isp(osp.str());
  StrongPotential lp = load_potential_checkpoint(isp);
  CHECK(lp.beta() == pot.beta());
  CHECK(lp.icnn().celu_n() == pot.icnn().celu_n());
  CHECK(lp.icnn().skip() == SkipKind::Quadratic);
  for (int i = 0; i < pot.params().count(); ++i)
    CHECK(pot.params().value(i) == lp.params().value(i));
}

TEST_CASE("checkpoint: family mismatch is rejected") {
  MapNet map = MapNet::init(2, {4}, 3);
  std::ostringstream os;
  save_checkpoint(os, map);
  std::istringstream is(os.str());
  CHECK_THROWS_AS(load_potential_checkpoint(is), ConfigError);
}

TEST_CASE("clip_frobenius caps parameter norms") {
  MapNet map = MapNet::init(2, {32}, 3);
  clip_frobenius(map.params(), 0.5);
  for (int i = 0; i < map.params().count(); ++i) {
    double sq = 0.0;
    for (double v : map.params().value(i)) sq += v * v;
    CHECK(std::sqrt(sq) <= 0.5 + 1e-12);
  }
}
