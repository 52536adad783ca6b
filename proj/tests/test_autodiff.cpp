#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "wpnode/adam.hpp"
#include "wpnode/mlp.hpp"
#include "wpnode/random.hpp"
#include "wpnode/tape.hpp"

using namespace wpnode;

TEST_CASE("gelu matches the exact erf form") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(gelu(10.0) == doctest::Approx(10.0).epsilon(1e-13));
  // oracle: x * Phi_N(x) with Phi_N from erf
  const double expected = 1.0 * 0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)));
  CHECK(gelu(1.0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(gelu(1.0) == doctest::Approx(0.841345).epsilon(1e-6));
}

TEST_CASE("gelu symmetry and monotonicity") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-8.0, 8.0);
    CHECK(gelu(x) - gelu(-x) == doctest::Approx(x).epsilon(1e-12));
  }
  double prev = gelu(-0.5);
  for (double x = -0.5; x <= 6.0; x += 1e-3) {
    const double cur = gelu(x);
    CHECK(cur >= prev - 1e-15);
    prev = cur;
  }
}

TEST_CASE("mlp_apply: zero network collapses to zero") {
  ParamSet p;
  p.layers.push_back({Mat(4, 3), Mat(1, 4)});
  p.layers.push_back({Mat(3, 4), Mat(1, 3)});
  const std::vector<double> u = {1.0, -2.0, 0.5};
  const auto y = mlp_apply(p, u);
  for (double v : y) CHECK(v == 0.0);
}

TEST_CASE("mlp_apply: single-layer identity net is the identity map") {
  ParamSet p;
  Layer L{Mat(3, 3), Mat(1, 3)};
  for (int i = 0; i < 3; ++i) L.w(i, i) = 1.0;
  p.layers.push_back(std::move(L));
  const std::vector<double> u = {0.3, -1.7, 2.2};
  const auto y = mlp_apply(p, u);
  for (int j = 0; j < 3; ++j) CHECK(y[j] == doctest::Approx(u[j]).epsilon(1e-15));
}

TEST_CASE("mlp_apply matches an independent forward-pass oracle") {
  const ParamSet p = mlp_init({3, 8, 8, 3}, 42);
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> u(3);
    for (double& v : u) v = rng.uniform(-2.0, 2.0);
    const auto got = mlp_apply(p, u);
    const auto want = oracles::ref_mlp_forward(p, u);
    for (int j = 0; j < 3; ++j) CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-12));
  }
}

TEST_CASE("mlp_apply rejects mismatched input dims") {
  const ParamSet p = mlp_init({3, 4, 3}, 1);
  CHECK_THROWS_AS(mlp_apply(p, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("forward pass is deterministic") {
  const ParamSet p = mlp_init({3, 16, 3}, 5);
  Mat x(32, 3);
  Rng rng(3);
  for (double& v : x.raw()) v = rng.uniform(-1.0, 1.0);
  Mat y1, y2;
  mlp_apply_batch(p, x, y1);
  mlp_apply_batch(p, x, y2);
  for (size_t k = 0; k < y1.size(); ++k) CHECK(y1.data()[k] == y2.data()[k]);
}

TEST_CASE("grad: quadratic form gives 2 theta") {
  const ParamSet p = mlp_init({2, 3, 2}, 9);
  Tape tape;
  const MlpTapeIds ids = mlp_params_on_tape(tape, p);
  std::vector<int> terms;
  for (const auto& [wid, bid] : ids.layers) {
    terms.push_back(tape.sum_sq(wid, 1.0));
    terms.push_back(tape.sum_sq(bid, 1.0));
  }
  const int loss = tape.lincomb(terms, std::vector<double>(terms.size(), 1.0));
  tape.backward(loss);
  const GradSet g = grad(tape, ids);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    for (size_t k = 0; k < p.layers[l].w.size(); ++k)
      CHECK(g.layers[l].w.data()[k] ==
            doctest::Approx(2.0 * p.layers[l].w.data()[k]).epsilon(1e-14));
    for (size_t k = 0; k < p.layers[l].b.size(); ++k)
      CHECK(g.layers[l].b.data()[k] ==
            doctest::Approx(2.0 * p.layers[l].b.data()[k]).epsilon(1e-14));
  }
  CHECK(g.all_finite());
}

TEST_CASE("grad: loss with no parameter dependence is a zero GradSet") {
  const ParamSet p = mlp_init({2, 4, 2}, 9);
  Tape tape;
  const MlpTapeIds ids = mlp_params_on_tape(tape, p);
  Mat c(5, 2, 1.5);
  const int loss = tape.sum_sq(tape.input(c), 1.0);
  tape.backward(loss);
  const GradSet g = grad(tape, ids);
  for (const Layer& L : g.layers) {
    for (double v : L.w.raw()) CHECK(v == 0.0);
    for (double v : L.b.raw()) CHECK(v == 0.0);
  }
}

TEST_CASE("grad: empty tape is a usage error") {
  Tape tape;
  CHECK_THROWS_AS(tape.backward(0), std::logic_error);
}

TEST_CASE("grad of a squared network output matches finite differences") {
  const ParamSet p = mlp_init({3, 8, 3}, 101);
  Mat x(6, 3);
  Rng rng(55);
  for (double& v : x.raw()) v = rng.uniform(-1.0, 1.0);

  Tape tape;
  const MlpTapeIds ids = mlp_params_on_tape(tape, p);
  const int out = mlp_forward(tape, ids, tape.input(x));
  const int loss = tape.sum_sq(out, 1.0 / 6.0);
  tape.backward(loss);
  const GradSet ad = grad(tape, ids);

  const GradSet fd = oracles::fd_gradient(
      [&](const ParamSet& q) {
        Mat y;
        mlp_apply_batch(q, x, y);
        return frobenius_sq(y) / 6.0;
      },
      p);
  CHECK(oracles::max_rel_err(ad, fd) < 1e-5);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  ParamSet p = mlp_init({2, 4, 2}, 3);
  const ParamSet before = p;
  OptimizerState st = adam_init(p, 0.1);
  GradSet g;
  for (const Layer& L : p.layers)
    g.layers.push_back({Mat(L.w.rows(), L.w.cols()), Mat(1, L.b.cols())});
  adam_step(p, g, st);
  CHECK(st.step == 1);
  for (size_t l = 0; l < p.layers.size(); ++l)
    for (size_t k = 0; k < p.layers[l].w.size(); ++k)
      CHECK(p.layers[l].w.data()[k] == before.layers[l].w.data()[k]);
}

TEST_CASE("adam: hand-evaluated first step on a scalar parameter") {
  ParamSet p;
  p.layers.push_back({Mat(1, 1, 1.0), Mat(1, 1)});
  GradSet g;
  g.layers.push_back({Mat(1, 1, 1.0), Mat(1, 1)});
  OptimizerState st = adam_init(p, 0.1);
  adam_step(p, g, st);
  // bias-corrected first step: theta -= lr * 1 / (1 + eps)
  const double expected = 1.0 - 0.1 / (1.0 + 1e-8);
  CHECK(p.layers[0].w(0, 0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(p.layers[0].w(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
}

TEST_CASE("adam: identical calls from the same state are identical") {
  auto run = [] {
    ParamSet p = mlp_init({2, 4, 2}, 17);
    OptimizerState st = adam_init(p, 0.05);
    Rng rng(23);
    for (int step = 0; step < 5; ++step) {
      GradSet g;
      for (const Layer& L : p.layers) {
        Layer gl{Mat(L.w.rows(), L.w.cols()), Mat(1, L.b.cols())};
        for (double& v : gl.w.raw()) v = rng.uniform(-1.0, 1.0);
        for (double& v : gl.b.raw()) v = rng.uniform(-1.0, 1.0);
        g.layers.push_back(std::move(gl));
      }
      adam_step(p, g, st);
    }
    return p;
  };
  const ParamSet a = run(), b = run();
  for (size_t l = 0; l < a.layers.size(); ++l)
    for (size_t k = 0; k < a.layers[l].w.size(); ++k)
      CHECK(a.layers[l].w.data()[k] == b.layers[l].w.data()[k]);
}

TEST_CASE("adam: lr = 0 is the identity on params") {
  ParamSet p = mlp_init({2, 4, 2}, 29);
  const ParamSet before = p;
  OptimizerState st = adam_init(p, 0.0);
  GradSet g;
  Rng rng(31);
  for (const Layer& L : p.layers) {
    Layer gl{Mat(L.w.rows(), L.w.cols()), Mat(1, L.b.cols())};
    for (double& v : gl.w.raw()) v = rng.uniform(-1.0, 1.0);
    for (double& v : gl.b.raw()) v = rng.uniform(-1.0, 1.0);
    g.layers.push_back(std::move(gl));
  }
  adam_step(p, g, st);
  for (size_t l = 0; l < p.layers.size(); ++l)
    for (size_t k = 0; k < p.layers[l].w.size(); ++k)
      CHECK(p.layers[l].w.data()[k] == before.layers[l].w.data()[k]);
}

TEST_CASE("adam: non-finite gradients surface a training error") {
  ParamSet p = mlp_init({2, 4, 2}, 37);
  OptimizerState st = adam_init(p, 0.1);
  GradSet g;
  for (const Layer& L : p.layers)
    g.layers.push_back({Mat(L.w.rows(), L.w.cols()), Mat(1, L.b.cols())});
  g.layers[0].w(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(p, g, st), training_error);
}

TEST_CASE("checkpoint round-trip preserves parameters bitwise") {
  const ParamSet p = mlp_init({3, 8, 3}, 77);
  nlohmann::json meta{{"note", "roundtrip"}};
  const auto j = params_to_json(p, meta);
  nlohmann::json meta2;
  const ParamSet q = params_from_json(j, &meta2);
  REQUIRE(q.layers.size() == p.layers.size());
  for (size_t l = 0; l < p.layers.size(); ++l) {
    for (size_t k = 0; k < p.layers[l].w.size(); ++k)
      CHECK(q.layers[l].w.data()[k] == p.layers[l].w.data()[k]);
    for (size_t k = 0; k < p.layers[l].b.size(); ++k)
      CHECK(q.layers[l].b.data()[k] == p.layers[l].b.data()[k]);
  }
  CHECK(meta2.at("note") == "roundtrip");
}
