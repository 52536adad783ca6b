#include <doctest.h>

#include <cmath>
#include <numeric>

#include "support/oracles.hpp"
#include "wpnode/losses.hpp"
#include "wpnode/scaling.hpp"
#include "wpnode/trajectory.hpp"

using namespace wpnode;

namespace {

// Small scaled L63 dataset shared by the loss tests.
struct Fixture {
  Mat u_scaled;
  SubdomainLayout layout;
  SubdomainWeights weights;
  Mat lhs_all;
  double dt;

  Fixture() {
    SystemSpec spec = SystemSpec::lorenz63();
    const Trajectory traj = generate_dataset(spec, 2.0, 200, 21);
    const MinMaxScaler scaler = MinMaxScaler::fit(traj.states);
    u_scaled = scaler.apply(traj.states);
    dt = spec.dt;
    layout = make_subdomains(u_scaled.rows(), 20, 30, dt);
    weights = weak_weights(layout.nodes, 4, layout.length);
    lhs_all = precompute_lhs_contractions(u_scaled, layout, weights);
  }
};

ParamSet constant_field_params(const std::vector<double>& c) {
  ParamSet p;
  Layer L{Mat(int(c.size()), int(c.size())), Mat(1, int(c.size()))};
  for (size_t j = 0; j < c.size(); ++j) L.b(0, int(j)) = c[j];
  p.layers.push_back(std::move(L));
  return p;
}

}  // namespace

TEST_CASE("weak_loss: exact model on a linear problem is ~zero") {
  // u(t) = c t + d per dimension; the true field is the constant c, which a
  // bias-only affine layer represents exactly. Hat interpolation of linear
  // data is exact and integration by parts closes the residual.
  const int n = 200, d = 2;
  const double dt = 0.01;
  const std::vector<double> c = {0.7, -0.3};
  Mat u(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) u(i, j) = c[j] * (i * dt) + 0.1 * (j + 1);
  const SubdomainLayout layout = make_subdomains(n, 25, 12, dt);
  const SubdomainWeights w = weak_weights(layout.nodes, 6, layout.length);
  const Mat lhs = precompute_lhs_contractions(u, layout, w);
  std::vector<int> batch(layout.count());
  std::iota(batch.begin(), batch.end(), 0);
  const WeakBatch wb = assemble_weak_batch(u, layout, batch, lhs);
  const ParamSet model = constant_field_params(c);
  CHECK(weak_loss_value(model, wb, w) < 1e-20);

  Tape tape;
  const MlpTapeIds ids = mlp_params_on_tape(tape, model);
  const int loss = weak_loss_node(tape, ids, wb, w);
  CHECK(tape.value(loss) < 1e-20);
}

TEST_CASE("weak_loss: zero model leaves only the lhs contractions") {
  const Fixture fx;
  std::vector<int> batch = {0, 5, 11, 17};
  const WeakBatch wb = assemble_weak_batch(fx.u_scaled, fx.layout, batch, fx.lhs_all);
  ParamSet zero;
  zero.layers.push_back({Mat(3, 3), Mat(1, 3)});
  double expected = 0.0;
  for (int b = 0; b < wb.batch; ++b)
    for (int j = 0; j < 3; ++j) expected += wb.lhs_rows(b, j) * wb.lhs_rows(b, j);
  expected /= double(wb.batch);
  CHECK(weak_loss_value(zero, wb, fx.weights) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("weak_loss: tape value equals the forward-only value") {
  const Fixture fx;
  const ParamSet p = mlp_init({3, 8, 3}, 5);
  std::vector<int> batch = {2, 9, 25};
  const WeakBatch wb = assemble_weak_batch(fx.u_scaled, fx.layout, batch, fx.lhs_all);
  Tape tape;
  const MlpTapeIds ids = mlp_params_on_tape(tape, p);
  const int loss = weak_loss_node(tape, ids, wb, fx.weights);
  CHECK(tape.value(loss) ==
        doctest::Approx(weak_loss_value(p, wb, fx.weights)).epsilon(1e-13));
}

TEST_CASE("weak_loss gradient matches finite differences") {
  const Fixture fx;
  const ParamSet p = mlp_init({3, 8, 3}, 7);
  std::vector<int> batch = {0, 3, 7, 12, 19, 28};
  const WeakBatch wb = assemble_weak_batch(fx.u_scaled, fx.layout, batch, fx.lhs_all);

  Tape tape;
  const MlpTapeIds ids = mlp_params_on_tape(tape, p);
  tape.backward(weak_loss_node(tape, ids, wb, fx.weights));
  const GradSet ad = grad(tape, ids);
  const GradSet fd = oracles::fd_gradient(
      [&](const ParamSet& q) { return weak_loss_value(q, wb, fx.weights); }, p);
  CHECK(oracles::max_rel_err(ad, fd) < 1e-5);
}

TEST_CASE("strong_loss: rollout reproduces self-consistent data") {
  // data generated by the same solver the rollout uses on a representable field
  const int n = 50, d = 2;
  const double dt = 0.05;
  const std::vector<double> c = {0.4, -0.8};
  Mat u(n, d);
  for (int j = 0; j < d; ++j) u(0, j) = 0.3 * j;
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < d; ++j) u(i, j) = u(i - 1, j) + dt * c[j];
  const std::vector<int> starts = {0, 10, 20};
  const StrongBatch sb = assemble_strong_batch(u, starts, 5);
  const ParamSet model = constant_field_params(c);
  CHECK(strong_loss_value(model, sb, dt, SolverKind::rk4) < 1e-25);
}

TEST_CASE("strong_loss: rollout starts from y0 and T=1 penalizes one transition") {
  const int d = 2;
  Mat u(3, d);
  // u(t_0) = (1, 2); u(t_1) deliberately off the model flow
  u(0, 0) = 1.0;
  u(0, 1) = 2.0;
  u(1, 0) = 1.5;
  u(1, 1) = 2.0;
  const std::vector<double> c = {0.0, 0.0};
  const ParamSet model = constant_field_params(c);  // flow freezes the state
  const std::vector<int> starts = {0};
  const StrongBatch sb = assemble_strong_batch(u, starts, 1);
  // uhat(t_1) = y0 under the zero field, so the loss is |u(t_1) - y0|^2
  const double expected = 0.25;
  CHECK(strong_loss_value(model, sb, 0.1, SolverKind::rk4) ==
        doctest::Approx(expected).epsilon(1e-14));

  Tape tape;
  const MlpTapeIds ids = mlp_params_on_tape(tape, model);
  const int loss = strong_loss_node(tape, ids, sb, 0.1, SolverKind::rk4);
  CHECK(tape.value(loss) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("strong_loss gradient matches finite differences") {
  const Fixture fx;
  const ParamSet p = mlp_init({3, 8, 3}, 11);
  const std::vector<int> starts = {0, 40, 95, 150};
  const StrongBatch sb = assemble_strong_batch(fx.u_scaled, starts, 3);
  for (SolverKind solver : {SolverKind::euler, SolverKind::midpoint, SolverKind::rk4}) {
    Tape tape;
    const MlpTapeIds ids = mlp_params_on_tape(tape, p);
    tape.backward(strong_loss_node(tape, ids, sb, fx.dt, solver));
    const GradSet ad = grad(tape, ids);
    const GradSet fd = oracles::fd_gradient(
        [&](const ParamSet& q) { return strong_loss_value(q, sb, fx.dt, solver); }, p);
    CHECK(oracles::max_rel_err(ad, fd) < 1e-5);
  }
}

TEST_CASE("strong_loss: tape value equals the forward-only value") {
  const Fixture fx;
  const ParamSet p = mlp_init({3, 6, 3}, 13);
  const std::vector<int> starts = {5, 60, 120};
  const StrongBatch sb = assemble_strong_batch(fx.u_scaled, starts, 4);
  Tape tape;
  const MlpTapeIds ids = mlp_params_on_tape(tape, p);
  const int loss = strong_loss_node(tape, ids, sb, fx.dt, SolverKind::rk4);
  CHECK(tape.value(loss) ==
        doctest::Approx(strong_loss_value(p, sb, fx.dt, SolverKind::rk4)).epsilon(1e-13));
}

TEST_CASE("strong_loss: a blowing-up rollout yields a non-finite loss value") {
  Mat u(40, 1, 1.0);
  ParamSet p;
  p.layers.push_back({Mat(1, 1, 1e15), Mat(1, 1)});
  const std::vector<int> starts = {0};
  const StrongBatch sb = assemble_strong_batch(u, starts, 25);
  Tape tape;
  const MlpTapeIds ids = mlp_params_on_tape(tape, p);
  const int loss = strong_loss_node(tape, ids, sb, 1.0, SolverKind::euler);
  CHECK(!std::isfinite(tape.value(loss)));
}

TEST_CASE("combined_loss: lambda = 0 equals the weak loss exactly") {
  const Fixture fx;
  const ParamSet p = mlp_init({3, 8, 3}, 17);
  std::vector<int> batch = {1, 4, 9};
  const WeakBatch wb = assemble_weak_batch(fx.u_scaled, fx.layout, batch, fx.lhs_all);
  const std::vector<int> starts = {0, 50};
  const StrongBatch sb = assemble_strong_batch(fx.u_scaled, starts, 2);

  Tape t1;
  const MlpTapeIds i1 = mlp_params_on_tape(t1, p);
  const double combined =
      t1.value(combined_loss_node(t1, i1, wb, sb, fx.weights, 0.0, fx.dt, SolverKind::rk4));
  Tape t2;
  const MlpTapeIds i2 = mlp_params_on_tape(t2, p);
  const double weak = t2.value(weak_loss_node(t2, i2, wb, fx.weights));
  CHECK(combined == weak);
}

TEST_CASE("combined_loss: large lambda is dominated by the strong term") {
  const Fixture fx;
  const ParamSet p = mlp_init({3, 8, 3}, 19);
  std::vector<int> batch = {1, 4, 9};
  const WeakBatch wb = assemble_weak_batch(fx.u_scaled, fx.layout, batch, fx.lhs_all);
  const std::vector<int> starts = {0, 50};
  const StrongBatch sb = assemble_strong_batch(fx.u_scaled, starts, 2);
  const double lambda = 1e9;
  const double total =
      combined_loss_value(p, wb, sb, fx.weights, lambda, fx.dt, SolverKind::rk4);
  const double strong = strong_loss_value(p, sb, fx.dt, SolverKind::rk4);
  CHECK(lambda * strong / total == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("combined_loss gradient matches finite differences") {
  const Fixture fx;
  const ParamSet p = mlp_init({3, 8, 3}, 23);
  std::vector<int> batch = {0, 6, 13, 22};
  const WeakBatch wb = assemble_weak_batch(fx.u_scaled, fx.layout, batch, fx.lhs_all);
  const std::vector<int> starts = {10, 70, 130};
  const StrongBatch sb = assemble_strong_batch(fx.u_scaled, starts, 2);
  const double lambda = 0.5;

  Tape tape;
  const MlpTapeIds ids = mlp_params_on_tape(tape, p);
  tape.backward(combined_loss_node(tape, ids, wb, sb, fx.weights, lambda, fx.dt, SolverKind::rk4));
  const GradSet ad = grad(tape, ids);
  const GradSet fd = oracles::fd_gradient(
      [&](const ParamSet& q) {
        return combined_loss_value(q, wb, sb, fx.weights, lambda, fx.dt, SolverKind::rk4);
      },
      p);
  CHECK(oracles::max_rel_err(ad, fd) < 1e-5);
}

TEST_CASE("assemble_weak_batch: compact and full paths agree") {
  const Fixture fx;
  const ParamSet p = mlp_init({3, 8, 3}, 29);
  // tiny batch takes the compacted path
  std::vector<int> small = {0, 29};
  // full sweep takes the full-matrix path
  std::vector<int> all(fx.layout.count());
  std::iota(all.begin(), all.end(), 0);
  const WeakBatch wb_small = assemble_weak_batch(fx.u_scaled, fx.layout, small, fx.lhs_all);
  const WeakBatch wb_all = assemble_weak_batch(fx.u_scaled, fx.layout, all, fx.lhs_all);
  CHECK(wb_small.eval_rows.rows() < fx.u_scaled.rows());
  CHECK(wb_all.eval_rows.rows() == fx.u_scaled.rows());

  // per-subdomain residuals must not depend on the path
  Mat f_small, f_all;
  mlp_apply_batch(p, wb_small.eval_rows, f_small);
  mlp_apply_batch(p, wb_all.eval_rows, f_all);
  const int m = fx.weights.m;
  for (size_t c = 0; c < small.size(); ++c) {
    const int pos = int(std::find(all.begin(), all.end(), small[c]) - all.begin());
    for (int j = 0; j < 3; ++j) {
      double rs = wb_small.lhs_rows(int(c), j), ra = wb_all.lhs_rows(pos, j);
      for (int i = 0; i < m; ++i) {
        rs += fx.weights.w_rhs[i] * f_small(wb_small.node_idx[c * m + i], j);
        ra += fx.weights.w_rhs[i] * f_all(wb_all.node_idx[size_t(pos) * m + i], j);
      }
      CHECK(rs == doctest::Approx(ra).epsilon(1e-14));
    }
  }
}
