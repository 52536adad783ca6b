#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "wpnode/errors.hpp"
#include "wpnode/integrators.hpp"
#include "wpnode/mat.hpp"
#include "wpnode/mlp.hpp"
#include "wpnode/tape.hpp"
#include "wpnode/weak_weights.hpp"
#include "wpnode/windows.hpp"

namespace wpnode {

// ---- weak-form loss ---------------------------------------------------------
//
// Loss over a batch of subdomains: mean_b || u^T w_lhs + f^T w_rhs ||^2 with
// f the network evaluated at the subdomain nodes. The u-side contraction has
// no parameter dependence and is precomputed once per dataset; per step the
// network is evaluated on the distinct samples the batch touches and each
// subdomain contracts M rows of that shared evaluation.

// Per-subdomain u-side contractions for every subdomain in the layout (K x D).
inline Mat precompute_lhs_contractions(const Mat& u_scaled, const SubdomainLayout& layout,
                                       const SubdomainWeights& w) {
  Mat lhs(layout.count(), u_scaled.cols());
  for (int k = 0; k < layout.count(); ++k) {
    const int start = layout.starts[k];
    double* out = lhs.row(k);
    for (int i = 0; i < layout.m; ++i) {
      const double wi = w.w_lhs[i];
      const double* row = u_scaled.row(start + i);
      for (int j = 0; j < u_scaled.cols(); ++j) out[j] += wi * row[j];
    }
  }
  return lhs;
}

// Everything one optimization step needs for its weak batch.
struct WeakBatch {
  Mat eval_rows;              // samples the network is evaluated on
  std::vector<int> node_idx;  // B * M indices into eval_rows
  Mat lhs_rows;               // B x D constant u-side contractions
  int batch = 0;
};

inline WeakBatch assemble_weak_batch(const Mat& u_scaled, const SubdomainLayout& layout,
                                     std::span<const int> subdomain_ids, const Mat& lhs_all) {
  const int m = layout.m;
  const int b = int(subdomain_ids.size());
  WeakBatch out;
  out.batch = b;
  out.node_idx.resize(size_t(b) * m);
  out.lhs_rows = Mat(b, u_scaled.cols());

  // If the batch touches most of the series, evaluating the network on the
  // full series is cheaper than gathering; otherwise compact to the rows used.
  std::vector<int> rows;
  rows.reserve(size_t(b) * m);
  for (int c = 0; c < b; ++c) {
    const int start = layout.starts[subdomain_ids[c]];
    for (int i = 0; i < m; ++i) rows.push_back(start + i);
  }
  std::vector<int> uniq = rows;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  if (int(uniq.size()) * 2 >= u_scaled.rows()) {
    out.eval_rows = u_scaled;
    for (size_t i = 0; i < rows.size(); ++i) out.node_idx[i] = rows[i];
  } else {
    out.eval_rows = Mat(int(uniq.size()), u_scaled.cols());
    for (size_t r = 0; r < uniq.size(); ++r) {
      const double* src = u_scaled.row(uniq[r]);
      std::copy(src, src + u_scaled.cols(), out.eval_rows.row(int(r)));
    }
    for (size_t i = 0; i < rows.size(); ++i) {
      const auto it = std::lower_bound(uniq.begin(), uniq.end(), rows[i]);
      out.node_idx[i] = int(it - uniq.begin());
    }
  }
  for (int c = 0; c < b; ++c) {
    const double* src = lhs_all.row(subdomain_ids[c]);
    std::copy(src, src + lhs_all.cols(), out.lhs_rows.row(c));
  }
  return out;
}

// Differentiable weak loss; returns the scalar tape node.
inline int weak_loss_node(Tape& tape, const MlpTapeIds& net, const WeakBatch& batch,
                          const SubdomainWeights& w) {
  const int x = tape.input(batch.eval_rows);
  const int f = mlp_forward(tape, net, x);
  const int contracted = tape.contract(f, batch.node_idx, w.w_rhs);
  const int resid = tape.shift(contracted, 1.0, batch.lhs_rows);
  return tape.sum_sq(resid, 1.0 / double(batch.batch));
}

// Forward-only value, used for validation and finite-difference oracles.
inline double weak_loss_value(const ParamSet& params, const WeakBatch& batch,
                              const SubdomainWeights& w) {
  Mat f;
  mlp_apply_batch(params, batch.eval_rows, f);
  const int m = w.m, d = f.cols();
  double acc = 0.0;
  for (int b = 0; b < batch.batch; ++b) {
    const double* lhs = batch.lhs_rows.row(b);
    for (int j = 0; j < d; ++j) {
      double r = lhs[j];
      for (int i = 0; i < m; ++i)
        r += w.w_rhs[i] * f(batch.node_idx[size_t(b) * m + i], j);
      acc += r * r;
    }
  }
  return acc / double(batch.batch);
}

// ---- strong (rollout) loss --------------------------------------------------
//
// (1/T) sum_{n=0..T} || u(t_n) - uhat(t_n) ||^2 averaged over the batch,
// where uhat rolls the learned field forward T transitions from y0 with a
// fixed-step solver unrolled on the tape. uhat(t_0) = y0 exactly, so the
// n = 0 term is identically zero and rollout_T = 1 penalizes exactly the
// first transition.

struct StrongBatch {
  Mat y0;                   // B x D initial states
  std::vector<Mat> targets; // T matrices of B x D states at t_1..t_T
  int batch = 0;
  int steps = 0;  // T transitions
};

inline StrongBatch assemble_strong_batch(const Mat& u_scaled, std::span<const int> starts,
                                         int steps) {
  const int b = int(starts.size()), d = u_scaled.cols();
  for (int s : starts)
    if (s + steps >= u_scaled.rows())
      throw config_error("assemble_strong_batch: window exceeds series");
  StrongBatch out;
  out.batch = b;
  out.steps = steps;
  out.y0 = Mat(b, d);
  for (int c = 0; c < b; ++c)
    std::copy(u_scaled.row(starts[c]), u_scaled.row(starts[c]) + d, out.y0.row(c));
  out.targets.reserve(steps);
  for (int n = 1; n <= steps; ++n) {
    Mat t(b, d);
    for (int c = 0; c < b; ++c)
      std::copy(u_scaled.row(starts[c] + n), u_scaled.row(starts[c] + n) + d, t.row(c));
    out.targets.push_back(std::move(t));
  }
  return out;
}

namespace detail {

inline int tape_solver_step(Tape& tape, const MlpTapeIds& net, int state, double dt,
                            SolverKind solver) {
  switch (solver) {
    case SolverKind::euler: {
      const int k = mlp_forward(tape, net, state);
      return tape.lincomb({state, k}, {1.0, dt});
    }
    case SolverKind::midpoint: {
      const int k1 = mlp_forward(tape, net, state);
      const int mid = tape.lincomb({state, k1}, {1.0, 0.5 * dt});
      const int k2 = mlp_forward(tape, net, mid);
      return tape.lincomb({state, k2}, {1.0, dt});
    }
    case SolverKind::rk4: {
      const int k1 = mlp_forward(tape, net, state);
      const int s2 = tape.lincomb({state, k1}, {1.0, 0.5 * dt});
      const int k2 = mlp_forward(tape, net, s2);
      const int s3 = tape.lincomb({state, k2}, {1.0, 0.5 * dt});
      const int k3 = mlp_forward(tape, net, s3);
      const int s4 = tape.lincomb({state, k3}, {1.0, dt});
      const int k4 = mlp_forward(tape, net, s4);
      return tape.lincomb({state, k1, k2, k3, k4},
                          {1.0, dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0});
    }
    default:
      throw config_error("training rollouts need a fixed-step solver (euler, midpoint, rk4)");
  }
}

}  // namespace detail

inline int strong_loss_node(Tape& tape, const MlpTapeIds& net, const StrongBatch& batch,
                            double dt, SolverKind solver) {
  const double scale = 1.0 / (double(batch.steps) * double(batch.batch));
  int state = tape.input(batch.y0);
  std::vector<int> terms;
  std::vector<double> ones;
  for (int n = 0; n < batch.steps; ++n) {
    state = detail::tape_solver_step(tape, net, state, dt, solver);
    const int diff = tape.shift(state, -1.0, batch.targets[n]);
    terms.push_back(tape.sum_sq(diff, scale));
    ones.push_back(1.0);
  }
  return terms.size() == 1 ? terms[0] : tape.lincomb(terms, ones);
}

// Plain batched rollout step shared by the forward-only strong loss.
inline void plain_solver_step(const ParamSet& params, Mat& state, double dt, SolverKind solver,
                              Mat& k1, Mat& k2, Mat& k3, Mat& k4, Mat& tmp) {
  auto axpy = [&](Mat& out, const Mat& base, double a, const Mat& k) {
    if (!out.same_shape(base)) out = Mat(base.rows(), base.cols());
    for (size_t i = 0; i < base.size(); ++i) out.data()[i] = base.data()[i] + a * k.data()[i];
  };
  switch (solver) {
    case SolverKind::euler:
      mlp_apply_batch(params, state, k1);
      axpy(state, state, dt, k1);
      return;
    case SolverKind::midpoint:
      mlp_apply_batch(params, state, k1);
      axpy(tmp, state, 0.5 * dt, k1);
      mlp_apply_batch(params, tmp, k2);
      axpy(state, state, dt, k2);
      return;
    case SolverKind::rk4:
      mlp_apply_batch(params, state, k1);
      axpy(tmp, state, 0.5 * dt, k1);
      mlp_apply_batch(params, tmp, k2);
      axpy(tmp, state, 0.5 * dt, k2);
      mlp_apply_batch(params, tmp, k3);
      axpy(tmp, state, dt, k3);
      mlp_apply_batch(params, tmp, k4);
      for (size_t i = 0; i < state.size(); ++i)
        state.data()[i] += dt / 6.0 * (k1.data()[i] + 2.0 * k2.data()[i] + 2.0 * k3.data()[i] +
                                       k4.data()[i]);
      return;
    default:
      throw config_error("training rollouts need a fixed-step solver (euler, midpoint, rk4)");
  }
}

inline double strong_loss_value(const ParamSet& params, const StrongBatch& batch, double dt,
                                SolverKind solver) {
  Mat state = batch.y0, k1, k2, k3, k4, tmp;
  double acc = 0.0;
  for (int n = 0; n < batch.steps; ++n) {
    plain_solver_step(params, state, dt, solver, k1, k2, k3, k4, tmp);
    const Mat& y = batch.targets[n];
    for (size_t i = 0; i < state.size(); ++i) {
      const double dd = state.data()[i] - y.data()[i];
      acc += dd * dd;
    }
  }
  return acc / (double(batch.steps) * double(batch.batch));
}

// ---- combined loss ------------------------------------------------------

inline int combined_loss_node(Tape& tape, const MlpTapeIds& net, const WeakBatch& weak,
                              const StrongBatch& strong, const SubdomainWeights& w, double lambda,
                              double dt, SolverKind solver) {
  if (lambda < 0) throw config_error("combined loss: lambda must be >= 0");
  const int wl = weak_loss_node(tape, net, weak, w);
  if (lambda == 0.0) return wl;
  const int sl = strong_loss_node(tape, net, strong, dt, solver);
  return tape.lincomb({wl, sl}, {1.0, lambda});
}

inline double combined_loss_value(const ParamSet& params, const WeakBatch& weak,
                                  const StrongBatch& strong, const SubdomainWeights& w,
                                  double lambda, double dt, SolverKind solver) {
  double v = weak_loss_value(params, weak, w);
  if (lambda > 0.0) v += lambda * strong_loss_value(params, strong, dt, solver);
  return v;
}

}  // namespace wpnode
