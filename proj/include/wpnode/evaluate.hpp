#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "wpnode/errors.hpp"
#include "wpnode/integrators.hpp"
#include "wpnode/metrics.hpp"
#include "wpnode/mlp.hpp"
#include "wpnode/random.hpp"
#include "wpnode/scaling.hpp"
#include "wpnode/systems.hpp"
#include "wpnode/trajectory.hpp"

namespace wpnode {

// Learned field in physical units: scale the state, evaluate the network,
// then undo the per-dimension scaling on the returned velocity.
struct ScaledMlpField final : VectorField {
  const ParamSet* params;
  const MinMaxScaler* scaler;

  ScaledMlpField(const ParamSet& p, const MinMaxScaler& s) : params(&p), scaler(&s) {}

  int dim() const override { return params->input_dim(); }

  void eval(std::span<const double> u, std::span<double> du) const override {
    std::vector<double> scaled(u.size());
    scaler->apply(u, scaled);
    const std::vector<double> v = mlp_apply(*params, scaled);
    for (size_t j = 0; j < du.size(); ++j) du[j] = v[j] * scaler->range(int(j));
  }
};

struct EvalOptions {
  int n_starts = 30;
  double horizon_lyap = 10.0;   // forecast horizon per start, Lyapunov times
  double kl_duration = -1.0;    // seconds of free run for the KL; -1: reference length
  int bins = 50;
  SolverKind solver = SolverKind::dopri5;
  double rtol = 1e-8, atol = 1e-8;
  uint64_t seed = 0;
};

// Forecast-skill and invariant-measure summary over repeated starts.
struct EvalReport {
  std::vector<double> vpt_per_start;
  double vpt_mean = 0.0;
  double vpt_std = 0.0;
  std::vector<double> kl_per_dim;  // KL(reference || prediction)
  double kl_mean = 0.0;
  bool kl_valid = false;
  int blowups = 0;
  // metadata
  double eps = 0.0, lyapunov = 0.0, horizon_lyap = 0.0;
  int n_starts = 0;
  std::string solver;
  uint64_t seed = 0;
};

inline nlohmann::json to_json(const EvalReport& r) {
  return nlohmann::json{{"vpt_per_start", r.vpt_per_start},
                        {"vpt_mean", r.vpt_mean},
                        {"vpt_std", r.vpt_std},
                        {"kl_per_dim", r.kl_per_dim},
                        {"kl_mean", r.kl_mean},
                        {"kl_valid", r.kl_valid},
                        {"kl_direction", "kl(reference || prediction)"},
                        {"blowups", r.blowups},
                        {"eps", r.eps},
                        {"lyapunov", r.lyapunov},
                        {"horizon_lyap", r.horizon_lyap},
                        {"n_starts", r.n_starts},
                        {"solver", r.solver},
                        {"seed", r.seed}};
}

inline void save_eval_report(const std::string& path, const EvalReport& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << to_json(r).dump(1) << "\n";
}

namespace detail {

// Free run that tolerates blowup: returns the valid prefix and whether the
// integration survived.
inline std::pair<Mat, bool> free_run(const VectorField& f, std::span<const double> u0,
                                     int n_steps, double dt, SolverKind solver, double rtol,
                                     double atol) {
  try {
    return {integrate(f, u0, n_steps, dt, solver, rtol, atol), true};
  } catch (const numerical_error& e) {
    const long valid = std::max(0L, e.last_valid_index);
    Mat partial(int(valid) + 1, int(u0.size()));
    // re-integrate the valid prefix; cheaper bookkeeping than threading
    // partial states through the exception
    if (valid > 0) {
      try {
        partial = integrate(f, u0, int(valid), dt, solver, rtol, atol);
      } catch (const numerical_error&) {
        partial = Mat(1, int(u0.size()));
        for (size_t j = 0; j < u0.size(); ++j) partial(0, j) = u0[j];
      }
    } else {
      for (size_t j = 0; j < u0.size(); ++j) partial(0, j) = u0[j];
    }
    return {std::move(partial), false};
  }
}

inline void run_starts_concurrently(int n, const std::function<void(int)>& body) {
  const int nt = std::min(worker_threads(), n);
  if (nt <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&, t] {
      for (int i = t; i < n; i += nt) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Evaluates a field against a clean reference continuation (physical units,
// uniformly sampled at sys.dt, beyond the training region): VPT over
// n_starts seeded random starts plus dimension-wise KL of the invariant
// measure from one long free run. Deterministic for a fixed seed; starts run
// concurrently and the report keeps start-index order.
inline EvalReport evaluate_model(const VectorField& model, const SystemSpec& sys,
                                 const Mat& reference, const EvalOptions& opt,
                                 Mat* kl_run_out = nullptr) {
  if (reference.rows() < 10) throw config_error("evaluate_model: reference too short");
  if (model.dim() != reference.cols())
    throw config_error("evaluate_model: model and reference dimensions differ");
  const double dt = sys.dt;
  const int horizon_steps = int(std::floor(opt.horizon_lyap / (sys.lyapunov * dt)));
  if (horizon_steps + 1 >= reference.rows())
    throw config_error("evaluate_model: reference shorter than the forecast horizon");

  EvalReport rep;
  rep.eps = sys.vpt_threshold;
  rep.lyapunov = sys.lyapunov;
  rep.horizon_lyap = opt.horizon_lyap;
  rep.n_starts = opt.n_starts;
  rep.solver = to_string(opt.solver);
  rep.seed = opt.seed;

  const std::vector<double> sigma = std_per_dim(reference);

  Rng rng(derive_seed(opt.seed, 0x73746172u));  // "star"
  std::vector<int> starts(opt.n_starts);
  const int max_start = reference.rows() - horizon_steps - 1;
  for (int& s : starts) s = int(rng.integer(uint64_t(max_start)));

  rep.vpt_per_start.assign(opt.n_starts, 0.0);
  std::vector<int> blowup_flags(opt.n_starts, 0);
  detail::run_starts_concurrently(opt.n_starts, [&](int i) {
    const int s = starts[i];
    const auto [pred, ok] = detail::free_run(model, {reference.row(s), size_t(reference.cols())},
                                             horizon_steps, dt, opt.solver, opt.rtol, opt.atol);
    if (!ok) blowup_flags[i] = 1;
    Mat truth(pred.rows(), reference.cols());
    for (int r = 0; r < pred.rows(); ++r)
      std::copy(reference.row(s + r), reference.row(s + r) + reference.cols(), truth.row(r));
    rep.vpt_per_start[i] = vpt(pred, truth, sigma, sys.vpt_threshold, dt, sys.lyapunov);
  });
  for (int f : blowup_flags) rep.blowups += f;

  double mean = 0.0;
  for (double v : rep.vpt_per_start) mean += v;
  mean /= double(opt.n_starts);
  double var = 0.0;
  for (double v : rep.vpt_per_start) var += (v - mean) * (v - mean);
  rep.vpt_mean = mean;
  rep.vpt_std = std::sqrt(var / double(opt.n_starts));

  // invariant measure: one long free run against the reference density
  const int kl_steps = opt.kl_duration > 0 ? int(std::llround(opt.kl_duration / dt))
                                           : reference.rows() - 1;
  const auto [run, run_ok] =
      detail::free_run(model, {reference.row(starts[0]), size_t(reference.cols())}, kl_steps, dt,
                       opt.solver, opt.rtol, opt.atol);
  rep.kl_valid = run_ok;
  if (run.rows() >= kl_steps / 10 + 2) {
    const auto ranges = union_ranges(column_ranges(reference), column_ranges(run));
    const auto h_ref = histogram_per_dim(reference, opt.bins, ranges);
    const auto h_run = histogram_per_dim(run, opt.bins, ranges);
    rep.kl_per_dim.resize(reference.cols());
    double kl_acc = 0.0;
    for (int j = 0; j < reference.cols(); ++j) {
      rep.kl_per_dim[j] = kl_divergence(h_ref[j], h_run[j]);
      kl_acc += rep.kl_per_dim[j];
    }
    rep.kl_mean = kl_acc / double(reference.cols());
  } else {
    rep.kl_per_dim.assign(reference.cols(), std::numeric_limits<double>::quiet_NaN());
    rep.kl_mean = std::numeric_limits<double>::quiet_NaN();
    rep.kl_valid = false;
  }
  if (kl_run_out) *kl_run_out = run;
  return rep;
}

// Long free-run densities under several solvers from a shared initial state,
// with shared bin edges so the densities are directly comparable.
struct SolverDensity {
  SolverKind solver;
  bool blew_up = false;
  std::vector<HistogramPDF> per_dim;
};

inline std::vector<SolverDensity> solver_sweep(const VectorField& model, const SystemSpec& sys,
                                               std::span<const double> u0, double duration,
                                               std::span<const SolverKind> solvers, int bins,
                                               double rtol = 1e-8, double atol = 1e-8) {
  const int n_steps = int(std::llround(duration / sys.dt));
  if (n_steps < 10) throw config_error("solver_sweep: duration too short");
  std::vector<Mat> runs(solvers.size());
  std::vector<bool> ok(solvers.size());
  for (size_t k = 0; k < solvers.size(); ++k) {
    auto [run, good] = detail::free_run(model, u0, n_steps, sys.dt, solvers[k], rtol, atol);
    runs[k] = std::move(run);
    ok[k] = good;
  }
  std::vector<std::pair<double, double>> ranges;
  for (size_t k = 0; k < solvers.size(); ++k) {
    if (runs[k].rows() < 2) continue;
    const auto r = column_ranges(runs[k]);
    ranges = ranges.empty() ? r : union_ranges(ranges, r);
  }
  if (ranges.empty()) throw numerical_error("solver_sweep: every solver blew up immediately");
  std::vector<SolverDensity> out;
  for (size_t k = 0; k < solvers.size(); ++k) {
    SolverDensity d;
    d.solver = solvers[k];
    d.blew_up = !ok[k];
    if (runs[k].rows() >= 2) d.per_dim = histogram_per_dim(runs[k], bins, ranges);
    out.push_back(std::move(d));
  }
  return out;
}

// Joint (u, du/dx) density for spatiotemporal fields, pooled over space and
// time; the spatial derivative uses centered differences on the cyclic grid.
struct JointHistogram {
  std::vector<double> u_edges, du_edges;
  Mat masses;  // bins x bins, sums to 1
};

inline JointHistogram joint_gradient_histogram(const Mat& states, double dx, int bins) {
  if (bins < 1 || states.rows() < 1 || states.cols() < 3)
    throw config_error("joint_gradient_histogram: degenerate input");
  const int n = states.rows(), d = states.cols();
  Mat grad(n, d);
  for (int i = 0; i < n; ++i) {
    const double* r = states.row(i);
    double* g = grad.row(i);
    for (int j = 0; j < d; ++j) {
      const int jp = j + 1 == d ? 0 : j + 1;
      const int jm = j == 0 ? d - 1 : j - 1;
      g[j] = (r[jp] - r[jm]) / (2.0 * dx);
    }
  }
  double ulo = states(0, 0), uhi = ulo, glo = grad(0, 0), ghi = glo;
  for (double v : states.raw()) {
    ulo = std::min(ulo, v);
    uhi = std::max(uhi, v);
  }
  for (double v : grad.raw()) {
    glo = std::min(glo, v);
    ghi = std::max(ghi, v);
  }
  if (!(uhi > ulo)) uhi = ulo + 1.0;
  if (!(ghi > glo)) ghi = glo + 1.0;
  JointHistogram h;
  h.u_edges.resize(bins + 1);
  h.du_edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) {
    h.u_edges[b] = ulo + (uhi - ulo) * double(b) / double(bins);
    h.du_edges[b] = glo + (ghi - glo) * double(b) / double(bins);
  }
  h.masses = Mat(bins, bins);
  const double us = double(bins) / (uhi - ulo), gs = double(bins) / (ghi - glo);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      int bu = std::max(0, std::min(bins - 1, int((states(i, j) - ulo) * us)));
      int bg = std::max(0, std::min(bins - 1, int((grad(i, j) - glo) * gs)));
      h.masses(bu, bg) += 1.0;
    }
  const double inv = 1.0 / (double(n) * double(d));
  for (double& m : h.masses.raw()) m *= inv;
  return h;
}

inline void export_joint_histogram_csv(const std::string& path, const JointHistogram& h,
                                       const std::string& label = "") {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "label,u_lo,u_hi,dudx_lo,dudx_hi,mass\n";
  out.precision(12);
  const int bins = h.masses.rows();
  for (int bu = 0; bu < bins; ++bu)
    for (int bg = 0; bg < bins; ++bg)
      out << label << "," << h.u_edges[bu] << "," << h.u_edges[bu + 1] << "," << h.du_edges[bg]
          << "," << h.du_edges[bg + 1] << "," << h.masses(bu, bg) << "\n";
}

// CSV: one row per (dim, bin) with edges and masses, plus an optional label.
inline void export_histograms_csv(const std::string& path,
                                  std::span<const HistogramPDF> per_dim,
                                  const std::string& label = "") {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "label,dim,bin_lo,bin_hi,mass\n";
  out.precision(12);
  for (size_t j = 0; j < per_dim.size(); ++j)
    for (int b = 0; b < per_dim[j].bins(); ++b)
      out << label << "," << j << "," << per_dim[j].edges[b] << "," << per_dim[j].edges[b + 1]
          << "," << per_dim[j].masses[b] << "\n";
}

}  // namespace wpnode
