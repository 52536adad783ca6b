#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wpnode/errors.hpp"
#include "wpnode/integrators.hpp"
#include "wpnode/ks.hpp"
#include "wpnode/mat.hpp"
#include "wpnode/random.hpp"
#include "wpnode/systems.hpp"

namespace wpnode {

static_assert(std::endian::native == std::endian::little,
              "trajectory files are little-endian; byte swapping is not implemented");

// Uniformly sampled multivariate time series: row n holds the state at
// t0 + n * dt.
struct Trajectory {
  Mat states;
  double dt = 0.0;
  double t0 = 0.0;
  SystemSpec system;
  double sigma_nr = 0.0;
  uint64_t seed = 0;
  int burn_in = 0;

  int n() const { return states.rows(); }
  int d() const { return states.cols(); }

  void validate() const {
    if (states.rows() < 2) throw config_error("Trajectory: needs at least 2 rows");
    if (dt <= 0) throw config_error("Trajectory: dt must be positive");
    if (!states.all_finite()) throw numerical_error("Trajectory: non-finite states");
  }
};

// Per-dimension root mean square over the full series.
inline std::vector<double> rms_per_dim(const Mat& states) {
  std::vector<double> rms(states.cols(), 0.0);
  for (int i = 0; i < states.rows(); ++i) {
    const double* r = states.row(i);
    for (int j = 0; j < states.cols(); ++j) rms[j] += r[j] * r[j];
  }
  for (double& v : rms) v = std::sqrt(v / double(states.rows()));
  return rms;
}

inline std::vector<double> std_per_dim(const Mat& states) {
  const int n = states.rows(), d = states.cols();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) mean[j] += states(i, j);
  for (double& m : mean) m /= double(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      const double c = states(i, j) - mean[j];
      var[j] += c * c;
    }
  std::vector<double> sd(d);
  for (int j = 0; j < d; ++j) sd[j] = std::sqrt(var[j] / double(n));
  return sd;
}

// Adds i.i.d. zero-mean Gaussian noise with per-dimension standard deviation
// sigma_nr * RMS of that dimension's clean signal.
inline Trajectory add_noise(const Trajectory& clean, double sigma_nr, uint64_t seed) {
  if (sigma_nr < 0) throw config_error("add_noise: noise ratio must be >= 0");
  Trajectory noisy = clean;
  noisy.sigma_nr = sigma_nr;
  noisy.seed = seed;
  if (sigma_nr == 0.0) return noisy;
  const std::vector<double> rms = rms_per_dim(clean.states);
  Rng rng(derive_seed(seed, 0x6e6f6973u));  // "nois"
  for (int i = 0; i < noisy.states.rows(); ++i) {
    double* r = noisy.states.row(i);
    for (int j = 0; j < noisy.states.cols(); ++j) r[j] += sigma_nr * rms[j] * rng.normal();
  }
  return noisy;
}

namespace detail {

inline std::vector<double> initial_condition(const SystemSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case SystemKind::l63: {
      std::vector<double> u = {1.0, 1.0, 1.0};
      for (double& v : u) v += 0.05 * rng.uniform(-1.0, 1.0);
      return u;
    }
    case SystemKind::l96: {
      std::vector<double> u(spec.d, spec.forcing);
      for (double& v : u) v += 0.01 * rng.uniform(-1.0, 1.0);
      u[0] += 1.0;
      return u;
    }
    case SystemKind::ks: {
      // low-amplitude random smooth field built from the first few modes
      std::vector<double> u(spec.nx, 0.0);
      for (int m = 1; m <= 4; ++m) {
        const double amp = 0.1 * rng.uniform(0.5, 1.0);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        for (int i = 0; i < spec.nx; ++i) {
          const double x = double(i) / double(spec.nx);
          u[i] += amp * std::cos(2.0 * M_PI * m * x + phase);
        }
      }
      return u;
    }
  }
  throw config_error("initial_condition: unknown system");
}

}  // namespace detail

inline int default_burn_in(const SystemSpec& spec) {
  return spec.kind == SystemKind::ks ? 2000 : 1000;
}

// Integrates from a randomized initial condition, discards the burn-in
// transient, and returns the attractor-resident clean trajectory with
// round(duration / dt) rows.
inline Trajectory generate_dataset(const SystemSpec& spec, double duration, int burn_in,
                                   uint64_t seed) {
  spec.validate();
  if (duration <= 0) throw config_error("generate_dataset: duration must be positive");
  if (burn_in < 0) burn_in = default_burn_in(spec);
  const int n_keep = int(std::llround(duration / spec.dt));
  if (n_keep < 2) throw config_error("generate_dataset: duration shorter than 2 samples");
  Rng rng(derive_seed(seed, 0x696e6974u));  // "init"
  std::vector<double> u = detail::initial_condition(spec, rng);

  Trajectory traj;
  traj.dt = spec.dt;
  traj.system = spec;
  traj.seed = seed;
  traj.burn_in = burn_in;
  traj.states = Mat(n_keep, spec.dim());

  if (spec.kind == SystemKind::ks) {
    KsStepper stepper(spec.nx, spec.dt, spec.domain_length);
    std::vector<double> next(spec.nx);
    for (int s = 0; s < burn_in; ++s) {
      stepper.step(u, next);
      u.swap(next);
    }
    for (int j = 0; j < spec.nx; ++j) traj.states(0, j) = u[j];
    for (int n = 1; n < n_keep; ++n) {
      stepper.step(u, next);
      u.swap(next);
      for (int j = 0; j < spec.nx; ++j) traj.states(n, j) = u[j];
    }
  } else {
    const Lorenz63Field f63(spec);
    const Lorenz96Field f96(spec);
    const VectorField& f =
        spec.kind == SystemKind::l63 ? static_cast<const VectorField&>(f63) : f96;
    for (int s = 0; s < burn_in; ++s) {
      u = rk4_step(f, u, spec.dt);
      for (double v : u)
        if (!std::isfinite(v)) throw numerical_error("blowup during burn-in", s);
    }
    for (int j = 0; j < spec.dim(); ++j) traj.states(0, j) = u[j];
    for (int n = 1; n < n_keep; ++n) {
      u = rk4_step(f, u, spec.dt);
      for (double v : u)
        if (!std::isfinite(v)) throw numerical_error("blowup during generation", n - 1);
      for (int j = 0; j < spec.dim(); ++j) traj.states(n, j) = u[j];
    }
  }
  return traj;
}

// Continues a trajectory from its final state for n_steps more samples
// (the returned trajectory does not repeat the final state).
inline Trajectory continue_trajectory(const Trajectory& traj, int n_steps) {
  const SystemSpec& spec = traj.system;
  std::vector<double> u(traj.states.row(traj.n() - 1), traj.states.row(traj.n() - 1) + traj.d());
  Trajectory out;
  out.dt = traj.dt;
  out.t0 = traj.t0 + traj.n() * traj.dt;
  out.system = spec;
  out.states = Mat(n_steps, traj.d());
  if (spec.kind == SystemKind::ks) {
    KsStepper stepper(spec.nx, spec.dt, spec.domain_length);
    std::vector<double> next(spec.nx);
    for (int n = 0; n < n_steps; ++n) {
      stepper.step(u, next);
      u.swap(next);
      for (int j = 0; j < traj.d(); ++j) out.states(n, j) = u[j];
    }
  } else {
    const Lorenz63Field f63(spec);
    const Lorenz96Field f96(spec);
    const VectorField& f =
        spec.kind == SystemKind::l63 ? static_cast<const VectorField&>(f63) : f96;
    for (int n = 0; n < n_steps; ++n) {
      u = rk4_step(f, u, spec.dt);
      for (double v : u)
        if (!std::isfinite(v)) throw numerical_error("blowup during continuation", n - 1);
      for (int j = 0; j < traj.d(); ++j) out.states(n, j) = u[j];
    }
  }
  return out;
}

// ---- file format -------------------------------------------------------
// Raw little-endian float64, row-major N x D, plus a JSON sidecar holding
// the metadata needed to interpret and reproduce it.

inline void save_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open for writing: " + path);
  bin.write(reinterpret_cast<const char*>(traj.states.data()),
            std::streamsize(traj.states.size() * sizeof(double)));
  nlohmann::json j;
  j["system"] = to_string(traj.system.kind);
  j["params"] = to_json(traj.system);
  j["dt"] = traj.dt;
  j["t0"] = traj.t0;
  j["N"] = traj.n();
  j["D"] = traj.d();
  j["sigma_nr"] = traj.sigma_nr;
  j["seed"] = traj.seed;
  j["burn_in"] = traj.burn_in;
  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot open for writing: " + path + ".json");
  side << j.dump(1) << "\n";
}

inline Trajectory load_trajectory(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side) throw std::runtime_error("missing sidecar: " + path + ".json");
  nlohmann::json j;
  side >> j;
  Trajectory traj;
  traj.system = system_from_json(j.at("params"));
  traj.dt = j.at("dt").get<double>();
  traj.t0 = j.at("t0").get<double>();
  traj.sigma_nr = j.at("sigma_nr").get<double>();
  traj.seed = j.at("seed").get<uint64_t>();
  traj.burn_in = j.at("burn_in").get<int>();
  const int n = j.at("N").get<int>(), d = j.at("D").get<int>();
  traj.states = Mat(n, d);
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open: " + path);
  bin.read(reinterpret_cast<char*>(traj.states.data()),
           std::streamsize(traj.states.size() * sizeof(double)));
  if (bin.gcount() != std::streamsize(traj.states.size() * sizeof(double)))
    throw std::runtime_error("short read (file does not match sidecar): " + path);
  return traj;
}

}  // namespace wpnode
