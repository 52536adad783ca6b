#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "wpnode/errors.hpp"
#include "wpnode/mat.hpp"
#include "wpnode/systems.hpp"

namespace wpnode {

enum class SolverKind { euler, midpoint, rk4, bosh3, dopri5 };

inline std::string to_string(SolverKind s) {
  switch (s) {
    case SolverKind::euler: return "euler";
    case SolverKind::midpoint: return "midpoint";
    case SolverKind::rk4: return "rk4";
    case SolverKind::bosh3: return "bosh3";
    case SolverKind::dopri5: return "dopri5";
  }
  return "?";
}

inline SolverKind solver_from_string(const std::string& s) {
  if (s == "euler") return SolverKind::euler;
  if (s == "midpoint") return SolverKind::midpoint;
  if (s == "rk4") return SolverKind::rk4;
  if (s == "bosh3") return SolverKind::bosh3;
  if (s == "dopri5") return SolverKind::dopri5;
  throw config_error("unknown solver: " + s);
}

inline bool solver_is_adaptive(SolverKind s) {
  return s == SolverKind::bosh3 || s == SolverKind::dopri5;
}

namespace detail {

inline void axpy(std::span<double> out, std::span<const double> u, double a,
                 std::span<const double> k) {
  for (size_t i = 0; i < out.size(); ++i) out[i] = u[i] + a * k[i];
}

}  // namespace detail

inline std::vector<double> euler_step(const VectorField& f, std::span<const double> u, double dt) {
  std::vector<double> k(u.size()), out(u.size());
  f.eval(u, k);
  detail::axpy(out, u, dt, k);
  return out;
}

inline std::vector<double> midpoint_step(const VectorField& f, std::span<const double> u,
                                         double dt) {
  std::vector<double> k1(u.size()), mid(u.size()), k2(u.size()), out(u.size());
  f.eval(u, k1);
  detail::axpy(mid, u, 0.5 * dt, k1);
  f.eval(mid, k2);
  detail::axpy(out, u, dt, k2);
  return out;
}

inline std::vector<double> rk4_step(const VectorField& f, std::span<const double> u, double dt) {
  const size_t n = u.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n), out(n);
  f.eval(u, k1);
  detail::axpy(tmp, u, 0.5 * dt, k1);
  f.eval(tmp, k2);
  detail::axpy(tmp, u, 0.5 * dt, k2);
  f.eval(tmp, k3);
  detail::axpy(tmp, u, dt, k3);
  f.eval(tmp, k4);
  for (size_t i = 0; i < n; ++i)
    out[i] = u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

namespace detail {

struct AdaptiveState {
  double h = 0.0;  // carried step size across grid segments
};

// Embedded RK pair advanced from t to t_end; state updated in place.
// Returns false on step-size underflow or non-finite state.
template <int Stages>
bool adaptive_segment(const VectorField& f, std::vector<double>& u, double t, double t_end,
                      double rtol, double atol, int order, const double (*a)[Stages],
                      const double* b, const double* e, int stages, AdaptiveState& st) {
  const size_t n = u.size();
  std::vector<std::vector<double>> k(stages, std::vector<double>(n));
  std::vector<double> tmp(n), unew(n);
  if (st.h <= 0.0) st.h = (t_end - t) * 0.1;
  double h = std::min(st.h, t_end - t);
  const double hmin = 1e-14 * std::max(1.0, std::abs(t_end));
  int guard = 0;
  while (t < t_end) {
    if (h < hmin || ++guard > 100000) return false;
    h = std::min(h, t_end - t);
    f.eval(u, k[0]);
    bool finite = true;
    for (int s = 1; s < stages && finite; ++s) {
      for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < s; ++j) acc += a[s][j] * k[j][i];
        tmp[i] = u[i] + h * acc;
        if (!std::isfinite(tmp[i])) finite = false;
      }
      if (finite) f.eval(tmp, k[s]);
    }
    double err = 0.0;
    if (finite) {
      for (size_t i = 0; i < n; ++i) {
        double acc = 0.0, eacc = 0.0;
        for (int s = 0; s < stages; ++s) {
          acc += b[s] * k[s][i];
          eacc += e[s] * k[s][i];
        }
        unew[i] = u[i] + h * acc;
        if (!std::isfinite(unew[i])) {
          finite = false;
          break;
        }
        const double sc = atol + rtol * std::max(std::abs(u[i]), std::abs(unew[i]));
        const double r = h * eacc / sc;
        err += r * r;
      }
      err = std::sqrt(err / double(n));
    }
    if (!finite) {
      h *= 0.5;
      continue;
    }
    if (err <= 1.0) {
      t += h;
      u.swap(unew);
      const double fac = err == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -1.0 / order)));
      h *= fac;
      st.h = h;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -1.0 / order));
    }
  }
  return true;
}

// Bogacki-Shampine 3(2)
inline bool bosh3_segment(const VectorField& f, std::vector<double>& u, double t, double t_end,
                          double rtol, double atol, AdaptiveState& st) {
  static const double a[4][4] = {{0, 0, 0, 0},
                                 {1.0 / 2, 0, 0, 0},
                                 {0, 3.0 / 4, 0, 0},
                                 {2.0 / 9, 1.0 / 3, 4.0 / 9, 0}};
  static const double b[4] = {2.0 / 9, 1.0 / 3, 4.0 / 9, 0.0};
  static const double e[4] = {2.0 / 9 - 7.0 / 24, 1.0 / 3 - 1.0 / 4, 4.0 / 9 - 1.0 / 3,
                              -1.0 / 8};
  return adaptive_segment<4>(f, u, t, t_end, rtol, atol, 3, a, b, e, 4, st);
}

// Dormand-Prince 5(4)
inline bool dopri5_segment(const VectorField& f, std::vector<double>& u, double t, double t_end,
                           double rtol, double atol, AdaptiveState& st) {
  static const double a[7][7] = {
      {0, 0, 0, 0, 0, 0, 0},
      {1.0 / 5, 0, 0, 0, 0, 0, 0},
      {3.0 / 40, 9.0 / 40, 0, 0, 0, 0, 0},
      {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0, 0},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0, 0},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0, 0},
      {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0}};
  static const double b[7] = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784,
                              11.0 / 84, 0};
  static const double e[7] = {71.0 / 57600, 0, -71.0 / 16695, 71.0 / 1920,
                              -17253.0 / 339200, 22.0 / 525, -1.0 / 40};
  return adaptive_segment<7>(f, u, t, t_end, rtol, atol, 5, a, b, e, 7, st);
}

}  // namespace detail

// Integrates u' = f(u) over a uniform grid t0 + n*dt, n = 0..n_steps, and
// returns all n_steps + 1 states (row 0 is u0). Fixed-step methods take one
// step per interval; adaptive methods substep within each interval and land
// exactly on the grid. Throws numerical_error carrying the last grid index
// that still held a finite state.
inline Mat integrate(const VectorField& f, std::span<const double> u0, int n_steps, double dt,
                     SolverKind method, double rtol = 1e-8, double atol = 1e-8) {
  if (n_steps < 1) throw config_error("integrate: n_steps must be >= 1");
  if (dt <= 0) throw config_error("integrate: dt must be positive");
  const int d = int(u0.size());
  Mat out(n_steps + 1, d);
  std::vector<double> u(u0.begin(), u0.end());
  for (int j = 0; j < d; ++j) out(0, j) = u[j];
  detail::AdaptiveState st;
  for (int n = 0; n < n_steps; ++n) {
    const double t = n * dt;
    bool ok = true;
    switch (method) {
      case SolverKind::euler: u = euler_step(f, u, dt); break;
      case SolverKind::midpoint: u = midpoint_step(f, u, dt); break;
      case SolverKind::rk4: u = rk4_step(f, u, dt); break;
      case SolverKind::bosh3: ok = detail::bosh3_segment(f, u, t, t + dt, rtol, atol, st); break;
      case SolverKind::dopri5: ok = detail::dopri5_segment(f, u, t, t + dt, rtol, atol, st); break;
    }
    for (double v : u)
      if (!std::isfinite(v)) ok = false;
    if (!ok)
      throw numerical_error("integration failed at grid index " + std::to_string(n + 1), n);
    for (int j = 0; j < d; ++j) out(n + 1, j) = u[j];
  }
  return out;
}

}  // namespace wpnode
