#pragma once

#include <cmath>
#include <span>
#include <string>

#include <json.hpp>

#include "wpnode/errors.hpp"

namespace wpnode {

enum class SystemKind { l63, l96, ks };

inline std::string to_string(SystemKind k) {
  switch (k) {
    case SystemKind::l63: return "l63";
    case SystemKind::l96: return "l96";
    case SystemKind::ks: return "ks";
  }
  return "?";
}

inline SystemKind system_kind_from_string(const std::string& s) {
  if (s == "l63") return SystemKind::l63;
  if (s == "l96") return SystemKind::l96;
  if (s == "ks") return SystemKind::ks;
  throw config_error("unknown system: " + s + " (expected l63, l96 or ks)");
}

// Benchmark system description plus the quantities evaluation needs: the
// sampling step, the maximal Lyapunov exponent and the VPT threshold.
struct SystemSpec {
  SystemKind kind = SystemKind::l63;
  // Lorenz-63
  double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
  // Lorenz-96
  int d = 40;
  double forcing = 10.0;
  // Kuramoto-Sivashinsky
  double domain_length = 22.0;
  int nx = 64;

  double dt = 0.01;
  double lyapunov = 0.91;
  double vpt_threshold = 0.3;

  int dim() const {
    switch (kind) {
      case SystemKind::l63: return 3;
      case SystemKind::l96: return d;
      case SystemKind::ks: return nx;
    }
    return 0;
  }

  void validate() const {
    if (dt <= 0) throw config_error("SystemSpec: dt must be positive");
    if (lyapunov <= 0) throw config_error("SystemSpec: lyapunov exponent must be positive");
    if (vpt_threshold <= 0) throw config_error("SystemSpec: vpt threshold must be positive");
    if (kind == SystemKind::l96 && d < 4)
      throw config_error("SystemSpec: L96 needs d >= 4 for the cyclic index formula");
    if (kind == SystemKind::ks) {
      if (nx < 2 || nx % 2 != 0) throw config_error("SystemSpec: KS needs an even mode count");
      if (domain_length <= 0) throw config_error("SystemSpec: KS domain length must be positive");
    }
  }

  static SystemSpec lorenz63() {
    SystemSpec s;
    s.kind = SystemKind::l63;
    s.dt = 0.01;
    s.lyapunov = 0.91;
    s.vpt_threshold = 0.3;
    return s;
  }

  static SystemSpec lorenz96() {
    SystemSpec s;
    s.kind = SystemKind::l96;
    s.d = 40;
    s.forcing = 10.0;
    s.dt = 0.01;
    s.lyapunov = 1.68;
    s.vpt_threshold = 0.5;
    return s;
  }

  static SystemSpec kuramoto_sivashinsky() {
    SystemSpec s;
    s.kind = SystemKind::ks;
    s.domain_length = 22.0;
    s.nx = 64;
    s.dt = 0.25;
    s.lyapunov = 0.05;
    s.vpt_threshold = 0.5;
    return s;
  }
};

inline nlohmann::json to_json(const SystemSpec& s) {
  nlohmann::json j;
  j["kind"] = to_string(s.kind);
  j["dt"] = s.dt;
  j["lyapunov"] = s.lyapunov;
  j["vpt_threshold"] = s.vpt_threshold;
  switch (s.kind) {
    case SystemKind::l63:
      j["sigma"] = s.sigma;
      j["rho"] = s.rho;
      j["beta"] = s.beta;
      break;
    case SystemKind::l96:
      j["d"] = s.d;
      j["forcing"] = s.forcing;
      break;
    case SystemKind::ks:
      j["domain_length"] = s.domain_length;
      j["nx"] = s.nx;
      break;
  }
  return j;
}

inline SystemSpec system_from_json(const nlohmann::json& j) {
  SystemSpec s;
  s.kind = system_kind_from_string(j.at("kind").get<std::string>());
  switch (s.kind) {
    case SystemKind::l63: s = SystemSpec::lorenz63(); break;
    case SystemKind::l96: s = SystemSpec::lorenz96(); break;
    case SystemKind::ks: s = SystemSpec::kuramoto_sivashinsky(); break;
  }
  s.dt = j.value("dt", s.dt);
  s.lyapunov = j.value("lyapunov", s.lyapunov);
  s.vpt_threshold = j.value("vpt_threshold", s.vpt_threshold);
  s.sigma = j.value("sigma", s.sigma);
  s.rho = j.value("rho", s.rho);
  s.beta = j.value("beta", s.beta);
  s.d = j.value("d", s.d);
  s.forcing = j.value("forcing", s.forcing);
  s.domain_length = j.value("domain_length", s.domain_length);
  s.nx = j.value("nx", s.nx);
  s.validate();
  return s;
}

inline void lorenz63_rhs(std::span<const double> u, std::span<double> du, double sigma,
                         double rho, double beta) {
  du[0] = sigma * (u[1] - u[0]);
  du[1] = u[0] * (rho - u[2]) - u[1];
  du[2] = u[0] * u[1] - beta * u[2];
}

// dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F with cyclic indices.
inline void lorenz96_rhs(std::span<const double> u, std::span<double> du, double forcing) {
  const int n = int(u.size());
  for (int i = 0; i < n; ++i) {
    const int ip1 = i + 1 == n ? 0 : i + 1;
    const int im1 = i == 0 ? n - 1 : i - 1;
    const int im2 = i <= 1 ? i + n - 2 : i - 2;
    du[i] = (u[ip1] - u[im2]) * u[im1] - u[i] + forcing;
  }
}

// Runtime-polymorphic vector field: the analytic systems and the learned
// model share this surface so solvers and evaluation treat them alike.
struct VectorField {
  virtual ~VectorField() = default;
  virtual int dim() const = 0;
  virtual void eval(std::span<const double> u, std::span<double> du) const = 0;
};

struct Lorenz63Field final : VectorField {
  double sigma, rho, beta;
  Lorenz63Field(double s, double r, double b) : sigma(s), rho(r), beta(b) {}
  explicit Lorenz63Field(const SystemSpec& s) : Lorenz63Field(s.sigma, s.rho, s.beta) {}
  int dim() const override { return 3; }
  void eval(std::span<const double> u, std::span<double> du) const override {
    lorenz63_rhs(u, du, sigma, rho, beta);
  }
};

struct Lorenz96Field final : VectorField {
  int d;
  double forcing;
  Lorenz96Field(int d_, double f) : d(d_), forcing(f) {}
  explicit Lorenz96Field(const SystemSpec& s) : Lorenz96Field(s.d, s.forcing) {}
  int dim() const override { return d; }
  void eval(std::span<const double> u, std::span<double> du) const override {
    lorenz96_rhs(u, du, forcing);
  }
};

}  // namespace wpnode
