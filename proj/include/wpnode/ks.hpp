#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "wpnode/errors.hpp"
#include "wpnode/fft.hpp"
#include "wpnode/systems.hpp"

namespace wpnode {

// Kuramoto-Sivashinsky u_t = -u u_x - u_xx - u_xxxx on a periodic domain,
// advanced by ETDRK4 in Fourier space (Kassam-Trefethen coefficients via a
// contour average, which handles the k = 0 removable singularity). The
// nonlinear term uses the 2/3 dealiasing rule.
class KsStepper {
 public:
  KsStepper(int nx, double dt, double domain_length)
      : nx_(nx), dt_(dt), ell_(domain_length) {
    if (nx < 2 || nx % 2 != 0) throw config_error("KsStepper: mode count must be even");
    if (dt <= 0 || domain_length <= 0) throw config_error("KsStepper: dt and length must be positive");
    wavenum_.resize(nx);
    dealias_.resize(nx);
    for (int i = 0; i < nx; ++i) {
      const int m = i < nx / 2 ? i : i - nx;
      wavenum_[i] = 2.0 * M_PI * double(m) / ell_;
      dealias_[i] = std::abs(m) < nx / 3 ? 1.0 : 0.0;
    }
    e_.resize(nx);
    e2_.resize(nx);
    q_.resize(nx);
    f1_.resize(nx);
    f2_.resize(nx);
    f3_.resize(nx);
    const int npts = 32;
    for (int i = 0; i < nx; ++i) {
      const double k = wavenum_[i];
      const double lin = k * k - k * k * k * k;
      e_[i] = std::exp(dt * lin);
      e2_[i] = std::exp(0.5 * dt * lin);
      cdouble q(0), f1(0), f2(0), f3(0);
      for (int j = 0; j < npts; ++j) {
        const double ang = M_PI * (double(j) + 0.5) / double(npts);
        const cdouble lr = dt * lin + cdouble(std::cos(ang), std::sin(ang));
        const cdouble elr = std::exp(lr);
        const cdouble lr2 = lr * lr, lr3 = lr2 * lr;
        q += (std::exp(0.5 * lr) - 1.0) / lr;
        f1 += (-4.0 - lr + elr * (4.0 - 3.0 * lr + lr2)) / lr3;
        f2 += (2.0 + lr + elr * (-2.0 + lr)) / lr3;
        f3 += (-4.0 - 3.0 * lr - lr2 + elr * (4.0 - lr)) / lr3;
      }
      const double inv = dt / double(npts);
      q_[i] = q.real() * inv;
      f1_[i] = f1.real() * inv;
      f2_[i] = f2.real() * inv;
      f3_[i] = f3.real() * inv;
    }
  }

  int nx() const { return nx_; }
  double dt() const { return dt_; }

  void step(std::span<const double> in, std::span<double> out) const {
    std::vector<cdouble> v(nx_);
    for (int i = 0; i < nx_; ++i) v[i] = cdouble(in[i], 0.0);
    fft(v);
    std::vector<cdouble> nv = nonlinear(v), a(nx_), b(nx_), c(nx_);
    for (int i = 0; i < nx_; ++i) a[i] = e2_[i] * v[i] + q_[i] * nv[i];
    std::vector<cdouble> na = nonlinear(a);
    for (int i = 0; i < nx_; ++i) b[i] = e2_[i] * v[i] + q_[i] * na[i];
    std::vector<cdouble> nb = nonlinear(b);
    for (int i = 0; i < nx_; ++i) c[i] = e2_[i] * a[i] + q_[i] * (2.0 * nb[i] - nv[i]);
    std::vector<cdouble> nc = nonlinear(c);
    for (int i = 0; i < nx_; ++i)
      v[i] = e_[i] * v[i] + f1_[i] * nv[i] + 2.0 * f2_[i] * (na[i] + nb[i]) + f3_[i] * nc[i];
    ifft(v);
    for (int i = 0; i < nx_; ++i) {
      out[i] = v[i].real();
      if (!std::isfinite(out[i])) throw numerical_error("KS integration blew up");
    }
  }

  // -u u_x in Fourier space: -0.5 i k F[(F^-1 v)^2], dealiased.
  std::vector<cdouble> nonlinear(const std::vector<cdouble>& v) const {
    std::vector<cdouble> u = v;
    ifft(u);
    for (int i = 0; i < nx_; ++i) {
      const double re = u[i].real();
      u[i] = cdouble(re * re, 0.0);
    }
    fft(u);
    for (int i = 0; i < nx_; ++i)
      u[i] *= cdouble(0.0, -0.5 * wavenum_[i]) * dealias_[i];
    return u;
  }

  std::span<const double> wavenumbers() const { return wavenum_; }

 private:
  int nx_;
  double dt_, ell_;
  std::vector<double> wavenum_, dealias_;
  std::vector<double> e_, e2_, q_, f1_, f2_, f3_;
};

// One ETDRK4 step, physical space in and out.
inline std::vector<double> ks_step(std::span<const double> field, double dt,
                                   double domain_length) {
  KsStepper stepper(int(field.size()), dt, domain_length);
  std::vector<double> out(field.size());
  stepper.step(field, out);
  return out;
}

// Spectral evaluation of the KS right-hand side, used by the oracle field.
struct KsSpectralField final : VectorField {
  int nx;
  double ell;
  std::vector<double> wavenum, dealias;

  KsSpectralField(int nx_, double domain_length) : nx(nx_), ell(domain_length) {
    wavenum.resize(nx);
    dealias.resize(nx);
    for (int i = 0; i < nx; ++i) {
      const int m = i < nx / 2 ? i : i - nx;
      wavenum[i] = 2.0 * M_PI * double(m) / ell;
      dealias[i] = std::abs(m) < nx / 3 ? 1.0 : 0.0;
    }
  }
  explicit KsSpectralField(const SystemSpec& s) : KsSpectralField(s.nx, s.domain_length) {}

  int dim() const override { return nx; }

  void eval(std::span<const double> u, std::span<double> du) const override {
    std::vector<cdouble> v(nx), sq(nx);
    for (int i = 0; i < nx; ++i) {
      v[i] = cdouble(u[i], 0.0);
      sq[i] = cdouble(u[i] * u[i], 0.0);
    }
    fft(v);
    fft(sq);
    for (int i = 0; i < nx; ++i) {
      const double k = wavenum[i];
      v[i] = (k * k - k * k * k * k) * v[i] +
             cdouble(0.0, -0.5 * k) * dealias[i] * sq[i];
    }
    ifft(v);
    for (int i = 0; i < nx; ++i) du[i] = v[i].real();
  }
};

}  // namespace wpnode
