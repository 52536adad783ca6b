#pragma once

#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "wpnode/errors.hpp"
#include "wpnode/mat.hpp"
#include "wpnode/test_functions.hpp"

namespace wpnode {

// Precomputed weak-form weight vectors for one subdomain layout and test
// function: w_rhs,i = (L/2) int l_i(s) phi(s) ds against the piecewise
// linear hat basis l_i, and w_lhs,i = int l_i(s) phi'(s) ds. Independent of
// the data, so they are built once and reused across every subdomain.
struct SubdomainWeights {
  std::vector<double> w_lhs;
  std::vector<double> w_rhs;
  int p = 0;
  int m = 0;
  double length = 0.0;  // physical subdomain length L
};

namespace detail {

// Antiderivative pair of one integrand g: F = int g, G = int s g.
struct Primitives {
  PolyCoeffsDD f, g;
  double eval_f(double s) const { return f.eval(s); }
  double eval_g(double s) const { return g.eval(s); }
};

// int_a^b (s - a)/(b - a) g(s) ds via the primitives.
inline double hat_rising(const Primitives& pr, double a, double b) {
  const double df = pr.eval_f(b) - pr.eval_f(a);
  const double dg = pr.eval_g(b) - pr.eval_g(a);
  return (dg - a * df) / (b - a);
}

// int_a^b (b - s)/(b - a) g(s) ds via the primitives.
inline double hat_falling(const Primitives& pr, double a, double b) {
  const double df = pr.eval_f(b) - pr.eval_f(a);
  const double dg = pr.eval_g(b) - pr.eval_g(a);
  return (b * df - dg) / (b - a);
}

}  // namespace detail

inline SubdomainWeights weak_weights(std::span<const double> nodes, int p, double length) {
  const int m = int(nodes.size());
  if (m < 2) throw config_error("weak_weights: need at least 2 nodes");
  if (nodes.front() != -1.0 || nodes.back() != 1.0)
    throw config_error("weak_weights: nodes must span [-1, 1]");
  for (int i = 1; i < m; ++i)
    if (!(nodes[i] > nodes[i - 1]))
      throw config_error("weak_weights: nodes must be strictly increasing");
  if (length <= 0) throw config_error("weak_weights: subdomain length must be positive");

  detail::Primitives phi{antiderivative_coeffs_dd(p, 0, Antiderivative::plain),
                         antiderivative_coeffs_dd(p, 0, Antiderivative::first_moment)};
  detail::Primitives dphi{antiderivative_coeffs_dd(p, 1, Antiderivative::plain),
                          antiderivative_coeffs_dd(p, 1, Antiderivative::first_moment)};

  SubdomainWeights w;
  w.p = p;
  w.m = m;
  w.length = length;
  w.w_lhs.assign(m, 0.0);
  w.w_rhs.assign(m, 0.0);
  const double half_len = 0.5 * length;
  for (int i = 0; i < m; ++i) {
    double rhs = 0.0, lhs = 0.0;
    if (i > 0) {
      rhs += detail::hat_rising(phi, nodes[i - 1], nodes[i]);
      lhs += detail::hat_rising(dphi, nodes[i - 1], nodes[i]);
    }
    if (i + 1 < m) {
      rhs += detail::hat_falling(phi, nodes[i], nodes[i + 1]);
      lhs += detail::hat_falling(dphi, nodes[i], nodes[i + 1]);
    }
    w.w_rhs[i] = half_len * rhs;
    w.w_lhs[i] = lhs;
  }
  return w;
}

// Per-dimension weak residual r_j = sum_i u[i][j] w_lhs[i] + sum_i f[i][j] w_rhs[i].
inline std::vector<double> weak_residual(const Mat& u_nodes, const Mat& f_nodes,
                                         const SubdomainWeights& w) {
  if (u_nodes.rows() != w.m || f_nodes.rows() != w.m || u_nodes.cols() != f_nodes.cols())
    throw config_error("weak_residual: node matrices must be M x D with matching D");
  std::vector<double> r(u_nodes.cols(), 0.0);
  for (int i = 0; i < w.m; ++i) {
    const double* ur = u_nodes.row(i);
    const double* fr = f_nodes.row(i);
    for (int j = 0; j < u_nodes.cols(); ++j)
      r[j] += ur[j] * w.w_lhs[i] + fr[j] * w.w_rhs[i];
  }
  return r;
}

inline void export_weights_csv(const std::string& path, const SubdomainWeights& w) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "i,w_lhs,w_rhs\n";
  out.precision(17);
  for (int i = 0; i < w.m; ++i) out << i << "," << w.w_lhs[i] << "," << w.w_rhs[i] << "\n";
}

}  // namespace wpnode
