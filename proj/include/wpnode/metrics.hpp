#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "wpnode/errors.hpp"
#include "wpnode/mat.hpp"

namespace wpnode {

// E_n = sqrt( sum_j (pred_j - truth_j)^2 / sum_j sigma_j^2 ), sigma_j the
// per-dimension standard deviations of the true trajectory.
inline double normalized_error(std::span<const double> pred, std::span<const double> truth,
                               std::span<const double> sigma) {
  if (pred.size() != truth.size() || pred.size() != sigma.size())
    throw config_error("normalized_error: dimension mismatch");
  double num = 0.0, denom = 0.0;
  for (size_t j = 0; j < pred.size(); ++j) {
    const double dd = pred[j] - truth[j];
    num += dd * dd;
    denom += sigma[j] * sigma[j];
  }
  if (denom <= 0.0) throw config_error("normalized_error: zero sigma norm");
  return std::sqrt(num / denom);
}

// Valid prediction time in Lyapunov times: Lambda * n* * dt with n* the
// largest index whose whole error prefix stays at or below eps.
inline double vpt_from_errors(std::span<const double> errors, double eps, double dt,
                              double lyapunov) {
  if (eps <= 0) throw config_error("vpt: threshold must be positive");
  long n_star = -1;
  for (size_t n = 0; n < errors.size(); ++n) {
    if (errors[n] > eps) break;
    n_star = long(n);
  }
  if (n_star < 0) return 0.0;
  return lyapunov * double(n_star) * dt;
}

inline double vpt(const Mat& pred, const Mat& truth, std::span<const double> sigma, double eps,
                  double dt, double lyapunov) {
  if (pred.cols() != truth.cols()) throw config_error("vpt: dimension mismatch");
  const int n = std::min(pred.rows(), truth.rows());
  std::vector<double> errors(n);
  for (int i = 0; i < n; ++i)
    errors[i] = normalized_error({pred.row(i), size_t(pred.cols())},
                                 {truth.row(i), size_t(truth.cols())}, sigma);
  return vpt_from_errors(errors, eps, dt, lyapunov);
}

// Normalized histogram over fixed edges; masses sum to one.
struct HistogramPDF {
  std::vector<double> edges;   // bins + 1
  std::vector<double> masses;  // bins

  int bins() const { return int(masses.size()); }
};

inline HistogramPDF histogram_pdf(std::span<const double> samples, int bins, double lo,
                                  double hi) {
  if (bins < 1) throw config_error("histogram_pdf: need at least one bin");
  if (samples.empty()) throw config_error("histogram_pdf: no samples");
  if (!(hi > lo)) {
    // degenerate range (constant samples): widen symmetrically
    lo -= 0.5;
    hi += 0.5;
  }
  HistogramPDF h;
  h.edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * double(b) / double(bins);
  h.masses.assign(bins, 0.0);
  const double scale = double(bins) / (hi - lo);
  for (double v : samples) {
    int b = int((v - lo) * scale);
    b = std::max(0, std::min(bins - 1, b));
    h.masses[b] += 1.0;
  }
  for (double& m : h.masses) m /= double(samples.size());
  return h;
}

// Column-wise histograms over per-dimension ranges.
inline std::vector<HistogramPDF> histogram_per_dim(const Mat& samples, int bins,
                                                   std::span<const std::pair<double, double>> ranges) {
  if (int(ranges.size()) != samples.cols())
    throw config_error("histogram_per_dim: one range per dimension required");
  std::vector<HistogramPDF> out;
  out.reserve(samples.cols());
  std::vector<double> column(samples.rows());
  for (int j = 0; j < samples.cols(); ++j) {
    for (int i = 0; i < samples.rows(); ++i) column[i] = samples(i, j);
    out.push_back(histogram_pdf(column, bins, ranges[j].first, ranges[j].second));
  }
  return out;
}

inline std::vector<std::pair<double, double>> column_ranges(const Mat& a) {
  std::vector<std::pair<double, double>> r(a.cols());
  for (int j = 0; j < a.cols(); ++j) {
    double lo = a(0, j), hi = a(0, j);
    for (int i = 1; i < a.rows(); ++i) {
      lo = std::min(lo, a(i, j));
      hi = std::max(hi, a(i, j));
    }
    r[j] = {lo, hi};
  }
  return r;
}

inline std::vector<std::pair<double, double>> union_ranges(
    std::span<const std::pair<double, double>> a, std::span<const std::pair<double, double>> b) {
  if (a.size() != b.size()) throw config_error("union_ranges: dimension mismatch");
  std::vector<std::pair<double, double>> r(a.size());
  for (size_t j = 0; j < a.size(); ++j)
    r[j] = {std::min(a[j].first, b[j].first), std::max(a[j].second, b[j].second)};
  return r;
}

// KL(p || q) = sum p ln(p/q) with additive 1e-10 smoothing on both inputs
// followed by renormalization; keeps the value finite on empty bins and
// preserves KL(p, p) = 0.
inline double kl_divergence(const HistogramPDF& p, const HistogramPDF& q) {
  if (p.edges.size() != q.edges.size())
    throw config_error("kl_divergence: histograms use different binnings");
  for (size_t b = 0; b < p.edges.size(); ++b)
    if (p.edges[b] != q.edges[b])
      throw config_error("kl_divergence: histograms use different bin edges");
  const double smooth = 1e-10;
  const int bins = p.bins();
  const double norm_p = 1.0 + bins * smooth, norm_q = 1.0 + bins * smooth;
  double kl = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double pb = (p.masses[b] + smooth) / norm_p;
    const double qb = (q.masses[b] + smooth) / norm_q;
    kl += pb * std::log(pb / qb);
  }
  return kl;
}

}  // namespace wpnode
