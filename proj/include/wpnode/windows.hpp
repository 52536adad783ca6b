#pragma once

#include <cmath>
#include <iostream>
#include <vector>

#include <json.hpp>

#include "wpnode/errors.hpp"
#include "wpnode/mat.hpp"

namespace wpnode {

// Sliding windows over a trajectory: starts 0, stride, 2*stride, ... with
// start + length <= N, i.e. floor((N - length) / stride) + 1 windows.
struct WindowSet {
  int length = 0;  // samples per window
  int stride = 1;
  std::vector<int> starts;

  int count() const { return int(starts.size()); }
};

inline WindowSet sliding_windows(int n_samples, int length, int stride) {
  if (length < 2) throw config_error("sliding_windows: window length must be >= 2");
  if (stride < 1) throw config_error("sliding_windows: stride must be >= 1");
  if (length > n_samples)
    throw config_error("sliding_windows: window length " + std::to_string(length) +
                       " exceeds series length " + std::to_string(n_samples));
  WindowSet w;
  w.length = length;
  w.stride = stride;
  const int count = (n_samples - length) / stride + 1;
  w.starts.reserve(count);
  for (int k = 0; k < count; ++k) w.starts.push_back(k * stride);
  return w;
}

// K overlapping subdomains of M consecutive samples, start indices spread
// evenly over [0, N - M]. Each subdomain maps affinely onto the reference
// interval [-1, 1] with M uniformly spaced nodes.
struct SubdomainLayout {
  int m = 0;  // grid points per subdomain
  std::vector<int> starts;
  double length = 0.0;  // physical subdomain length L = (M - 1) * dt
  std::vector<double> nodes;  // reference nodes in [-1, 1]

  int count() const { return int(starts.size()); }
};

inline SubdomainLayout make_subdomains(int n_samples, int m, int k, double dt) {
  if (m < 2) throw config_error("make_subdomains: subdomain size must be >= 2");
  if (m > n_samples) throw config_error("make_subdomains: subdomain larger than series");
  if (k < 1) throw config_error("make_subdomains: need at least one subdomain");
  const int max_starts = n_samples - m + 1;
  if (k > max_starts) {
    std::cerr << "make_subdomains: K = " << k << " exceeds the " << max_starts
              << " distinct starts available; capping\n";
    k = max_starts;
  }
  SubdomainLayout layout;
  layout.m = m;
  layout.length = double(m - 1) * dt;
  layout.nodes.resize(m);
  for (int i = 0; i < m; ++i) layout.nodes[i] = -1.0 + 2.0 * double(i) / double(m - 1);
  layout.nodes[0] = -1.0;
  layout.nodes[m - 1] = 1.0;
  layout.starts.reserve(k);
  if (k == 1) {
    layout.starts.push_back(0);
  } else {
    const double stride = double(n_samples - m) / double(k - 1);
    for (int i = 0; i < k; ++i) layout.starts.push_back(int(std::llround(i * stride)));
  }
  return layout;
}

// Affine reference map t = (b - a)/2 * s + (a + b)/2 taking [-1, 1] to [a, b].
inline double to_reference(double a, double b, double s) {
  return 0.5 * (b - a) * s + 0.5 * (a + b);
}

inline nlohmann::json to_json(const SubdomainLayout& l) {
  return nlohmann::json{
      {"m", l.m}, {"count", l.count()}, {"length", l.length}, {"starts", l.starts}};
}

}  // namespace wpnode
