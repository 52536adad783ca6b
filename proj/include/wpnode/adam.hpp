#pragma once

#include <cmath>
#include <stdexcept>

#include "wpnode/errors.hpp"
#include "wpnode/mlp.hpp"

namespace wpnode {

struct training_error : numerical_error {
  using numerical_error::numerical_error;
};

// Adam with bias correction. Moment accumulators are shape-congruent with
// the parameters they drive.
struct OptimizerState {
  GradSet m;  // first moments
  GradSet v;  // second moments
  long step = 0;
  double lr = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline OptimizerState adam_init(const ParamSet& p, double lr) {
  OptimizerState s;
  s.lr = lr;
  for (const Layer& L : p.layers) {
    s.m.layers.push_back({Mat(L.w.rows(), L.w.cols()), Mat(1, L.b.cols())});
    s.v.layers.push_back({Mat(L.w.rows(), L.w.cols()), Mat(1, L.b.cols())});
  }
  return s;
}

namespace detail {
inline void adam_update(Mat& x, const Mat& g, Mat& m, Mat& v, double lr, double b1, double b2,
                        double eps, double mc, double vc) {
  for (size_t k = 0; k < x.size(); ++k) {
    const double gk = g.data()[k];
    double& mk = m.data()[k];
    double& vk = v.data()[k];
    mk = b1 * mk + (1.0 - b1) * gk;
    vk = b2 * vk + (1.0 - b2) * gk * gk;
    x.data()[k] -= lr * (mk / mc) / (std::sqrt(vk / vc) + eps);
  }
}
}  // namespace detail

inline void adam_step(ParamSet& p, const GradSet& g, OptimizerState& s) {
  if (g.layers.size() != p.layers.size() || s.m.layers.size() != p.layers.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  if (!g.all_finite()) throw training_error("adam_step: non-finite gradients");
  s.step += 1;
  const double mc = 1.0 - std::pow(s.beta1, double(s.step));
  const double vc = 1.0 - std::pow(s.beta2, double(s.step));
  for (size_t l = 0; l < p.layers.size(); ++l) {
    detail::adam_update(p.layers[l].w, g.layers[l].w, s.m.layers[l].w, s.v.layers[l].w, s.lr,
                        s.beta1, s.beta2, s.eps, mc, vc);
    detail::adam_update(p.layers[l].b, g.layers[l].b, s.m.layers[l].b, s.v.layers[l].b, s.lr,
                        s.beta1, s.beta2, s.eps, mc, vc);
  }
}

}  // namespace wpnode
