#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wpnode/mat.hpp"

namespace wpnode {

inline constexpr double kInvSqrt2 = 0.7071067811865475244;
inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// Exact erf-based GELU, not the tanh approximation.
inline double gelu_cdf(double x) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)); }
inline double gelu_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
inline double gelu(double x) { return x * gelu_cdf(x); }
inline double gelu_deriv(double x) { return gelu_cdf(x) + x * gelu_pdf(x); }

enum class OpKind : uint8_t {
  kInput,    // constant, never differentiated
  kParam,    // leaf with gradient
  kLinear,   // X * W^T + b (parents: x, w, b)
  kGelu,     // elementwise
  kLincomb,  // sum_i c_i * P_i, all parents same shape
  kShift,    // X + alpha * C with constant C
  kContract, // R[b, j] = sum_i w[i] * F[idx[b*M + i], j]
  kSumSq,    // 1x1: scale * sum(X^2)
};

struct TapeNode {
  OpKind op;
  Mat val;
  Mat grad;                   // allocated on demand during backward
  std::vector<int> parents;
  std::vector<double> coeffs; // lincomb coefficients; shift alpha at [0]
  Mat cmat;                   // shift constant
  std::vector<int> idx;       // contract row indices, length batch*M
  std::vector<double> w;      // contract weights, length M
  Mat cache;                  // gelu: cdf of the input
  bool needs_grad = false;
};

// Single-use reverse-mode tape over dense matrices. Build a forward
// computation, call backward() once, read gradients off the param leaves.
// A tape is confined to one thread; matrix kernels may parallelize
// internally with a fixed reduction order.
class Tape {
 public:
  int input(Mat v) {
    TapeNode n;
    n.op = OpKind::kInput;
    n.val = std::move(v);
    return push(std::move(n));
  }

  int param(Mat v) {
    TapeNode n;
    n.op = OpKind::kParam;
    n.val = std::move(v);
    n.needs_grad = true;
    return push(std::move(n));
  }

  // Y = X * W^T + b, with W (out x in) and b (1 x out) broadcast over rows.
  int linear(int x, int w, int b) {
    const Mat& xv = val(x);
    const Mat& wv = val(w);
    const Mat& bv = val(b);
    if (xv.cols() != wv.cols())
      throw std::invalid_argument("linear: input dim does not match weight fan-in");
    if (bv.rows() != 1 || bv.cols() != wv.rows())
      throw std::invalid_argument("linear: bias shape does not match weight fan-out");
    TapeNode n;
    n.op = OpKind::kLinear;
    n.parents = {x, w, b};
    matmul_nt(n.val, xv, wv);
    const int rows = n.val.rows(), cols = n.val.cols();
    Mat& out = n.val;
    parallel_for(rows, [&](int lo, int hi) {
      for (int i = lo; i < hi; ++i) {
        double* r = out.row(i);
        const double* bb = bv.row(0);
        for (int j = 0; j < cols; ++j) r[j] += bb[j];
      }
    });
    return push(std::move(n));
  }

  int gelu(int x) {
    const Mat& xv = val(x);
    TapeNode n;
    n.op = OpKind::kGelu;
    n.parents = {x};
    n.val = Mat(xv.rows(), xv.cols());
    n.cache = Mat(xv.rows(), xv.cols());
    parallel_for(xv.rows(), [&](int lo, int hi) {
      for (int i = lo; i < hi; ++i) {
        const double* in = xv.row(i);
        double* out = n.val.row(i);
        double* cdf = n.cache.row(i);
        for (int j = 0; j < xv.cols(); ++j) {
          cdf[j] = gelu_cdf(in[j]);
          out[j] = in[j] * cdf[j];
        }
      }
    });
    return push(std::move(n));
  }

  int lincomb(std::vector<int> parents, std::vector<double> coeffs) {
    if (parents.empty() || parents.size() != coeffs.size())
      throw std::invalid_argument("lincomb: parent/coefficient count mismatch");
    const Mat& first = val(parents[0]);
    TapeNode n;
    n.op = OpKind::kLincomb;
    n.val = Mat(first.rows(), first.cols());
    for (size_t p = 0; p < parents.size(); ++p) {
      const Mat& pv = val(parents[p]);
      if (!pv.same_shape(first)) throw std::invalid_argument("lincomb: shape mismatch");
      const double c = coeffs[p];
      for (size_t k = 0; k < n.val.size(); ++k) n.val.data()[k] += c * pv.data()[k];
    }
    n.parents = std::move(parents);
    n.coeffs = std::move(coeffs);
    return push(std::move(n));
  }

  int add(int a, int b) { return lincomb({a, b}, {1.0, 1.0}); }
  int sub(int a, int b) { return lincomb({a, b}, {1.0, -1.0}); }

  int shift(int x, double alpha, Mat c) {
    const Mat& xv = val(x);
    if (!xv.same_shape(c)) throw std::invalid_argument("shift: shape mismatch");
    TapeNode n;
    n.op = OpKind::kShift;
    n.parents = {x};
    n.coeffs = {alpha};
    n.val = Mat(xv.rows(), xv.cols());
    for (size_t k = 0; k < n.val.size(); ++k) n.val.data()[k] = xv.data()[k] + alpha * c.data()[k];
    n.cmat = std::move(c);
    return push(std::move(n));
  }

  // R[b, j] = sum_i w[i] * F[idx[b*M + i], j] for b in [0, batch)
  int contract(int f, std::vector<int> idx, std::vector<double> w) {
    const Mat& fv = val(f);
    const int m = int(w.size());
    if (m == 0 || idx.size() % m != 0)
      throw std::invalid_argument("contract: index count not a multiple of weight count");
    const int batch = int(idx.size()) / m;
    for (int r : idx)
      if (r < 0 || r >= fv.rows()) throw std::invalid_argument("contract: row index out of range");
    TapeNode n;
    n.op = OpKind::kContract;
    n.parents = {f};
    n.val = Mat(batch, fv.cols());
    const int d = fv.cols();
    parallel_for(batch, [&](int lo, int hi) {
      for (int b = lo; b < hi; ++b) {
        double* out = n.val.row(b);
        for (int i = 0; i < m; ++i) {
          const double wi = w[i];
          const double* src = fv.row(idx[size_t(b) * m + i]);
          for (int j = 0; j < d; ++j) out[j] += wi * src[j];
        }
      }
    });
    n.idx = std::move(idx);
    n.w = std::move(w);
    return push(std::move(n));
  }

  int sum_sq(int x, double scale) {
    TapeNode n;
    n.op = OpKind::kSumSq;
    n.parents = {x};
    n.coeffs = {scale};
    n.val = Mat(1, 1);
    n.val(0, 0) = scale * frobenius_sq(val(x));
    return push(std::move(n));
  }

  const Mat& val(int id) const { return nodes_.at(id).val; }
  double value(int id) const {
    const Mat& v = val(id);
    if (v.size() != 1) throw std::logic_error("value: node is not a scalar");
    return v(0, 0);
  }

  const Mat& grad(int id) const {
    const TapeNode& n = nodes_.at(id);
    if (n.grad.empty()) throw std::logic_error("grad: no gradient; run backward first");
    return n.grad;
  }

  // Zero matrix when the node never received gradient (loss independent of it).
  Mat grad_or_zero(int id) const {
    const TapeNode& n = nodes_.at(id);
    if (n.grad.empty()) return Mat(n.val.rows(), n.val.cols());
    return n.grad;
  }

  // Reverse sweep from a scalar loss node, seeding d(loss)/d(loss) = 1.
  void backward(int loss) {
    if (nodes_.empty()) throw std::logic_error("backward: empty tape");
    TapeNode& top = nodes_.at(loss);
    if (top.val.size() != 1) throw std::logic_error("backward: loss node is not a scalar");
    top.grad = Mat(1, 1);
    top.grad(0, 0) = 1.0;
    for (int id = loss; id >= 0; --id) {
      TapeNode& n = nodes_[id];
      if (n.grad.empty() || !n.needs_grad) continue;
      propagate(n);
    }
  }

  void clear() { nodes_.clear(); }
  bool empty() const { return nodes_.empty(); }
  size_t size() const { return nodes_.size(); }

 private:
  int push(TapeNode n) {
    for (int p : n.parents)
      if (nodes_.at(p).needs_grad) n.needs_grad = true;
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
  }

  Mat& grad_buf(int id) {
    TapeNode& p = nodes_[id];
    if (p.grad.empty()) p.grad = Mat(p.val.rows(), p.val.cols());
    return p.grad;
  }

  bool wants(int id) const { return nodes_[id].needs_grad; }

  void propagate(TapeNode& n) {
    switch (n.op) {
      case OpKind::kInput:
      case OpKind::kParam:
        return;
      case OpKind::kLinear: {
        const int x = n.parents[0], w = n.parents[1], b = n.parents[2];
        if (wants(x)) matmul_nn_acc(grad_buf(x), n.grad, nodes_[w].val);
        if (wants(w)) matmul_tn_acc(grad_buf(w), n.grad, nodes_[x].val);
        if (wants(b)) {
          Mat& db = grad_buf(b);
          for (int i = 0; i < n.grad.rows(); ++i) {
            const double* g = n.grad.row(i);
            for (int j = 0; j < n.grad.cols(); ++j) db(0, j) += g[j];
          }
        }
        return;
      }
      case OpKind::kGelu: {
        const int x = n.parents[0];
        if (!wants(x)) return;
        const Mat& xv = nodes_[x].val;
        Mat& dx = grad_buf(x);
        const Mat& dy = n.grad;
        const Mat& cdf = n.cache;
        parallel_for(xv.rows(), [&](int lo, int hi) {
          for (int i = lo; i < hi; ++i) {
            const double* in = xv.row(i);
            const double* g = dy.row(i);
            const double* c = cdf.row(i);
            double* out = dx.row(i);
            for (int j = 0; j < xv.cols(); ++j)
              out[j] += g[j] * (c[j] + in[j] * gelu_pdf(in[j]));
          }
        });
        return;
      }
      case OpKind::kLincomb: {
        for (size_t p = 0; p < n.parents.size(); ++p) {
          if (!wants(n.parents[p])) continue;
          Mat& dp = grad_buf(n.parents[p]);
          const double c = n.coeffs[p];
          for (size_t k = 0; k < dp.size(); ++k) dp.data()[k] += c * n.grad.data()[k];
        }
        return;
      }
      case OpKind::kShift: {
        if (!wants(n.parents[0])) return;
        Mat& dx = grad_buf(n.parents[0]);
        for (size_t k = 0; k < dx.size(); ++k) dx.data()[k] += n.grad.data()[k];
        return;
      }
      case OpKind::kContract: {
        if (!wants(n.parents[0])) return;
        Mat& df = grad_buf(n.parents[0]);
        const int m = int(n.w.size());
        const int batch = n.val.rows(), d = n.val.cols();
        // Scatter-add stays serial: overlapping subdomains hit the same rows.
        for (int b = 0; b < batch; ++b) {
          const double* g = n.grad.row(b);
          for (int i = 0; i < m; ++i) {
            const double wi = n.w[i];
            double* dst = df.row(n.idx[size_t(b) * m + i]);
            for (int j = 0; j < d; ++j) dst[j] += wi * g[j];
          }
        }
        return;
      }
      case OpKind::kSumSq: {
        if (!wants(n.parents[0])) return;
        const Mat& xv = nodes_[n.parents[0]].val;
        Mat& dx = grad_buf(n.parents[0]);
        const double s = 2.0 * n.coeffs[0] * n.grad(0, 0);
        for (size_t k = 0; k < dx.size(); ++k) dx.data()[k] += s * xv.data()[k];
        return;
      }
    }
  }

  std::vector<TapeNode> nodes_;
};

}  // namespace wpnode
