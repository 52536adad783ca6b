#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace wpnode {

// Dense row-major matrix of doubles. The whole toolkit runs in 64-bit
// floating point; a 1x1 Mat doubles as a scalar where the tape needs one.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols) : rows_(rows), cols_(cols), data_(size_t(rows) * cols, 0.0) {}
  Mat(int rows, int cols, double fill)
      : rows_(rows), cols_(cols), data_(size_t(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int i, int j) { return data_[size_t(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[size_t(i) * cols_ + j]; }

  double* row(int i) { return data_.data() + size_t(i) * cols_; }
  const double* row(int i) const { return data_.data() + size_t(i) * cols_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  void zero() { std::fill(data_.begin(), data_.end(), 0.0); }

  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

inline int worker_threads() {
  static const int n = [] {
    if (const char* env = std::getenv("WPNODE_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
  }();
  return n;
}

// Splits [0, n) into contiguous blocks, one worker per block. Each index is
// written by exactly one worker, so results do not depend on the thread count.
inline void parallel_for(int n, const std::function<void(int, int)>& fn) {
  int nt = std::min(worker_threads(), std::max(1, n));
  if (nt <= 1 || n < 256) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nt - 1);
  int chunk = (n + nt - 1) / nt;
  for (int t = 1; t < nt; ++t) {
    int lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo < hi) pool.emplace_back(fn, lo, hi);
  }
  fn(0, std::min(n, chunk));
  for (auto& th : pool) th.join();
}

// C = A * B^T   (A: n x k, B: m x k, C: n x m). Row-major dot products.
inline void matmul_nt(Mat& C, const Mat& A, const Mat& B) {
  if (A.cols() != B.cols()) throw std::invalid_argument("matmul_nt: inner dim mismatch");
  const int n = A.rows(), m = B.rows(), k = A.cols();
  if (C.rows() != n || C.cols() != m) C = Mat(n, m);
  parallel_for(n, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const double* a = A.row(i);
      double* c = C.row(i);
      for (int j = 0; j < m; ++j) {
        const double* b = B.row(j);
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += a[p] * b[p];
        c[j] = s;
      }
    }
  });
}

// C += A * B   (A: n x k, B: k x m, C: n x m).
inline void matmul_nn_acc(Mat& C, const Mat& A, const Mat& B) {
  if (A.cols() != B.rows()) throw std::invalid_argument("matmul_nn_acc: inner dim mismatch");
  const int n = A.rows(), k = A.cols(), m = B.cols();
  parallel_for(n, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const double* a = A.row(i);
      double* c = C.row(i);
      for (int p = 0; p < k; ++p) {
        const double ap = a[p];
        const double* b = B.row(p);
        for (int j = 0; j < m; ++j) c[j] += ap * b[j];
      }
    }
  });
}

// C += A^T * B  (A: n x k, B: n x m, C: k x m). Serial over n keeps the
// accumulation order fixed; parallel over output rows would need per-thread
// buffers for no gain at these sizes.
inline void matmul_tn_acc(Mat& C, const Mat& A, const Mat& B) {
  if (A.rows() != B.rows()) throw std::invalid_argument("matmul_tn_acc: outer dim mismatch");
  const int n = A.rows(), k = A.cols(), m = B.cols();
  for (int i = 0; i < n; ++i) {
    const double* a = A.row(i);
    const double* b = B.row(i);
    for (int p = 0; p < k; ++p) {
      const double ap = a[p];
      double* c = C.row(p);
      for (int j = 0; j < m; ++j) c[j] += ap * b[j];
    }
  }
}

inline double frobenius_sq(const Mat& a) {
  double s = 0.0;
  for (double v : a.raw()) s += v * v;
  return s;
}

}  // namespace wpnode
