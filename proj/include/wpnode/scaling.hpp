#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "wpnode/errors.hpp"
#include "wpnode/mat.hpp"

namespace wpnode {

// Per-dimension affine map onto [0, 1] over the training range. Values
// outside the fitted range extend linearly; the learned field has to
// extrapolate, so there is no clipping anywhere.
class MinMaxScaler {
 public:
  MinMaxScaler() = default;

  static MinMaxScaler fit(const Mat& data) {
    if (data.rows() < 2) throw config_error("MinMaxScaler: need at least 2 rows to fit");
    MinMaxScaler s;
    s.min_.assign(data.cols(), 0.0);
    s.max_.assign(data.cols(), 0.0);
    for (int j = 0; j < data.cols(); ++j) {
      double lo = data(0, j), hi = data(0, j);
      for (int i = 1; i < data.rows(); ++i) {
        lo = std::min(lo, data(i, j));
        hi = std::max(hi, data(i, j));
      }
      if (!(hi > lo))
        throw config_error("MinMaxScaler: degenerate dimension " + std::to_string(j) +
                           " (max == min)");
      s.min_[j] = lo;
      s.max_[j] = hi;
    }
    return s;
  }

  int dim() const { return int(min_.size()); }
  double range(int j) const { return max_[j] - min_[j]; }
  double min(int j) const { return min_[j]; }
  double max(int j) const { return max_[j]; }

  void apply(std::span<const double> x, std::span<double> out) const {
    check(x.size());
    for (size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - min_[j]) / (max_[j] - min_[j]);
  }

  void invert(std::span<const double> x, std::span<double> out) const {
    check(x.size());
    for (size_t j = 0; j < x.size(); ++j) out[j] = x[j] * (max_[j] - min_[j]) + min_[j];
  }

  Mat apply(const Mat& data) const {
    check(size_t(data.cols()));
    Mat out(data.rows(), data.cols());
    for (int i = 0; i < data.rows(); ++i) apply({data.row(i), size_t(data.cols())},
                                                {out.row(i), size_t(data.cols())});
    return out;
  }

  Mat invert(const Mat& data) const {
    check(size_t(data.cols()));
    Mat out(data.rows(), data.cols());
    for (int i = 0; i < data.rows(); ++i) invert({data.row(i), size_t(data.cols())},
                                                 {out.row(i), size_t(data.cols())});
    return out;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"min", min_}, {"max", max_}};
  }

  static MinMaxScaler from_json(const nlohmann::json& j) {
    MinMaxScaler s;
    s.min_ = j.at("min").get<std::vector<double>>();
    s.max_ = j.at("max").get<std::vector<double>>();
    for (size_t k = 0; k < s.min_.size(); ++k)
      if (!(s.max_[k] > s.min_[k])) throw config_error("MinMaxScaler: degenerate range in JSON");
    return s;
  }

 private:
  void check(size_t n) const {
    if (n != min_.size()) throw config_error("MinMaxScaler: dimension mismatch");
    if (min_.empty()) throw config_error("MinMaxScaler: not fitted");
  }

  std::vector<double> min_, max_;
};

}  // namespace wpnode
