#pragma once

#include <cmath>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wpnode/mat.hpp"
#include "wpnode/random.hpp"
#include "wpnode/tape.hpp"

namespace wpnode {

// One fully-connected layer: w is (out x in), b is a 1 x out row vector.
struct Layer {
  Mat w;
  Mat b;
};

// Shallow feed-forward network with GELU between layers and identity output.
// A single-layer net is purely affine.
struct ParamSet {
  std::vector<Layer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().w.cols(); }
  int output_dim() const { return layers.empty() ? 0 : layers.back().w.rows(); }

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("ParamSet: no layers");
    for (size_t l = 0; l < layers.size(); ++l) {
      const Layer& L = layers[l];
      if (L.b.rows() != 1 || L.b.cols() != L.w.rows())
        throw std::invalid_argument("ParamSet: bias shape mismatch at layer " + std::to_string(l));
      if (l + 1 < layers.size() && layers[l + 1].w.cols() != L.w.rows())
        throw std::invalid_argument("ParamSet: layer dims do not chain at layer " + std::to_string(l));
      if (!L.w.all_finite() || !L.b.all_finite())
        throw std::invalid_argument("ParamSet: non-finite entries at layer " + std::to_string(l));
    }
  }
};

// Gradient carrier, shape-congruent with its ParamSet.
struct GradSet {
  std::vector<Layer> layers;

  bool all_finite() const {
    for (const Layer& L : layers)
      if (!L.w.all_finite() || !L.b.all_finite()) return false;
    return true;
  }
};

// dims = {input, hidden..., output}. Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
inline ParamSet mlp_init(const std::vector<int>& dims, uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("mlp_init: need at least input and output dims");
  Rng rng(derive_seed(seed, 0x1717u));
  ParamSet p;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = 1.0 / std::sqrt(double(fan_in));
    Layer L{Mat(fan_out, fan_in), Mat(1, fan_out)};
    for (double& v : L.w.raw()) v = rng.uniform(-bound, bound);
    for (double& v : L.b.raw()) v = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(L));
  }
  return p;
}

// Plain batched forward pass (no tape): Y = net(X), X rows are states.
inline void mlp_apply_batch(const ParamSet& p, const Mat& x, Mat& y) {
  if (x.cols() != p.input_dim())
    throw std::invalid_argument("mlp_apply: input dim " + std::to_string(x.cols()) +
                                " does not match network fan-in " + std::to_string(p.input_dim()));
  Mat cur = x;
  Mat next;
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const Layer& L = p.layers[l];
    matmul_nt(next, cur, L.w);
    const int rows = next.rows(), cols = next.cols();
    const bool hidden = l + 1 < p.layers.size();
    parallel_for(rows, [&](int lo, int hi) {
      for (int i = lo; i < hi; ++i) {
        double* r = next.row(i);
        const double* b = L.b.row(0);
        if (hidden)
          for (int j = 0; j < cols; ++j) r[j] = gelu(r[j] + b[j]);
        else
          for (int j = 0; j < cols; ++j) r[j] += b[j];
      }
    });
    std::swap(cur, next);
  }
  y = std::move(cur);
}

inline std::vector<double> mlp_apply(const ParamSet& p, std::span<const double> u) {
  Mat x(1, int(u.size()));
  for (size_t j = 0; j < u.size(); ++j) x(0, int(j)) = u[j];
  Mat y;
  mlp_apply_batch(p, x, y);
  return y.raw();
}

// Tape handles for one network's parameters.
struct MlpTapeIds {
  std::vector<std::pair<int, int>> layers;  // (weight node, bias node)
};

inline MlpTapeIds mlp_params_on_tape(Tape& tape, const ParamSet& p) {
  MlpTapeIds ids;
  for (const Layer& L : p.layers) ids.layers.push_back({tape.param(L.w), tape.param(L.b)});
  return ids;
}

inline int mlp_forward(Tape& tape, const MlpTapeIds& ids, int x) {
  int cur = x;
  for (size_t l = 0; l < ids.layers.size(); ++l) {
    cur = tape.linear(cur, ids.layers[l].first, ids.layers[l].second);
    if (l + 1 < ids.layers.size()) cur = tape.gelu(cur);
  }
  return cur;
}

// Reverse-mode gradients of a recorded scalar w.r.t. the registered network.
inline GradSet grad(const Tape& tape, const MlpTapeIds& ids) {
  if (tape.empty()) throw std::logic_error("grad: empty tape");
  GradSet g;
  for (const auto& [wid, bid] : ids.layers)
    g.layers.push_back({tape.grad_or_zero(wid), tape.grad_or_zero(bid)});
  return g;
}

// ---- checkpoint format ------------------------------------------------------
// {"layers": [{"w": [[...]], "b": [...]}], "activation": "gelu", "meta": {...}}

inline nlohmann::json params_to_json(const ParamSet& p, nlohmann::json meta = {}) {
  nlohmann::json j;
  j["layers"] = nlohmann::json::array();
  for (const Layer& L : p.layers) {
    nlohmann::json jl;
    auto rows = nlohmann::json::array();
    for (int i = 0; i < L.w.rows(); ++i) {
      auto row = nlohmann::json::array();
      for (int jj = 0; jj < L.w.cols(); ++jj) row.push_back(L.w(i, jj));
      rows.push_back(std::move(row));
    }
    jl["w"] = std::move(rows);
    auto bias = nlohmann::json::array();
    for (int jj = 0; jj < L.b.cols(); ++jj) bias.push_back(L.b(0, jj));
    jl["b"] = std::move(bias);
    j["layers"].push_back(std::move(jl));
  }
  j["activation"] = "gelu";
  j["meta"] = std::move(meta);
  return j;
}

inline ParamSet params_from_json(const nlohmann::json& j, nlohmann::json* meta = nullptr) {
  if (!j.contains("layers")) throw std::invalid_argument("checkpoint: missing layers");
  if (j.value("activation", "gelu") != std::string("gelu"))
    throw std::invalid_argument("checkpoint: unsupported activation");
  ParamSet p;
  for (const auto& jl : j.at("layers")) {
    const auto& rows = jl.at("w");
    const int out = int(rows.size());
    const int in = out > 0 ? int(rows.at(0).size()) : 0;
    Layer L{Mat(out, in), Mat(1, int(jl.at("b").size()))};
    for (int i = 0; i < out; ++i)
      for (int jj = 0; jj < in; ++jj) L.w(i, jj) = rows.at(i).at(jj).get<double>();
    for (int jj = 0; jj < L.b.cols(); ++jj) L.b(0, jj) = jl.at("b").at(jj).get<double>();
    p.layers.push_back(std::move(L));
  }
  p.validate();
  if (meta) *meta = j.value("meta", nlohmann::json::object());
  return p;
}

inline void save_checkpoint(const std::string& path, const ParamSet& p,
                            nlohmann::json meta = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out << params_to_json(p, std::move(meta)).dump(1) << "\n";
}

inline ParamSet load_checkpoint(const std::string& path, nlohmann::json* meta = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  return params_from_json(j, meta);
}

}  // namespace wpnode
