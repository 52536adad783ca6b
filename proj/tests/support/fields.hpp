#pragma once

#include <functional>
#include <span>

#include "wpnode/systems.hpp"

namespace oracles {

// Ad-hoc vector field from a lambda, for solver tests on known ODEs.
struct LambdaField final : wpnode::VectorField {
  int d;
  std::function<void(std::span<const double>, std::span<double>)> fn;

  LambdaField(int dim, std::function<void(std::span<const double>, std::span<double>)> f)
      : d(dim), fn(std::move(f)) {}

  int dim() const override { return d; }
  void eval(std::span<const double> u, std::span<double> du) const override { fn(u, du); }
};

}  // namespace oracles
