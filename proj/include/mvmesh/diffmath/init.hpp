#pragma once

#include "mvmesh/diffmath/tape.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace mvmesh {

using Rng = std::mt19937_64;

/// Zero-mean normal init with the given standard deviation.
template <typename T>
Tensor<T> normal_tensor(const Shape& shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor<T> t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng) * stddev);
  return t;
}

/// He-normal init for a weight whose fan-in is the product of all but the
/// output axis (`out_axis`).
template <typename T>
Tensor<T> he_normal(const Shape& shape, Index out_axis, Rng& rng, double gain = 1.0) {
  const Index fan_in = shape_size(shape) / shape.at(static_cast<std::size_t>(out_axis));
  return normal_tensor<T>(shape, gain * std::sqrt(2.0 / static_cast<double>(std::max<Index>(fan_in, 1))), rng);
}

/// Derives an independent stream from a base seed and a label so that adding
/// a module does not shift the random draws of any other module.
inline Rng derived_rng(std::uint64_t seed, const std::string& label) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return Rng(h);
}

}  // namespace mvmesh
