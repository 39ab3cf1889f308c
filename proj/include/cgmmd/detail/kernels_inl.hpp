#pragma once

#include <cmath>

namespace cgmmd {

inline double squared_distance(const double* a, const double* b, std::size_t dim) noexcept {
  double sum = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return sum;
}

inline double gaussian_from_squared_distance(double sq, double bandwidth) noexcept {
  return std::exp(-sq / (2.0 * bandwidth * bandwidth));
}

inline double kernel_value_unchecked(const KernelConfig& cfg, const double* a, const double* b,
                                     std::size_t dim) noexcept {
  if (cfg.family == KernelFamily::gaussian) {
    return gaussian_from_squared_distance(squared_distance(a, b, dim), cfg.bandwidth);
  }
  double l1 = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    l1 += std::abs(a[i] - b[i]);
  }
  return std::exp(-l1 / cfg.bandwidth);
}

}  // namespace cgmmd
