#pragma once

#include <span>
#include <string>
#include <string_view>

#include "cgmmd/matrix.hpp"

namespace cgmmd {

enum class KernelFamily { gaussian, laplace };

std::string_view to_string(KernelFamily family) noexcept;
KernelFamily kernel_family_from_string(std::string_view name);

/// gaussian: exp(-||a-b||_2^2 / (2 h^2))
/// laplace:  exp(-||a-b||_1 / h)
/// Both are bounded by 1 with K(a, a) = 1.
struct KernelConfig {
  KernelFamily family = KernelFamily::gaussian;
  double bandwidth = 1.0;

  void validate() const;

  friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

/// One W_i = (y_i, z_i) pair of the estimator: an observed response and a
/// generated one.
struct PairedSample {
  std::span<const double> y;
  std::span<const double> z;
};

double eval_kernel(const KernelConfig& cfg, std::span<const double> a, std::span<const double> b);

/// Unchecked evaluation for inner loops; callers validate cfg and lengths once.
inline double kernel_value_unchecked(const KernelConfig& cfg, const double* a, const double* b,
                                     std::size_t dim) noexcept;

/// Median of all pairwise Euclidean distances between rows; 1.0 if that median is 0.
double median_heuristic_bandwidth(const Matrix& points);

/// H(w_i, w_j) = K(y_i, y_j) - K(y_i, z_j) - K(z_i, y_j) + K(z_i, z_j).
double h_statistic(const KernelConfig& cfg, const PairedSample& wi, const PairedSample& wj);

Matrix gram_matrix(const KernelConfig& cfg, const Matrix& a, const Matrix& b);

}  // namespace cgmmd

#include "cgmmd/detail/kernels_inl.hpp"
