#include "cgmmd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cgmmd/parallel.hpp"

namespace cgmmd {

std::string_view to_string(KernelFamily family) noexcept {
  return family == KernelFamily::gaussian ? "gaussian" : "laplace";
}

KernelFamily kernel_family_from_string(std::string_view name) {
  if (name == "gaussian") {
    return KernelFamily::gaussian;
  }
  if (name == "laplace") {
    return KernelFamily::laplace;
  }
  throw std::invalid_argument("unknown kernel family '" + std::string(name) + "'");
}

void KernelConfig::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw std::invalid_argument("kernel bandwidth must be positive and finite");
  }
}

double eval_kernel(const KernelConfig& cfg, std::span<const double> a, std::span<const double> b) {
  cfg.validate();
  if (a.size() != b.size()) {
    throw std::invalid_argument("eval_kernel: dimension mismatch");
  }
  return kernel_value_unchecked(cfg, a.data(), b.data(), a.size());
}

double median_heuristic_bandwidth(const Matrix& points) {
  const std::size_t n = points.rows();
  if (n < 2) {
    throw std::invalid_argument("median_heuristic_bandwidth: need at least 2 points");
  }
  std::vector<double> distances;
  distances.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      distances.push_back(std::sqrt(squared_distance(points.row(i).data(), points.row(j).data(), points.cols())));
    }
  }
  const std::size_t mid = distances.size() / 2;
  std::nth_element(distances.begin(), distances.begin() + mid, distances.end());
  double median = distances[mid];
  if (distances.size() % 2 == 0) {
    const double lower = *std::max_element(distances.begin(), distances.begin() + mid);
    median = 0.5 * (lower + median);
  }
  return median > 0.0 ? median : 1.0;
}

double h_statistic(const KernelConfig& cfg, const PairedSample& wi, const PairedSample& wj) {
  cfg.validate();
  const std::size_t p = wi.y.size();
  if (wi.z.size() != p || wj.y.size() != p || wj.z.size() != p) {
    throw std::invalid_argument("h_statistic: dimension mismatch");
  }
  return kernel_value_unchecked(cfg, wi.y.data(), wj.y.data(), p) -
         kernel_value_unchecked(cfg, wi.y.data(), wj.z.data(), p) -
         kernel_value_unchecked(cfg, wi.z.data(), wj.y.data(), p) +
         kernel_value_unchecked(cfg, wi.z.data(), wj.z.data(), p);
}

Matrix gram_matrix(const KernelConfig& cfg, const Matrix& a, const Matrix& b) {
  cfg.validate();
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("gram_matrix: column counts differ");
  }
  Matrix out(a.rows(), b.rows());
  parallel_for(0, a.rows(), [&](std::size_t i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      out(i, j) = kernel_value_unchecked(cfg, a.row(i).data(), b.row(j).data(), a.cols());
    }
  });
  return out;
}

}  // namespace cgmmd
