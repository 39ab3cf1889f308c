#include "cgmmd/ecmmd.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "cgmmd/parallel.hpp"
#include "cgmmd/random.hpp"

namespace cgmmd {

namespace {

void check_pair_shapes(const Matrix& y, const Matrix& z, const char* who) {
  if (y.rows() != z.rows() || y.cols() != z.cols()) {
    throw std::invalid_argument(std::string(who) + ": y and z shapes differ");
  }
  if (y.cols() == 0) {
    throw std::invalid_argument(std::string(who) + ": responses need at least one column");
  }
}

inline double h_term(const KernelConfig& cfg, const Matrix& y, const Matrix& z, std::size_t i, std::size_t j) {
  const std::size_t p = y.cols();
  return kernel_value_unchecked(cfg, y.row(i).data(), y.row(j).data(), p) -
         kernel_value_unchecked(cfg, y.row(i).data(), z.row(j).data(), p) -
         kernel_value_unchecked(cfg, z.row(i).data(), y.row(j).data(), p) +
         kernel_value_unchecked(cfg, z.row(i).data(), z.row(j).data(), p);
}

double ordered_sum(const std::vector<double>& values) {
  double total = 0.0;
  for (double v : values) {
    total += v;
  }
  return total;
}

}  // namespace

double ecmmd_hat(const EcmmdInputs& in) {
  in.kernel.validate();
  check_pair_shapes(in.y, in.z, "ecmmd_hat");
  if (in.y.rows() != in.graph.n()) {
    throw std::invalid_argument("ecmmd_hat: sample count does not match graph size");
  }
  std::vector<double> row_sums(in.graph.n());
  parallel_for(0, in.graph.n(), [&](std::size_t i) {
    double row = 0.0;
    for (std::size_t j : in.graph.neighbors_unchecked(i)) {
      row += h_term(in.kernel, in.y, in.z, i, j);
    }
    row_sums[i] = row;
  });
  return ordered_sum(row_sums) / (static_cast<double>(in.graph.n()) * static_cast<double>(in.graph.k()));
}

double ecmmd_hat_derandomized(const KnnGraph& graph, const Matrix& y, std::span<const Matrix> z_draws,
                              const KernelConfig& kernel) {
  kernel.validate();
  if (z_draws.empty()) {
    throw std::invalid_argument("ecmmd_hat_derandomized: need at least one generated draw");
  }
  for (const Matrix& z : z_draws) {
    check_pair_shapes(y, z, "ecmmd_hat");
  }
  if (y.rows() != graph.n()) {
    throw std::invalid_argument("ecmmd_hat: sample count does not match graph size");
  }

  const auto m = static_cast<double>(z_draws.size());
  std::vector<double> row_sums(graph.n());
  parallel_for(0, graph.n(), [&](std::size_t i) {
    double row = 0.0;
    for (std::size_t j : graph.neighbors_unchecked(i)) {
      double edge = 0.0;
      for (const Matrix& z : z_draws) {
        edge += h_term(kernel, y, z, i, j);
      }
      row += edge / m;
    }
    row_sums[i] = row;
  });
  return ordered_sum(row_sums) / (static_cast<double>(graph.n()) * static_cast<double>(graph.k()));
}

double ecmmd_hat_discrete(std::span<const std::int64_t> labels, const Matrix& y, const Matrix& z,
                          const KernelConfig& kernel) {
  kernel.validate();
  check_pair_shapes(y, z, "ecmmd_hat_discrete");
  if (labels.size() != y.rows()) {
    throw std::invalid_argument("ecmmd_hat_discrete: label count does not match sample count");
  }
  if (labels.empty()) {
    throw std::invalid_argument("ecmmd_hat_discrete: need at least one sample");
  }

  std::map<std::int64_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    groups[labels[i]].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> group_of(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    group_of[i] = &groups.at(labels[i]);
  }

  std::vector<double> row_means(labels.size());
  parallel_for(0, labels.size(), [&](std::size_t i) {
    double row = 0.0;
    for (std::size_t j : *group_of[i]) {
      row += h_term(kernel, y, z, i, j);
    }
    row_means[i] = row / static_cast<double>(group_of[i]->size());
  });
  return ordered_sum(row_means) / static_cast<double>(labels.size());
}

namespace {

double mean_gram(const KernelConfig& kernel, const Matrix& a, const Matrix& b) {
  std::vector<double> row_sums(a.rows());
  parallel_for(0, a.rows(), [&](std::size_t i) {
    double row = 0.0;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      row += kernel_value_unchecked(kernel, a.row(i).data(), b.row(j).data(), a.cols());
    }
    row_sums[i] = row;
  });
  return ordered_sum(row_sums) / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

double mmd2_vstat(const KernelConfig& kernel, const Matrix& a, const Matrix& b) {
  kernel.validate();
  if (a.cols() != b.cols() || a.cols() == 0) {
    throw std::invalid_argument("mmd2_vstat: column counts differ");
  }
  if (a.rows() == 0 || b.rows() == 0) {
    throw std::invalid_argument("mmd2_vstat: need at least one row per sample");
  }
  const double value = mean_gram(kernel, a, a) + mean_gram(kernel, b, b) - 2.0 * mean_gram(kernel, a, b);
  // Rounding can push an exact zero slightly negative.
  return value < 0.0 ? 0.0 : value;
}

MonteCarloEstimate ecmmd_mc_oracle(const ConditionalTask& y_law, const ConditionalTask& z_law,
                                   const KernelConfig& kernel, std::size_t n_outer, std::uint64_t seed) {
  kernel.validate();
  y_law.validate();
  z_law.validate();
  if (n_outer == 0) {
    throw std::invalid_argument("ecmmd_mc_oracle: n_outer must be positive");
  }
  if (y_law.y_dim() != z_law.y_dim()) {
    throw std::invalid_argument("ecmmd_mc_oracle: laws have different response dimensions");
  }

  Rng x_rng(derive_seed(seed, 0));
  const std::size_t p = y_law.y_dim();
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t t = 0; t < n_outer; ++t) {
    const double x = x_rng.normal();
    const Matrix ys = true_conditional_sample(y_law, std::span(&x, 1), 2, derive_seed(seed, 2 * t + 1));
    const Matrix zs = true_conditional_sample(z_law, std::span(&x, 1), 2, derive_seed(seed, 2 * t + 2));
    const double h = kernel_value_unchecked(kernel, ys.row(0).data(), ys.row(1).data(), p) +
                     kernel_value_unchecked(kernel, zs.row(0).data(), zs.row(1).data(), p) -
                     kernel_value_unchecked(kernel, ys.row(0).data(), zs.row(1).data(), p) -
                     kernel_value_unchecked(kernel, zs.row(0).data(), ys.row(1).data(), p);
    sum += h;
    sum_sq += h * h;
  }
  const auto n = static_cast<double>(n_outer);
  const double mean = sum / n;
  const double variance = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1)) : 0.0;
  return {mean, std::sqrt(variance / n), n_outer};
}

double mmd2_gaussian_analytic(double mu1, double s1, double mu2, double s2, double h) {
  if (!(s1 > 0.0) || !(s2 > 0.0) || !(h > 0.0)) {
    throw std::invalid_argument("mmd2_gaussian_analytic: scales and bandwidth must be positive");
  }
  const auto expected_kernel = [h](double mu_a, double var_a, double mu_b, double var_b) {
    const double spread = h * h + var_a + var_b;
    const double diff = mu_a - mu_b;
    return h / std::sqrt(spread) * std::exp(-diff * diff / (2.0 * spread));
  };
  const double v1 = s1 * s1;
  const double v2 = s2 * s2;
  return expected_kernel(mu1, v1, mu1, v1) + expected_kernel(mu2, v2, mu2, v2) -
         2.0 * expected_kernel(mu1, v1, mu2, v2);
}

}  // namespace cgmmd
