#pragma once

#include <cstdint>
#include <span>

#include "cgmmd/datasets.hpp"
#include "cgmmd/kernels.hpp"
#include "cgmmd/knn_graph.hpp"
#include "cgmmd/matrix.hpp"

namespace cgmmd {

/// Observed responses y and generated responses z, row i of z conditioned on
/// predictor i, plus the kNN graph over the predictors.
struct EcmmdInputs {
  const KnnGraph& graph;
  const Matrix& y;
  const Matrix& z;
  KernelConfig kernel;
};

/// (1 / (n k)) * sum_i sum_{j in N(i)} H(W_i, W_j), W_i = (y_i, z_i).
/// Row sums may be computed in parallel; the final sum runs in row order.
double ecmmd_hat(const EcmmdInputs& in);

/// Averages H over M independent generated draws per edge:
/// (1 / (n k)) * sum_i sum_{j in N(i)} (1/M) sum_m H(W_{i,m}, W_{j,m}).
/// With a single draw this is bitwise equal to ecmmd_hat.
double ecmmd_hat_derandomized(const KnnGraph& graph, const Matrix& y, std::span<const Matrix> z_draws,
                              const KernelConfig& kernel);

/// Discrete-predictor variant: neighborhoods are exact label matches,
/// (1/n) * sum_i (1/|G_i|) sum_{j in G_i} H(W_i, W_j), G_i = {j : label_j = label_i}.
double ecmmd_hat_discrete(std::span<const std::int64_t> labels, const Matrix& y, const Matrix& z,
                          const KernelConfig& kernel);

/// Biased (V-statistic) MMD^2: mean K(a,a') + mean K(b,b') - 2 mean K(a,b),
/// diagonals included. Nonnegative.
double mmd2_vstat(const KernelConfig& kernel, const Matrix& a, const Matrix& b);

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

/// Population ECMMD^2 between two conditional laws by plain Monte Carlo:
/// average over X ~ N(0,1) of K(Y,Y') + K(Z,Z') - K(Y,Z') - K(Z,Y'), where
/// Y, Y' ~ y_law | X and Z, Z' ~ z_law | X independently.
MonteCarloEstimate ecmmd_mc_oracle(const ConditionalTask& y_law, const ConditionalTask& z_law,
                                   const KernelConfig& kernel, std::size_t n_outer, std::uint64_t seed);

/// Closed-form MMD^2 between N(mu1, s1^2) and N(mu2, s2^2) under the 1-D
/// gaussian kernel of bandwidth h. For independent A, B:
///   E K(A, B) = h / sqrt(h^2 + v) * exp(-(mu_a - mu_b)^2 / (2 (h^2 + v))),  v = s_a^2 + s_b^2.
double mmd2_gaussian_analytic(double mu1, double s1, double mu2, double s2, double h);

}  // namespace cgmmd
