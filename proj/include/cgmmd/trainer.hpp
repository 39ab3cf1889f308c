#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cgmmd/autodiff.hpp"
#include "cgmmd/datasets.hpp"
#include "cgmmd/generator.hpp"
#include "cgmmd/kernels.hpp"
#include "cgmmd/knn_graph.hpp"

namespace cgmmd {

/// Decoupled weight decay Adam. One step at step count t (starting from 1):
///   theta <- theta * (1 - lr * weight_decay)
///   m <- beta1 m + (1 - beta1) g
///   v <- beta2 v + (1 - beta2) g^2
///   theta <- theta - lr * (m / (1 - beta1^t)) / (sqrt(v / (1 - beta2^t)) + eps)
struct AdamWHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::uint64_t step = 0;
};

void adamw_step(ParameterSet& params, const ParameterSet& grads, AdamWState& state, const AdamWHyper& hyper);

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 256;
  /// Neighbors per batch graph; unset means max(4, ceil(B^(1/3))).
  std::optional<std::size_t> neighbors;
  AdamWHyper adamw;
  std::uint64_t seed = 0;
  /// Fixed gaussian bandwidth; unset means "median-auto": the median heuristic
  /// on the y rows of the first batch, frozen for the run.
  std::optional<double> bandwidth;
  /// Draw fresh eta_i at the start of every epoch instead of once up front.
  bool resample_noise_each_epoch = false;

  std::size_t resolved_neighbors() const;
  void validate(std::size_t n) const;
};

std::size_t default_neighbors(std::size_t batch_size);

struct TrainReport {
  std::vector<double> step_losses;
  std::vector<double> epoch_mean_losses;
  std::vector<double> step_wall_ms;
  double wall_ms = 0.0;
  KernelConfig kernel;
  std::size_t neighbors = 0;
};

/// Handed to the observer after every optimizer step.
struct StepInfo {
  std::size_t step = 0;   // 1-based
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double wall_ms = 0.0;   // since train() started
  std::span<const std::size_t> batch_indices;
  const KnnGraph* graph = nullptr;
};

using StepObserver = std::function<void(const StepInfo&)>;

struct TrainResult {
  GeneratorNet net;
  TrainReport report;
};

struct BatchLoss {
  double loss = 0.0;
  ParameterSet grads;
};

/// Builds the k-NN graph on the batch predictors, then the loss and its gradient.
BatchLoss batch_loss_and_grads(const GeneratorNet& net, const ad::BatchView& batch, const KernelConfig& kernel,
                               std::size_t neighbors);

/// Seed streams: net init uses gen_cfg.seed; noise uses derive_seed(cfg.seed, 1)
/// (epoch e re-draw: derive_seed(cfg.seed, 1000 + e)); epoch shuffles use one
/// Rng(derive_seed(cfg.seed, 2)). Each epoch partitions a fresh permutation into
/// consecutive batches of B; a trailing batch with fewer than k+1 rows is dropped.
TrainResult train(const Dataset& data, const GeneratorConfig& gen_cfg, const TrainConfig& cfg,
                  const StepObserver& observer = {});

}  // namespace cgmmd
