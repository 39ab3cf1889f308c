#include "cgmmd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cgmmd/errors.hpp"
#include "cgmmd/random.hpp"

namespace cgmmd {

namespace {

void adamw_update(std::span<double> theta, std::span<const double> g, std::span<double> m, std::span<double> v,
                  const AdamWHyper& h, double bias1, double bias2) {
  const double decay = 1.0 - h.learning_rate * h.weight_decay;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    theta[i] *= decay;
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    theta[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.eps);
  }
}

}  // namespace

void adamw_step(ParameterSet& params, const ParameterSet& grads, AdamWState& state, const AdamWHyper& hyper) {
  if (grads.size() != params.size()) {
    throw std::invalid_argument("adamw_step: gradient layer count differs from parameters");
  }
  if (state.first_moment.empty()) {
    state.first_moment = zeros_like(params);
    state.second_moment = zeros_like(params);
  }
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(hyper.beta1, t);
  const double bias2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t l = 0; l < params.size(); ++l) {
    auto& p = params[l];
    const auto& g = grads[l];
    if (g.weight.size() != p.weight.size() || g.bias.size() != p.bias.size()) {
      throw std::invalid_argument("adamw_step: gradient shape differs from parameters in layer " + std::to_string(l));
    }
    adamw_update(p.weight.data(), g.weight.data(), state.first_moment[l].weight.data(),
                 state.second_moment[l].weight.data(), hyper, bias1, bias2);
    adamw_update(p.bias, g.bias, state.first_moment[l].bias, state.second_moment[l].bias, hyper, bias1, bias2);
  }
}

std::size_t default_neighbors(std::size_t batch_size) {
  const auto cube_root = static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(batch_size)) - 1e-12));
  return std::max<std::size_t>(4, cube_root);
}

std::size_t TrainConfig::resolved_neighbors() const {
  return neighbors.value_or(default_neighbors(batch_size));
}

void TrainConfig::validate(std::size_t n) const {
  if (batch_size < 2) {
    throw std::invalid_argument("batch size must be >= 2");
  }
  if (batch_size > n) {
    throw std::invalid_argument("batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                                std::to_string(n));
  }
  const std::size_t k = resolved_neighbors();
  if (k == 0 || k + 1 > batch_size) {
    throw std::invalid_argument("neighbors must satisfy 1 <= k <= B - 1");
  }
  if (!(adamw.learning_rate > 0.0)) {
    throw std::invalid_argument("learning rate must be positive");
  }
  if (adamw.weight_decay < 0.0 || !(adamw.eps > 0.0) || adamw.beta1 < 0.0 || adamw.beta1 >= 1.0 ||
      adamw.beta2 < 0.0 || adamw.beta2 >= 1.0) {
    throw std::invalid_argument("invalid AdamW hyperparameters");
  }
  if (bandwidth && !(*bandwidth > 0.0)) {
    throw std::invalid_argument("bandwidth must be positive");
  }
}

BatchLoss batch_loss_and_grads(const GeneratorNet& net, const ad::BatchView& batch, const KernelConfig& kernel,
                               std::size_t neighbors) {
  if (batch.x.rows() < neighbors + 1) {
    throw std::invalid_argument("batch of " + std::to_string(batch.x.rows()) + " rows is too small for k=" +
                                std::to_string(neighbors));
  }
  const KnnGraph graph = build_knn_graph(batch.x, neighbors);
  auto tape = ad::forward_loss(net, batch, kernel, graph);
  return {tape.loss, ad::backward(tape)};
}

TrainResult train(const Dataset& data, const GeneratorConfig& gen_cfg, const TrainConfig& cfg,
                  const StepObserver& observer) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const auto elapsed_ms = [&] { return std::chrono::duration<double, std::milli>(Clock::now() - start).count(); };

  data.validate();
  gen_cfg.validate();
  if (data.n() == 0) {
    throw std::invalid_argument("train: dataset is empty");
  }
  if (data.x.cols() != gen_cfg.predictor_dim || data.y.cols() != gen_cfg.response_dim) {
    throw std::invalid_argument("train: dataset dimensions do not match the generator config");
  }
  cfg.validate(data.n());

  TrainResult result{init_generator(gen_cfg), {}};
  TrainReport& report = result.report;
  const std::size_t k = cfg.resolved_neighbors();
  report.neighbors = k;
  report.kernel = KernelConfig{KernelFamily::gaussian, cfg.bandwidth.value_or(1.0)};

  const NoiseSpec noise_spec{gen_cfg.noise_dim};
  Matrix eta = sample_noise(noise_spec, data.n(), derive_seed(cfg.seed, 1));
  Rng shuffle_rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(data.n());
  std::iota(order.begin(), order.end(), std::size_t{0});

  AdamWState optimizer;
  bool kernel_frozen = cfg.bandwidth.has_value();
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.resample_noise_each_epoch && epoch > 1) {
      eta = sample_noise(noise_spec, data.n(), derive_seed(cfg.seed, 1000 + epoch));
    }
    shuffle_rng.shuffle(std::span(order));

    double epoch_sum = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t begin = 0; begin < data.n(); begin += cfg.batch_size) {
      const std::size_t end = std::min(data.n(), begin + cfg.batch_size);
      if (end - begin < k + 1) {
        continue;
      }
      const std::span<const std::size_t> indices(order.data() + begin, end - begin);
      const Matrix bx = data.x.gather_rows(indices);
      const Matrix by = data.y.gather_rows(indices);
      const Matrix beta = eta.gather_rows(indices);
      if (!kernel_frozen) {
        report.kernel.bandwidth = median_heuristic_bandwidth(by);
        kernel_frozen = true;
      }

      const KnnGraph graph = build_knn_graph(bx, k);
      std::optional<ad::LossTape> tape;
      try {
        tape.emplace(ad::forward_loss(result.net, {bx, by, beta}, report.kernel, graph));
      } catch (const NonFiniteError& e) {
        throw TrainingError("training aborted at step " + std::to_string(step + 1) + " (epoch " +
                            std::to_string(epoch) + "): " + e.what());
      }
      const ParameterSet grads = ad::backward(*tape);
      adamw_step(result.net.layers, grads, optimizer, cfg.adamw);

      ++step;
      ++epoch_steps;
      epoch_sum += tape->loss;
      report.step_losses.push_back(tape->loss);
      report.step_wall_ms.push_back(elapsed_ms());
      if (observer) {
        observer({step, epoch, tape->loss, report.step_wall_ms.back(), indices, &graph});
      }
    }
    report.epoch_mean_losses.push_back(epoch_steps ? epoch_sum / static_cast<double>(epoch_steps) : 0.0);
  }
  report.wall_ms = elapsed_ms();
  return result;
}

}  // namespace cgmmd
