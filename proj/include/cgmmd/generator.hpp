#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgmmd/matrix.hpp"

namespace cgmmd {

enum class OutputActivation { linear, sigmoid };

std::string_view to_string(OutputActivation act) noexcept;
OutputActivation output_activation_from_string(std::string_view name);

struct GeneratorConfig {
  std::size_t predictor_dim = 1;  // d
  std::size_t noise_dim = 3;      // m
  std::size_t response_dim = 2;   // p
  std::vector<std::size_t> hidden{64, 64};
  OutputActivation output_activation = OutputActivation::linear;
  std::uint64_t seed = 0;

  void validate() const;
  /// d + m, hidden..., p
  std::vector<std::size_t> layer_widths() const;
};

/// Affine layer acting on row vectors: out = in * weight + bias, weight is fan_in × fan_out.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// One tensor pair per layer, shaped like the network. Used for gradients and
/// optimizer moments as well as the parameters themselves.
using ParameterSet = std::vector<DenseLayer>;

ParameterSet zeros_like(const ParameterSet& params);

/// Feed-forward ReLU network g(eta, x). The input row is [eta | x]; hidden
/// layers apply ReLU, the output layer applies config.output_activation.
struct GeneratorNet {
  GeneratorConfig config;
  ParameterSet layers;

  /// sum_i w_i (w_{i-1} + 1) over layers.
  std::size_t parameter_count() const noexcept;
};

struct NoiseSpec {
  std::size_t dim = 3;
};

/// He initialization: weights ~ N(0, 2 / fan_in) from Rng(config.seed), biases zero.
GeneratorNet init_generator(const GeneratorConfig& config);

/// n × m i.i.d. standard normal draws from Rng(seed), row-major order.
Matrix sample_noise(const NoiseSpec& spec, std::size_t n, std::uint64_t seed);

/// Joins [eta | x] row by row.
Matrix concat_columns(const Matrix& left, const Matrix& right);

/// One forward pass per row. Throws NonFiniteError if any output is not finite.
Matrix generate(const GeneratorNet& net, const Matrix& eta, const Matrix& x);

std::vector<std::uint8_t> save_checkpoint(const GeneratorNet& net);
GeneratorNet load_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint_file(const GeneratorNet& net, const std::filesystem::path& path);
GeneratorNet read_checkpoint_file(const std::filesystem::path& path);

/// FNV-1a 64 over the bytes, as 16 lowercase hex digits.
std::string fingerprint(std::span<const std::uint8_t> bytes);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace cgmmd
