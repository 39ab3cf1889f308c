#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include "cgmmd/matrix.hpp"

namespace cgmmd {

enum class TaskKind { helix, circle, linear_gaussian };

std::string_view to_string(TaskKind kind) noexcept;
TaskKind task_kind_from_string(std::string_view name);

/// A synthetic law with a known conditional Y | X. All three tasks draw X ~ N(0, 1).
///   helix:           Y1 = 2X + U sin(2U) + e1,  Y2 = 2X + U cos(2U) + e2
///   circle:          Y1 = X + 3 sin(U) + e1,    Y2 = X + 3 cos(U) + e2
///   linear_gaussian: Y  = slope X + intercept + cond_std N(0, 1)
/// with U ~ Unif[0, 2 pi) and e1, e2 ~ N(0, sigma^2).
struct ConditionalTask {
  TaskKind kind = TaskKind::helix;
  double sigma = 0.0;
  double slope = 1.0;
  double intercept = 0.0;
  double cond_std = 1.0;

  void validate() const;
  std::size_t x_dim() const noexcept { return 1; }
  std::size_t y_dim() const noexcept { return kind == TaskKind::linear_gaussian ? 1 : 2; }
};

struct DatasetMeta {
  std::string task = "external";
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

struct Dataset {
  Matrix x;
  Matrix y;
  DatasetMeta meta;

  std::size_t n() const noexcept { return x.rows(); }
  /// Throws std::invalid_argument on row mismatch, empty dims or non-finite entries.
  void validate() const;
};

std::array<double, 2> helix_response(double x, double u, double e1, double e2) noexcept;
std::array<double, 2> circle_response(double x, double u, double e1, double e2) noexcept;

// Per row the stream yields X, then U, e1, e2 (helix/circle) or the standard
// normal innovation (linear_gaussian), all from one Rng(seed).
Dataset gen_helix(std::size_t n, double sigma, std::uint64_t seed);
Dataset gen_circle(std::size_t n, double sigma, std::uint64_t seed);
Dataset gen_linear_gaussian(std::size_t n, double slope, double intercept, double cond_std, std::uint64_t seed);
Dataset generate_task(const ConditionalTask& task, std::size_t n, std::uint64_t seed);

/// n fresh draws from the exact law of Y | X = x.
Matrix true_conditional_sample(const ConditionalTask& task, std::span<const double> x, std::size_t n,
                               std::uint64_t seed);

/// CSV: header x0,...,x{d-1},y0,...,y{p-1}; one sample per row; LF endings;
/// values written as the shortest decimal that reads back to the same double.
/// Errors carry the 1-based line.
Dataset read_csv(std::istream& in);
void write_csv(const Dataset& data, std::ostream& out);
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& data, const std::filesystem::path& path);

/// Shortest text that reads back to the same double (at most 17 significant digits).
std::string format_double(double value);

}  // namespace cgmmd
