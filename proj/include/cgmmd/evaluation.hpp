#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgmmd/datasets.hpp"
#include "cgmmd/generator.hpp"
#include "cgmmd/kernels.hpp"

namespace cgmmd {

/// V-statistic MMD^2 between n_gen generator draws at x (fresh noise from
/// derive_seed(seed, 0)) and n_true oracle draws (derive_seed(seed, 1)).
double conditional_mmd_at(const GeneratorNet& net, const ConditionalTask& task, std::span<const double> x,
                          std::size_t n_gen, std::size_t n_true, const KernelConfig& kernel, std::uint64_t seed);

/// kNN ECMMD estimate on held-out rows, one generated response per row with
/// noise from Rng(seed). The caller keeps the holdout disjoint from training data.
double ecmmd_on_holdout(const GeneratorNet& net, const Dataset& holdout, const KernelConfig& kernel,
                        std::size_t k, std::uint64_t seed);

struct ConditionalPoint {
  std::vector<double> x;
  double mmd2 = 0.0;
  std::optional<double> mmd2_untrained;

  friend bool operator==(const ConditionalPoint&, const ConditionalPoint&) = default;
};

struct HoldoutMetric {
  std::size_t n = 0;
  std::size_t k = 0;
  double ecmmd = 0.0;
  std::optional<double> ecmmd_untrained;

  friend bool operator==(const HoldoutMetric&, const HoldoutMetric&) = default;
};

inline constexpr int kEvalReportSchemaVersion = 1;

/// Discrepancies are V-statistic MMD^2 (biased, >= 0); the holdout ECMMD is a
/// signed estimator and is flagged as such in the serialized form.
struct EvalReport {
  int schema_version = kEvalReportSchemaVersion;
  std::string library_version;
  std::string checkpoint_hash;
  std::string task;
  KernelConfig kernel;
  std::uint64_t seed = 0;
  std::size_t n_gen = 0;
  std::size_t n_true = 0;
  std::vector<ConditionalPoint> conditional;
  std::optional<HoldoutMetric> holdout;
  double wall_ms = 0.0;
  nlohmann::json config = nlohmann::json::object();

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct ReportInputs {
  std::string checkpoint_hash;
  std::string task = "external";
  KernelConfig kernel;
  std::uint64_t seed = 0;
  std::size_t n_gen = 0;
  std::size_t n_true = 0;
  std::vector<ConditionalPoint> conditional;
  std::optional<HoldoutMetric> holdout;
  double wall_ms = 0.0;
  nlohmann::json config = nlohmann::json::object();
};

/// Throws std::invalid_argument when no metric was computed.
EvalReport build_report(ReportInputs inputs);

nlohmann::json report_to_json(const EvalReport& report);
/// Validates the document against the schema in docs/eval_report.md; throws
/// std::invalid_argument naming the first offending field.
EvalReport report_from_json(const nlohmann::json& doc);

void write_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);

}  // namespace cgmmd
