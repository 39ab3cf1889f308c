#include "cgmmd/evaluation.hpp"

#include <fstream>
#include <stdexcept>

#include "cgmmd/ecmmd.hpp"
#include "cgmmd/knn_graph.hpp"
#include "cgmmd/random.hpp"
#include "cgmmd/version.hpp"

namespace cgmmd {

using nlohmann::json;

double conditional_mmd_at(const GeneratorNet& net, const ConditionalTask& task, std::span<const double> x,
                          std::size_t n_gen, std::size_t n_true, const KernelConfig& kernel, std::uint64_t seed) {
  if (x.size() != net.config.predictor_dim || x.size() != task.x_dim()) {
    throw std::invalid_argument("conditional_mmd_at: conditioning point has wrong dimension");
  }
  if (task.y_dim() != net.config.response_dim) {
    throw std::invalid_argument("conditional_mmd_at: task and generator response dimensions differ");
  }
  Matrix xs(n_gen, x.size());
  for (std::size_t i = 0; i < n_gen; ++i) {
    std::copy(x.begin(), x.end(), xs.row(i).begin());
  }
  const Matrix eta = sample_noise({net.config.noise_dim}, n_gen, derive_seed(seed, 0));
  const Matrix generated = generate(net, eta, xs);
  const Matrix truth = true_conditional_sample(task, x, n_true, derive_seed(seed, 1));
  return mmd2_vstat(kernel, generated, truth);
}

double ecmmd_on_holdout(const GeneratorNet& net, const Dataset& holdout, const KernelConfig& kernel,
                        std::size_t k, std::uint64_t seed) {
  holdout.validate();
  if (k >= holdout.n()) {
    throw std::invalid_argument("ecmmd_on_holdout: k must be smaller than the holdout size");
  }
  const KnnGraph graph = build_knn_graph(holdout.x, k);
  const Matrix eta = sample_noise({net.config.noise_dim}, holdout.n(), seed);
  const Matrix z = generate(net, eta, holdout.x);
  return ecmmd_hat({graph, holdout.y, z, kernel});
}

EvalReport build_report(ReportInputs inputs) {
  if (inputs.conditional.empty() && !inputs.holdout) {
    throw std::invalid_argument("build_report: no metrics to report");
  }
  EvalReport report;
  report.library_version = kVersion;
  report.checkpoint_hash = std::move(inputs.checkpoint_hash);
  report.task = std::move(inputs.task);
  report.kernel = inputs.kernel;
  report.seed = inputs.seed;
  report.n_gen = inputs.n_gen;
  report.n_true = inputs.n_true;
  report.conditional = std::move(inputs.conditional);
  report.holdout = inputs.holdout;
  report.wall_ms = inputs.wall_ms;
  report.config = std::move(inputs.config);
  return report;
}

json report_to_json(const EvalReport& report) {
  json doc;
  doc["schema_version"] = report.schema_version;
  doc["library_version"] = report.library_version;
  doc["checkpoint_hash"] = report.checkpoint_hash;
  doc["task"] = report.task;
  doc["kernel"] = {{"family", std::string(to_string(report.kernel.family))}, {"bandwidth", report.kernel.bandwidth}};
  doc["seed"] = report.seed;
  doc["n_gen"] = report.n_gen;
  doc["n_true"] = report.n_true;
  json points = json::array();
  for (const auto& p : report.conditional) {
    json entry{{"x", p.x}, {"mmd2", p.mmd2}};
    entry["mmd2_untrained"] = p.mmd2_untrained ? json(*p.mmd2_untrained) : json(nullptr);
    points.push_back(std::move(entry));
  }
  doc["conditional"] = {{"estimator", "mmd2_vstat"}, {"biased", true}, {"signed", false}, {"points", points}};
  if (report.holdout) {
    const auto& h = *report.holdout;
    doc["holdout"] = {{"estimator", "ecmmd_knn"}, {"signed", true}, {"n", h.n},          {"k", h.k},
                      {"ecmmd", h.ecmmd},         {"ecmmd_untrained", h.ecmmd_untrained ? json(*h.ecmmd_untrained) : json(nullptr)}};
  } else {
    doc["holdout"] = nullptr;
  }
  doc["wall_ms"] = report.wall_ms;
  doc["config"] = report.config;
  return doc;
}

namespace {

const json& field(const json& obj, const char* name, json::value_t type, const std::string& where) {
  if (!obj.is_object() || !obj.contains(name)) {
    throw std::invalid_argument("eval report: missing field '" + where + name + "'");
  }
  const json& v = obj.at(name);
  const bool ok = type == json::value_t::number_float ? v.is_number()
                  : type == json::value_t::number_unsigned ? v.is_number_unsigned() ||
                                                                 (v.is_number_integer() && v.get<std::int64_t>() >= 0)
                                                          : v.type() == type;
  if (!ok) {
    throw std::invalid_argument("eval report: field '" + where + name + "' has the wrong type");
  }
  return v;
}

std::optional<double> nullable_number(const json& obj, const char* name, const std::string& where) {
  if (!obj.contains(name)) {
    throw std::invalid_argument("eval report: missing field '" + where + name + "'");
  }
  const json& v = obj.at(name);
  if (v.is_null()) {
    return std::nullopt;
  }
  if (!v.is_number()) {
    throw std::invalid_argument("eval report: field '" + where + name + "' must be a number or null");
  }
  return v.get<double>();
}

}  // namespace

EvalReport report_from_json(const json& doc) {
  using T = json::value_t;
  EvalReport r;
  r.schema_version = field(doc, "schema_version", T::number_unsigned, "").get<int>();
  if (r.schema_version != kEvalReportSchemaVersion) {
    throw std::invalid_argument("eval report: unsupported schema_version " + std::to_string(r.schema_version));
  }
  r.library_version = field(doc, "library_version", T::string, "").get<std::string>();
  r.checkpoint_hash = field(doc, "checkpoint_hash", T::string, "").get<std::string>();
  r.task = field(doc, "task", T::string, "").get<std::string>();
  const json& kernel = field(doc, "kernel", T::object, "");
  r.kernel.family = kernel_family_from_string(field(kernel, "family", T::string, "kernel.").get<std::string>());
  r.kernel.bandwidth = field(kernel, "bandwidth", T::number_float, "kernel.").get<double>();
  r.seed = field(doc, "seed", T::number_unsigned, "").get<std::uint64_t>();
  r.n_gen = field(doc, "n_gen", T::number_unsigned, "").get<std::size_t>();
  r.n_true = field(doc, "n_true", T::number_unsigned, "").get<std::size_t>();

  const json& cond = field(doc, "conditional", T::object, "");
  field(cond, "estimator", T::string, "conditional.");
  for (const json& p : field(cond, "points", T::array, "conditional.")) {
    ConditionalPoint point;
    for (const json& v : field(p, "x", T::array, "conditional.points[].")) {
      if (!v.is_number()) {
        throw std::invalid_argument("eval report: conditional.points[].x must hold numbers");
      }
      point.x.push_back(v.get<double>());
    }
    point.mmd2 = field(p, "mmd2", T::number_float, "conditional.points[].").get<double>();
    if (point.mmd2 < 0.0) {
      throw std::invalid_argument("eval report: conditional.points[].mmd2 must be >= 0");
    }
    point.mmd2_untrained = nullable_number(p, "mmd2_untrained", "conditional.points[].");
    r.conditional.push_back(std::move(point));
  }

  if (!doc.contains("holdout")) {
    throw std::invalid_argument("eval report: missing field 'holdout'");
  }
  if (!doc.at("holdout").is_null()) {
    const json& h = field(doc, "holdout", T::object, "");
    HoldoutMetric m;
    m.n = field(h, "n", T::number_unsigned, "holdout.").get<std::size_t>();
    m.k = field(h, "k", T::number_unsigned, "holdout.").get<std::size_t>();
    m.ecmmd = field(h, "ecmmd", T::number_float, "holdout.").get<double>();
    m.ecmmd_untrained = nullable_number(h, "ecmmd_untrained", "holdout.");
    r.holdout = m;
  }
  if (r.conditional.empty() && !r.holdout) {
    throw std::invalid_argument("eval report: no metrics present");
  }
  r.wall_ms = field(doc, "wall_ms", T::number_float, "").get<double>();
  r.config = field(doc, "config", T::object, "");
  return r;
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write report '" + path.string() + "'");
  }
  out << report_to_json(report).dump(2) << '\n';
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open report '" + path.string() + "'");
  }
  return report_from_json(json::parse(in));
}

}  // namespace cgmmd
