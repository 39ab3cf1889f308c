#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "cgmmd/datasets.hpp"
#include "cgmmd/ecmmd.hpp"
#include "cgmmd/errors.hpp"
#include "cgmmd/evaluation.hpp"
#include "cgmmd/generator.hpp"
#include "cgmmd/kernels.hpp"
#include "cgmmd/knn_graph.hpp"
#include "cgmmd/parallel.hpp"
#include "cgmmd/random.hpp"
#include "cgmmd/trainer.hpp"
#include "cgmmd/version.hpp"

namespace cgmmd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Settings resolution: built-in defaults, then the --config JSON file, then
// explicit flags. The defaults document doubles as the schema: a config file
// may only contain keys that exist there, with compatible types (a null
// default accepts any scalar).

using Override = std::function<void(json&)>;

struct Command {
  CLI::App* app = nullptr;
  json defaults;
  std::vector<Override> overrides;
  std::string config_path;
};

void merge_checked(json& target, const json& source, const std::string& where) {
  if (!source.is_object()) {
    throw UsageError("config: '" + (where.empty() ? std::string("<root>") : where) + "' must be an object");
  }
  for (const auto& [key, value] : source.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!target.contains(key)) {
      throw UsageError("config: unknown key '" + path + "'");
    }
    json& slot = target[key];
    if (slot.is_object()) {
      merge_checked(slot, value, path);
      continue;
    }
    const bool compatible = value.is_null() || slot.is_null() || (slot.is_number() && value.is_number()) ||
                            slot.type() == value.type() || (slot.is_string() && value.is_number());
    if (!compatible || value.is_object()) {
      throw UsageError("config: key '" + path + "' has the wrong type");
    }
    slot = value;
  }
}

json resolve(const Command& cmd) {
  json doc = cmd.defaults;
  if (!cmd.config_path.empty()) {
    std::ifstream in(cmd.config_path);
    if (!in) {
      throw UsageError("config: cannot open '" + cmd.config_path + "'");
    }
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
    merge_checked(doc, file, "");
  }
  for (const auto& apply : cmd.overrides) {
    apply(doc);
  }
  return doc;
}

template <typename T>
CLI::Option* flag(Command& cmd, const std::string& name, const std::string& pointer, const std::string& help) {
  auto value = std::make_shared<T>();
  CLI::Option* opt = cmd.app->add_option(name, *value, help);
  cmd.overrides.push_back([opt, value, pointer](json& doc) {
    if (opt->count() > 0) {
      doc[json::json_pointer(pointer)] = *value;
    }
  });
  return opt;
}

CLI::Option* switch_flag(Command& cmd, const std::string& name, const std::string& pointer, const std::string& help) {
  CLI::Option* opt = cmd.app->add_flag(name, help);
  cmd.overrides.push_back([opt, pointer](json& doc) {
    if (opt->count() > 0) {
      doc[json::json_pointer(pointer)] = true;
    }
  });
  return opt;
}

/// "median"/"median-auto" style keywords stay strings; anything numeric becomes a number.
CLI::Option* bandwidth_flag(Command& cmd, const std::string& pointer, const std::string& help) {
  auto value = std::make_shared<std::string>();
  CLI::Option* opt = cmd.app->add_option("--bandwidth", *value, help);
  cmd.overrides.push_back([opt, value, pointer](json& doc) {
    if (opt->count() == 0) {
      return;
    }
    double number = 0.0;
    std::istringstream in(*value);
    if (in >> number && in.eof()) {
      doc[json::json_pointer(pointer)] = number;
    } else {
      doc[json::json_pointer(pointer)] = *value;
    }
  });
  return opt;
}

void shared_flags(Command& cmd, bool out_required) {
  cmd.app->add_option("--config", cmd.config_path, "JSON config file; flags override its values");
  flag<std::uint64_t>(cmd, "--seed", "/seed", "Random seed");
  flag<std::size_t>(cmd, "--threads", "/threads", "Worker threads for kNN and kernel sums");
  auto* out = flag<std::string>(cmd, "--out", "/out", "Output directory");
  if (out_required) {
    out->required();
  }
}

// ---------------------------------------------------------------------------
// Typed access to the resolved document.

template <typename T>
T get(const json& doc, const char* pointer) {
  const json& v = doc.at(json::json_pointer(pointer));
  if (v.is_null()) {
    throw UsageError(std::string("missing required setting '") + pointer + "'");
  }
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("setting '") + pointer + "' has the wrong type");
  }
}

/// Bad values in the resolved settings are usage errors, not runtime failures.
template <typename F>
auto checked(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

bool is_set(const json& doc, const char* pointer) {
  return !doc.at(json::json_pointer(pointer)).is_null();
}

ConditionalTask task_from(const json& t) {
  return checked([&] {
    ConditionalTask task;
    task.kind = task_kind_from_string(t.at("name").get<std::string>());
    task.sigma = t.at("sigma").get<double>();
    task.slope = t.at("slope").get<double>();
    task.intercept = t.at("intercept").get<double>();
    task.cond_std = t.at("cond_std").get<double>();
    task.validate();
    return task;
  });
}

json task_defaults() {
  return {{"name", nullptr}, {"sigma", 0.2}, {"slope", 1.0}, {"intercept", 0.0}, {"cond_std", 1.0}};
}

void task_flags(Command& cmd, const std::string& prefix) {
  flag<std::string>(cmd, "--task", prefix + "/name", "Synthetic task: helix, circle or linear_gaussian");
  flag<double>(cmd, "--sigma", prefix + "/sigma", "Task noise level");
  flag<double>(cmd, "--slope", prefix + "/slope", "linear_gaussian slope");
  flag<double>(cmd, "--intercept", prefix + "/intercept", "linear_gaussian intercept");
  flag<double>(cmd, "--cond-std", prefix + "/cond_std", "linear_gaussian conditional std");
}

fs::path prepare_out(const json& doc) {
  const fs::path out = get<std::string>(doc, "/out");
  fs::create_directories(out);
  return out;
}

/// Thread count never changes results, so it is consumed here and left out of
/// the config that outputs embed.
void apply_threads(json& doc) {
  const auto threads = get<std::size_t>(doc, "/threads");
  if (threads == 0) {
    throw UsageError("--threads must be >= 1");
  }
  set_thread_count(threads);
  doc.erase("threads");
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path.string() + "'");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  out << text;
}

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size()) {
      throw UsageError("cannot parse conditioning value '" + text + "'");
    }
    values.push_back(v);
  }
  if (values.empty()) {
    throw UsageError("empty conditioning value");
  }
  return values;
}

// ---------------------------------------------------------------------------
// train

struct TrainCommand : Command {
  explicit TrainCommand(CLI::App& root) {
    app = root.add_subcommand("train", "Train a conditional generator");
    defaults = {
        {"data", {{"csv", nullptr}, {"n", 4000}, {"task", task_defaults()}}},
        {"generator", {{"noise_dim", 3}, {"hidden", {64, 64}}, {"output_activation", "linear"}}},
        {"train",
         {{"epochs", 200},
          {"batch_size", 256},
          {"neighbors", nullptr},
          {"learning_rate", 1e-3},
          {"beta1", 0.9},
          {"beta2", 0.999},
          {"eps", 1e-8},
          {"weight_decay", 0.01},
          {"bandwidth", "median-auto"},
          {"resample_noise", false}}},
        {"seed", 0},
        {"threads", 1},
        {"out", nullptr},
    };
    shared_flags(*this, true);
    flag<std::string>(*this, "--data", "/data/csv", "Training CSV (x0..,y0..)");
    flag<std::size_t>(*this, "--n", "/data/n", "Synthetic sample count");
    task_flags(*this, "/data/task");
    flag<std::size_t>(*this, "--noise-dim", "/generator/noise_dim", "Noise dimension m");
    flag<std::vector<std::size_t>>(*this, "--hidden", "/generator/hidden", "Hidden widths, e.g. 64,64")
        ->delimiter(',');
    flag<std::string>(*this, "--output-activation", "/generator/output_activation", "linear or sigmoid");
    flag<std::size_t>(*this, "--epochs", "/train/epochs", "Epochs E");
    flag<std::size_t>(*this, "--batch-size", "/train/batch_size", "Batch size B");
    flag<std::size_t>(*this, "--neighbors", "/train/neighbors", "Neighbors per batch graph k_B");
    flag<double>(*this, "--lr", "/train/learning_rate", "AdamW learning rate");
    flag<double>(*this, "--weight-decay", "/train/weight_decay", "AdamW decoupled weight decay");
    bandwidth_flag(*this, "/train/bandwidth", "Gaussian bandwidth or median-auto");
    switch_flag(*this, "--resample-noise", "/train/resample_noise", "Redraw noise every epoch");
  }

  int execute(std::ostream& out) const {
    json doc = resolve(*this);
    apply_threads(doc);
    const auto seed = get<std::uint64_t>(doc, "/seed");

    Dataset data;
    const bool has_csv = is_set(doc, "/data/csv");
    const bool has_task = is_set(doc, "/data/task/name");
    if (has_csv == has_task) {
      throw UsageError("train needs exactly one of --task or --data");
    }
    if (has_csv) {
      data = load_csv(get<std::string>(doc, "/data/csv"));
      data.meta.seed = seed;
    } else {
      data = generate_task(task_from(doc.at("data").at("task")), get<std::size_t>(doc, "/data/n"),
                           derive_seed(seed, 10));
    }

    GeneratorConfig gen;
    gen.predictor_dim = data.x.cols();
    gen.response_dim = data.y.cols();
    gen.noise_dim = get<std::size_t>(doc, "/generator/noise_dim");
    gen.hidden = get<std::vector<std::size_t>>(doc, "/generator/hidden");
    gen.output_activation = checked(
        [&] { return output_activation_from_string(get<std::string>(doc, "/generator/output_activation")); });
    gen.seed = derive_seed(seed, 11);

    TrainConfig cfg;
    cfg.epochs = get<std::size_t>(doc, "/train/epochs");
    cfg.batch_size = get<std::size_t>(doc, "/train/batch_size");
    if (is_set(doc, "/train/neighbors")) {
      cfg.neighbors = get<std::size_t>(doc, "/train/neighbors");
    }
    cfg.adamw.learning_rate = get<double>(doc, "/train/learning_rate");
    cfg.adamw.beta1 = get<double>(doc, "/train/beta1");
    cfg.adamw.beta2 = get<double>(doc, "/train/beta2");
    cfg.adamw.eps = get<double>(doc, "/train/eps");
    cfg.adamw.weight_decay = get<double>(doc, "/train/weight_decay");
    const json& bw = doc.at("train").at("bandwidth");
    if (bw.is_number()) {
      cfg.bandwidth = bw.get<double>();
    } else if (bw != "median-auto") {
      throw UsageError("--bandwidth must be a positive number or median-auto");
    }
    cfg.resample_noise_each_epoch = get<bool>(doc, "/train/resample_noise");
    cfg.seed = seed;
    try {
      gen.validate();
      cfg.validate(data.n());
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    doc["train"]["neighbors"] = cfg.resolved_neighbors();

    const fs::path dir = prepare_out(doc);
    std::ofstream metrics(dir / "train_metrics.jsonl", std::ios::binary);
    if (!metrics) {
      throw std::runtime_error("cannot write metrics in '" + dir.string() + "'");
    }
    metrics << json{{"record", "config"}, {"version", kVersion}, {"config", doc}}.dump() << '\n';

    const auto result = train(data, gen, cfg, [&](const StepInfo& s) {
      metrics << json{{"record", "step"}, {"step", s.step}, {"epoch", s.epoch}, {"loss", s.loss}, {"wall_ms", s.wall_ms}}
                     .dump()
              << '\n';
    });
    const auto& report = result.report;
    for (std::size_t e = 0; e < report.epoch_mean_losses.size(); ++e) {
      metrics << json{{"record", "epoch"}, {"epoch", e + 1}, {"loss", report.epoch_mean_losses[e]}}.dump() << '\n';
    }

    const auto bytes = save_checkpoint(result.net);
    write_text(dir / "model.ckpt", std::string(bytes.begin(), bytes.end()));
    metrics << json{{"record", "summary"},
                    {"steps", report.step_losses.size()},
                    {"epochs", cfg.epochs},
                    {"kernel", {{"family", "gaussian"}, {"bandwidth", report.kernel.bandwidth}}},
                    {"neighbors", report.neighbors},
                    {"checkpoint", "model.ckpt"},
                    {"checkpoint_hash", fingerprint(bytes)},
                    {"wall_ms", report.wall_ms}}
                   .dump()
            << '\n';

    out << "train: steps=" << report.step_losses.size();
    if (!report.epoch_mean_losses.empty()) {
      out << " first_epoch_loss=" << format_double(report.epoch_mean_losses.front())
          << " final_epoch_loss=" << format_double(report.epoch_mean_losses.back());
    }
    out << " checkpoint=" << (dir / "model.ckpt").string() << '\n';
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// sample

struct SampleCommand : Command {
  explicit SampleCommand(CLI::App& root) {
    app = root.add_subcommand("sample", "Draw conditional samples in one forward pass");
    defaults = {{"ckpt", nullptr}, {"x", json::array()}, {"x_csv", nullptr}, {"n", 1000},
                {"seed", 0},       {"threads", 1},       {"out", "."}};
    shared_flags(*this, false);
    flag<std::string>(*this, "--ckpt", "/ckpt", "Checkpoint file")->required();
    auto values = std::make_shared<std::vector<std::string>>();
    CLI::Option* opt = app->add_option("--x", *values, "Conditioning value; comma-separate components, repeatable");
    overrides.push_back([opt, values](json& doc) {
      if (opt->count() == 0) {
        return;
      }
      json points = json::array();
      for (const auto& v : *values) {
        points.push_back(parse_point(v));
      }
      doc["x"] = points;
    });
    flag<std::string>(*this, "--x-csv", "/x_csv", "CSV of conditioning values (x0..[,y..])");
    flag<std::size_t>(*this, "--n", "/n", "Samples per conditioning value");
  }

  int execute(std::ostream& out) const {
    json doc = resolve(*this);
    apply_threads(doc);
    const auto seed = get<std::uint64_t>(doc, "/seed");
    const std::size_t n = get<std::size_t>(doc, "/n");
    const GeneratorNet net = read_checkpoint_file(get<std::string>(doc, "/ckpt"));
    const std::size_t d = net.config.predictor_dim;

    std::vector<std::vector<double>> points = doc.at("x").get<std::vector<std::vector<double>>>();
    if (is_set(doc, "/x_csv")) {
      std::ifstream in(get<std::string>(doc, "/x_csv"), std::ios::binary);
      if (!in) {
        throw std::runtime_error("cannot open '" + get<std::string>(doc, "/x_csv") + "'");
      }
      std::string header;
      std::getline(in, header);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) {
          continue;
        }
        auto values = parse_point(line);
        if (values.size() < d) {
          throw std::runtime_error("x-csv row has fewer than d=" + std::to_string(d) + " values");
        }
        values.resize(d);
        points.push_back(std::move(values));
      }
    }
    if (points.empty()) {
      throw UsageError("sample needs --x or --x-csv");
    }

    Dataset samples{Matrix(points.size() * n, d), Matrix(points.size() * n, net.config.response_dim), {}};
    for (std::size_t p = 0; p < points.size(); ++p) {
      if (points[p].size() != d) {
        throw UsageError("conditioning value " + std::to_string(p) + " has " + std::to_string(points[p].size()) +
                         " components, checkpoint expects " + std::to_string(d));
      }
      Matrix xs(n, d);
      for (std::size_t i = 0; i < n; ++i) {
        std::copy(points[p].begin(), points[p].end(), xs.row(i).begin());
      }
      const Matrix eta = sample_noise({net.config.noise_dim}, n, derive_seed(seed, p));
      const Matrix ys = generate(net, eta, xs);
      for (std::size_t i = 0; i < n; ++i) {
        std::copy(xs.row(i).begin(), xs.row(i).end(), samples.x.row(p * n + i).begin());
        std::copy(ys.row(i).begin(), ys.row(i).end(), samples.y.row(p * n + i).begin());
      }
    }
    const fs::path dir = prepare_out(doc);
    save_csv(samples, dir / "samples.csv");
    out << "sample: rows=" << samples.n() << " file=" << (dir / "samples.csv").string() << '\n';
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// eval

struct EvalCommand : Command {
  explicit EvalCommand(CLI::App& root) {
    app = root.add_subcommand("eval", "Evaluate a checkpoint against the true conditional law or a holdout CSV");
    defaults = {{"ckpt", nullptr},
                {"task", task_defaults()},
                {"holdout_csv", nullptr},
                {"holdout_n", 2000},
                {"xs", {{-1.0}, {0.0}, {1.0}}},
                {"n_gen", 1000},
                {"n_true", 1000},
                {"k", nullptr},
                {"bandwidth", "median"},
                {"seed", 0},
                {"threads", 1},
                {"out", "."}};
    shared_flags(*this, false);
    flag<std::string>(*this, "--ckpt", "/ckpt", "Checkpoint file")->required();
    task_flags(*this, "/task");
    flag<std::string>(*this, "--holdout", "/holdout_csv", "Holdout CSV");
    flag<std::size_t>(*this, "--holdout-n", "/holdout_n", "Synthetic holdout size");
    auto xs = std::make_shared<std::vector<double>>();
    CLI::Option* opt = app->add_option("--xs", *xs, "Conditioning grid for 1-D predictors, e.g. -1,0,1")
                           ->delimiter(',');
    overrides.push_back([opt, xs](json& doc) {
      if (opt->count() > 0) {
        json points = json::array();
        for (double v : *xs) {
          points.push_back({v});
        }
        doc["xs"] = points;
      }
    });
    flag<std::size_t>(*this, "--n-gen", "/n_gen", "Generator draws per conditioning point");
    flag<std::size_t>(*this, "--n-true", "/n_true", "Oracle draws per conditioning point");
    flag<std::size_t>(*this, "--k", "/k", "Neighbors for the holdout estimate");
    bandwidth_flag(*this, "/bandwidth", "Gaussian bandwidth or median");
  }

  int execute(std::ostream& out) const {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    json doc = resolve(*this);
    apply_threads(doc);
    const auto seed = get<std::uint64_t>(doc, "/seed");
    const fs::path ckpt_path = get<std::string>(doc, "/ckpt");
    const auto bytes = read_bytes(ckpt_path);
    const GeneratorNet net = load_checkpoint(bytes);
    const GeneratorNet untrained = init_generator(net.config);

    const bool has_task = is_set(doc, "/task/name");
    const bool has_holdout = is_set(doc, "/holdout_csv");
    if (!has_task && !has_holdout) {
      throw UsageError("eval needs --task or --holdout");
    }
    std::optional<ConditionalTask> task;
    if (has_task) {
      task = task_from(doc.at("task"));
    }

    Dataset holdout;
    if (has_holdout) {
      holdout = load_csv(get<std::string>(doc, "/holdout_csv"));
    } else {
      holdout = generate_task(*task, get<std::size_t>(doc, "/holdout_n"), derive_seed(seed, 3));
    }
    if (holdout.x.cols() != net.config.predictor_dim || holdout.y.cols() != net.config.response_dim) {
      throw std::runtime_error("holdout columns do not match the checkpoint dimensions");
    }

    KernelConfig kernel;
    const json& bw = doc.at("bandwidth");
    if (bw.is_number()) {
      kernel.bandwidth = bw.get<double>();
    } else if (bw == "median") {
      const Dataset reference = task ? generate_task(*task, 1000, derive_seed(seed, 7)) : holdout;
      std::vector<std::size_t> head(std::min<std::size_t>(reference.n(), 1000));
      std::iota(head.begin(), head.end(), std::size_t{0});
      kernel.bandwidth = median_heuristic_bandwidth(reference.y.gather_rows(head));
    } else {
      throw UsageError("--bandwidth must be a positive number or median");
    }
    checked([&] { kernel.validate(); });

    ReportInputs inputs;
    inputs.checkpoint_hash = fingerprint(bytes);
    inputs.task = task ? std::string(to_string(task->kind)) : "external";
    inputs.kernel = kernel;
    inputs.seed = seed;

    if (task) {
      inputs.n_gen = get<std::size_t>(doc, "/n_gen");
      inputs.n_true = get<std::size_t>(doc, "/n_true");
      const auto xs = doc.at("xs").get<std::vector<std::vector<double>>>();
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto point_seed = derive_seed(seed, 100 + i);
        ConditionalPoint point{xs[i], conditional_mmd_at(net, *task, xs[i], inputs.n_gen, inputs.n_true, kernel, point_seed),
                               conditional_mmd_at(untrained, *task, xs[i], inputs.n_gen, inputs.n_true, kernel, point_seed)};
        inputs.conditional.push_back(std::move(point));
      }
    }

    const std::size_t k = is_set(doc, "/k") ? get<std::size_t>(doc, "/k")
                                            : std::min(default_neighbors(holdout.n()), holdout.n() - 1);
    doc["k"] = k;
    HoldoutMetric metric;
    metric.n = holdout.n();
    metric.k = k;
    metric.ecmmd = ecmmd_on_holdout(net, holdout, kernel, k, derive_seed(seed, 4));
    metric.ecmmd_untrained = ecmmd_on_holdout(untrained, holdout, kernel, k, derive_seed(seed, 4));
    inputs.holdout = metric;
    doc["bandwidth"] = kernel.bandwidth;
    inputs.config = doc;
    inputs.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();

    const EvalReport report = build_report(std::move(inputs));
    const fs::path dir = prepare_out(doc);
    write_report(report, dir / "eval_report.json");

    out << "eval: task=" << report.task << " checkpoint=" << report.checkpoint_hash
        << " bandwidth=" << format_double(kernel.bandwidth);
    for (const auto& p : report.conditional) {
      out << " mmd2@x=" << format_double(p.x.front()) << ':' << format_double(p.mmd2) << "(untrained "
          << format_double(p.mmd2_untrained.value_or(0.0)) << ')';
    }
    out << " holdout_ecmmd=" << format_double(metric.ecmmd) << "(untrained "
        << format_double(metric.ecmmd_untrained.value_or(0.0)) << ")\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// estimate

struct EstimateCommand : Command {
  explicit EstimateCommand(CLI::App& root) {
    app = root.add_subcommand("estimate", "kNN ECMMD estimate between the y blocks of two CSVs sharing x");
    defaults = {{"a", nullptr},        {"b", nullptr},    {"k", nullptr}, {"kernel", "gaussian"},
                {"bandwidth", "median"}, {"discrete", false}, {"seed", 0},  {"threads", 1},
                {"out", "."}};
    shared_flags(*this, false);
    flag<std::string>(*this, "--a", "/a", "CSV with observed responses")->required();
    flag<std::string>(*this, "--b", "/b", "CSV with generated responses")->required();
    flag<std::size_t>(*this, "--k", "/k", "Neighbors per node");
    flag<std::string>(*this, "--kernel", "/kernel", "gaussian or laplace");
    bandwidth_flag(*this, "/bandwidth", "Kernel bandwidth or median");
    switch_flag(*this, "--discrete", "/discrete", "Group by exact integer x instead of kNN");
  }

  int execute(std::ostream& out) const {
    json doc = resolve(*this);
    apply_threads(doc);
    const Dataset a = load_csv(get<std::string>(doc, "/a"));
    const Dataset b = load_csv(get<std::string>(doc, "/b"));
    if (a.x != b.x) {
      throw std::runtime_error("x columns differ between the two files");
    }
    if (a.y.cols() != b.y.cols()) {
      throw std::runtime_error("y column counts differ between the two files");
    }
    if (a.n() == 0) {
      throw std::runtime_error("input files have no rows");
    }

    KernelConfig kernel;
    kernel.family = checked([&] { return kernel_family_from_string(get<std::string>(doc, "/kernel")); });
    const json& bw = doc.at("bandwidth");
    if (bw.is_number()) {
      kernel.bandwidth = bw.get<double>();
    } else if (bw == "median") {
      if (a.n() < 2) {
        throw UsageError("median bandwidth needs at least 2 rows; pass --bandwidth");
      }
      std::vector<std::size_t> head(std::min<std::size_t>(a.n(), 1000));
      std::iota(head.begin(), head.end(), std::size_t{0});
      kernel.bandwidth = median_heuristic_bandwidth(a.y.gather_rows(head));
    } else {
      throw UsageError("--bandwidth must be a positive number or median");
    }
    checked([&] { kernel.validate(); });
    doc["bandwidth"] = kernel.bandwidth;

    double value = 0.0;
    std::string estimator;
    if (get<bool>(doc, "/discrete")) {
      if (a.x.cols() != 1) {
        throw UsageError("--discrete needs a single integer x column");
      }
      std::vector<std::int64_t> labels(a.n());
      for (std::size_t i = 0; i < a.n(); ++i) {
        const double v = a.x(i, 0);
        if (v != std::trunc(v)) {
          throw std::runtime_error("--discrete: x value " + format_double(v) + " is not an integer");
        }
        labels[i] = static_cast<std::int64_t>(v);
      }
      value = ecmmd_hat_discrete(labels, a.y, b.y, kernel);
      estimator = "ecmmd_discrete";
    } else {
      if (a.n() < 2) {
        throw std::runtime_error("kNN estimate needs at least 2 rows");
      }
      const std::size_t k = is_set(doc, "/k") ? get<std::size_t>(doc, "/k")
                                              : std::min(default_neighbors(a.n()), a.n() - 1);
      doc["k"] = k;
      const KnnGraph graph = build_knn_graph(a.x, k);
      value = ecmmd_hat({graph, a.y, b.y, kernel});
      estimator = "ecmmd_knn";
    }

    const fs::path dir = prepare_out(doc);
    write_text(dir / "estimate.json",
               json{{"record", "estimate"}, {"estimator", estimator}, {"value", value}, {"n", a.n()}, {"config", doc}}
                       .dump(2) +
                   "\n");
    out << std::setprecision(17) << value << '\n';
    return kExitOk;
  }
};

void report_error(std::ostream& err, const char* kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional generators trained with a nearest-neighbor ECMMD objective", "cgmmd"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  TrainCommand train_cmd(app);
  SampleCommand sample_cmd(app);
  EvalCommand eval_cmd(app);
  EstimateCommand estimate_cmd(app);

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return kExitUsage;
  }

  try {
    if (train_cmd.app->parsed()) {
      return train_cmd.execute(out);
    }
    if (sample_cmd.app->parsed()) {
      return sample_cmd.execute(out);
    }
    if (eval_cmd.app->parsed()) {
      return eval_cmd.execute(out);
    }
    return estimate_cmd.execute(out);
  } catch (const UsageError& e) {
    report_error(err, "usage", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    report_error(err, "runtime", e.what());
    return kExitRuntime;
  }
}

}  // namespace cgmmd::cli
