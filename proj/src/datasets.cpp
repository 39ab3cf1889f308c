#include "cgmmd/datasets.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "cgmmd/errors.hpp"
#include "cgmmd/random.hpp"

namespace cgmmd {

std::string_view to_string(TaskKind kind) noexcept {
  switch (kind) {
    case TaskKind::helix: return "helix";
    case TaskKind::circle: return "circle";
    case TaskKind::linear_gaussian: return "linear_gaussian";
  }
  return "unknown";
}

TaskKind task_kind_from_string(std::string_view name) {
  for (TaskKind kind : {TaskKind::helix, TaskKind::circle, TaskKind::linear_gaussian}) {
    if (name == to_string(kind)) {
      return kind;
    }
  }
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

void ConditionalTask::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("task sigma must be finite and >= 0");
  }
  if (kind == TaskKind::linear_gaussian && (!(cond_std > 0.0) || !std::isfinite(cond_std))) {
    throw std::invalid_argument("linear_gaussian conditional std must be positive");
  }
  if (!std::isfinite(slope) || !std::isfinite(intercept)) {
    throw std::invalid_argument("linear_gaussian slope/intercept must be finite");
  }
}

void Dataset::validate() const {
  if (x.rows() != y.rows()) {
    throw std::invalid_argument("dataset: x and y row counts differ");
  }
  if (x.cols() == 0 || y.cols() == 0) {
    throw std::invalid_argument("dataset: x and y need at least one column");
  }
  if (!x.all_finite() || !y.all_finite()) {
    throw std::invalid_argument("dataset: non-finite entries");
  }
}

std::array<double, 2> helix_response(double x, double u, double e1, double e2) noexcept {
  return {2.0 * x + u * std::sin(2.0 * u) + e1, 2.0 * x + u * std::cos(2.0 * u) + e2};
}

std::array<double, 2> circle_response(double x, double u, double e1, double e2) noexcept {
  return {x + 3.0 * std::sin(u) + e1, x + 3.0 * std::cos(u) + e2};
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void draw_response(const ConditionalTask& task, double x, Rng& rng, std::span<double> out) {
  if (task.kind == TaskKind::linear_gaussian) {
    out[0] = task.slope * x + task.intercept + task.cond_std * rng.normal();
    return;
  }
  const double u = rng.uniform(0.0, kTwoPi);
  const double e1 = task.sigma * rng.normal();
  const double e2 = task.sigma * rng.normal();
  const auto y = task.kind == TaskKind::helix ? helix_response(x, u, e1, e2) : circle_response(x, u, e1, e2);
  out[0] = y[0];
  out[1] = y[1];
}

}  // namespace

Dataset generate_task(const ConditionalTask& task, std::size_t n, std::uint64_t seed) {
  task.validate();
  Dataset data{Matrix(n, task.x_dim()), Matrix(n, task.y_dim()),
               DatasetMeta{std::string(to_string(task.kind)), task.sigma, seed}};
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    data.x(i, 0) = x;
    draw_response(task, x, rng, data.y.row(i));
  }
  return data;
}

Dataset gen_helix(std::size_t n, double sigma, std::uint64_t seed) {
  return generate_task({TaskKind::helix, sigma}, n, seed);
}

Dataset gen_circle(std::size_t n, double sigma, std::uint64_t seed) {
  return generate_task({TaskKind::circle, sigma}, n, seed);
}

Dataset gen_linear_gaussian(std::size_t n, double slope, double intercept, double cond_std, std::uint64_t seed) {
  ConditionalTask task{TaskKind::linear_gaussian};
  task.slope = slope;
  task.intercept = intercept;
  task.cond_std = cond_std;
  return generate_task(task, n, seed);
}

Matrix true_conditional_sample(const ConditionalTask& task, std::span<const double> x, std::size_t n,
                               std::uint64_t seed) {
  task.validate();
  if (x.size() != task.x_dim()) {
    throw std::invalid_argument("true_conditional_sample: predictor has wrong dimension");
  }
  Matrix out(n, task.y_dim());
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    draw_response(task, x[0], rng, out.row(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

// Parses the trailing index of "x12"; -1 if the cell is not prefix + digits.
long column_index(std::string_view cell, char prefix) {
  if (cell.size() < 2 || cell[0] != prefix) {
    return -1;
  }
  long value = 0;
  const auto res = std::from_chars(cell.data() + 1, cell.data() + cell.size(), value);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    return -1;
  }
  return value;
}

}  // namespace

Dataset read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) {
    throw CsvError(line_no, "missing header");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  const auto header = split_commas(line);
  std::size_t d = 0;
  std::size_t p = 0;
  for (const auto cell : header) {
    if (p == 0 && column_index(cell, 'x') == static_cast<long>(d)) {
      ++d;
    } else if (column_index(cell, 'y') == static_cast<long>(p)) {
      ++p;
    } else {
      throw CsvError(line_no, "malformed header: expected x0..x{d-1},y0..y{p-1}, got '" + std::string(cell) + "'");
    }
  }
  if (d == 0) {
    throw CsvError(line_no, "header has no x columns");
  }
  if (p == 0) {
    throw CsvError(line_no, "header has no y columns");
  }

  std::vector<double> xs;
  std::vector<double> ys;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const auto cells = split_commas(line);
    if (cells.size() != d + p) {
      throw CsvError(line_no, "expected " + std::to_string(d + p) + " cells, got " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const auto cell = cells[c];
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw CsvError(line_no, "non-numeric cell '" + std::string(cell) + "' in column " + std::to_string(c));
      }
      (c < d ? xs : ys).push_back(v);
    }
  }
  const std::size_t n = xs.size() / d;
  return Dataset{Matrix(n, d, std::move(xs)), Matrix(n, p, std::move(ys)), DatasetMeta{}};
}

void write_csv(const Dataset& data, std::ostream& out) {
  data.validate();
  std::string buffer;
  for (std::size_t c = 0; c < data.x.cols(); ++c) {
    buffer += (c ? ",x" : "x") + std::to_string(c);
  }
  for (std::size_t c = 0; c < data.y.cols(); ++c) {
    buffer += ",y" + std::to_string(c);
  }
  buffer += '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t c = 0; c < data.x.cols(); ++c) {
      if (c) {
        buffer += ',';
      }
      buffer += format_double(data.x(i, c));
    }
    for (std::size_t c = 0; c < data.y.cols(); ++c) {
      buffer += ',';
      buffer += format_double(data.y(i, c));
    }
    buffer += '\n';
  }
  out << buffer;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path.string() + "'");
  }
  return read_csv(in);
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  write_csv(data, out);
}

}  // namespace cgmmd
