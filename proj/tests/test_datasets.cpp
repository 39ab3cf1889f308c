#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "cgmmd/datasets.hpp"
#include "cgmmd/errors.hpp"
#include "cgmmd/random.hpp"
#include "helpers.hpp"

using namespace cgmmd;
using doctest::Approx;

namespace {

// mean and standard error of a sample
std::pair<double, double> mean_se(const std::vector<double>& v) {
  double s = 0, s2 = 0;
  for (double a : v) {
    s += a;
    s2 += a * a;
  }
  const double n = static_cast<double>(v.size());
  const double m = s / n;
  return {m, std::sqrt((s2 / n - m * m) / (n - 1))};
}

}  // namespace

TEST_SUITE("datasets") {

TEST_CASE("helix and circle responses") {
  const double pi = std::numbers::pi;
  const auto h = helix_response(1.0, pi / 2, 0, 0);
  CHECK(h[0] == Approx(2.0).epsilon(1e-15));
  CHECK(h[1] == Approx(2.0 - pi / 2).epsilon(1e-15));
  CHECK(h[1] == Approx(0.42920367320510344).epsilon(1e-14));
  const auto h0 = helix_response(-0.7, 0.0, 0, 0);
  CHECK(h0[0] == -1.4);
  CHECK(h0[1] == -1.4);
  const auto c = circle_response(0.0, pi / 2, 0, 0);
  CHECK(c[0] == Approx(3.0).epsilon(1e-15));
  CHECK(std::abs(c[1]) < 1e-15);
}

TEST_CASE("sigma = 0 structural identities hold row by row") {
  const Dataset circle = gen_circle(2000, 0.0, 1);
  for (std::size_t i = 0; i < circle.n(); ++i) {
    const double a = circle.y(i, 0) - circle.x(i, 0), b = circle.y(i, 1) - circle.x(i, 0);
    CHECK(a * a + b * b == Approx(9.0).epsilon(1e-12));
  }
  const Dataset helix = gen_helix(2000, 0.0, 2);
  for (std::size_t i = 0; i < helix.n(); ++i) {
    const double a = helix.y(i, 0) - 2 * helix.x(i, 0), b = helix.y(i, 1) - 2 * helix.x(i, 0);
    const double u = std::sqrt(a * a + b * b);  // radius of (u sin 2u, u cos 2u) is u
    CHECK(a == Approx(u * std::sin(2 * u)).scale(1.0).epsilon(1e-9));
    CHECK(b == Approx(u * std::cos(2 * u)).scale(1.0).epsilon(1e-9));
  }
  const ConditionalTask t{TaskKind::helix, 0.0};
  const double x0 = 0.8;
  const Matrix s = true_conditional_sample(t, std::span(&x0, 1), 500, 3);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const double a = s(i, 0) - 1.6, b = s(i, 1) - 1.6, u = std::sqrt(a * a + b * b);
    CHECK(a == Approx(u * std::sin(2 * u)).scale(1.0).epsilon(1e-9));
  }
  const ConditionalTask ct{TaskKind::circle, 0.0};
  const Matrix cs = true_conditional_sample(ct, std::span(&x0, 1), 500, 4);
  for (std::size_t i = 0; i < cs.rows(); ++i) {
    const double a = cs(i, 0) - x0, b = cs(i, 1) - x0;
    CHECK(a * a + b * b == Approx(9.0).epsilon(1e-12));
  }
}

TEST_CASE("circle with noise: mean squared radius about the centre is 9 + 2 sigma^2") {
  const double sigma = 0.2;
  const Dataset d = gen_circle(200000, sigma, 5);
  std::vector<double> r2;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const double a = d.y(i, 0) - d.x(i, 0), b = d.y(i, 1) - d.x(i, 0);
    r2.push_back(a * a + b * b);
  }
  const auto [m, se] = mean_se(r2);
  CHECK(std::abs(m - (9.0 + 2 * sigma * sigma)) < 3 * se);
}

TEST_CASE("helix: E[Y1 - 2X] = E[U sin 2U] by quadrature") {
  const double two_pi = 2 * std::numbers::pi;
  const double expect = oracle::simpson([](double u) { return u * std::sin(2 * u); }, 0.0, two_pi, 2000) / two_pi;
  CHECK(expect == Approx(-0.5).epsilon(1e-9));
  const Dataset d = gen_helix(200000, 0.2, 6);
  std::vector<double> v;
  for (std::size_t i = 0; i < d.n(); ++i) v.push_back(d.y(i, 0) - 2 * d.x(i, 0));
  const auto [m, se] = mean_se(v);
  CHECK(std::abs(m - expect) < 3 * se);
}

TEST_CASE("linear gaussian") {
  const Dataset d = gen_linear_gaussian(200000, 1.5, -0.5, 0.7, 7);
  CHECK(d.y.cols() == 1);
  for (double x0 : {-1.0, 0.0, 0.8}) {
    std::vector<double> bin;
    for (std::size_t i = 0; i < d.n(); ++i) {
      if (std::abs(d.x(i, 0) - x0) < 0.05) bin.push_back(d.y(i, 0));
    }
    const auto [m, se] = mean_se(bin);
    CHECK(std::abs(m - (1.5 * x0 - 0.5)) < 3 * se + 0.01);
  }
  const ConditionalTask t{TaskKind::linear_gaussian, 0.0, 1.5, -0.5, 0.7};
  const double x0 = 0.3;
  const std::size_t n = 50000;
  const Matrix s = true_conditional_sample(t, std::span(&x0, 1), n, 8);
  double sum = 0;
  for (double v : s.data()) sum += v;
  CHECK(std::abs(sum / n - (1.5 * x0 - 0.5)) < 3 * 0.7 / std::sqrt(static_cast<double>(n)));

  // a = 0: Y independent of X
  const Dataset flat = gen_linear_gaussian(100000, 0.0, 0.0, 1.0, 9);
  double sxy = 0;
  for (std::size_t i = 0; i < flat.n(); ++i) sxy += flat.x(i, 0) * flat.y(i, 0);
  CHECK(std::abs(sxy / flat.n()) < 3.0 / std::sqrt(100000.0));
}

TEST_CASE("seeded and pure") {
  CHECK(gen_helix(100, 0.2, 1).y == gen_helix(100, 0.2, 1).y);
  CHECK(gen_helix(100, 0.2, 1).x == gen_helix(100, 0.2, 1).x);
  CHECK_FALSE(gen_helix(100, 0.2, 1).y == gen_helix(100, 0.2, 2).y);
  // X is the first draw of every row, so x does not depend on the task
  CHECK(gen_helix(50, 0.2, 4).x.row(0)[0] == Rng(4).normal());
  CHECK(gen_helix(10, 0.2, 3).meta.task == "helix");
}

TEST_CASE("task validation") {
  CHECK_THROWS_AS((ConditionalTask{TaskKind::helix, -0.1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((ConditionalTask{TaskKind::linear_gaussian, 0, 1, 0, 0}.validate()), std::invalid_argument);
  CHECK(task_kind_from_string("circle") == TaskKind::circle);
  CHECK(to_string(TaskKind::linear_gaussian) == "linear_gaussian");
  CHECK_THROWS_AS(task_kind_from_string("spiral"), std::invalid_argument);
  const double xs[2] = {0, 1};
  CHECK_THROWS_AS(true_conditional_sample({TaskKind::helix, 0.1}, std::span(xs, 2), 3, 1), std::invalid_argument);
}

TEST_CASE("csv round trip") {
  Dataset d = gen_helix(300, 0.2, 10);
  d.y(0, 0) = 1e-300;
  d.y(1, 1) = -0.1;
  d.x(2, 0) = 123456789.123456789;
  std::stringstream ss;
  write_csv(d, ss);
  const std::string text = ss.str();
  CHECK(text.rfind("x0,y0,y1\n", 0) == 0);
  const Dataset back = read_csv(ss);
  CHECK(back.x == d.x);
  CHECK(back.y == d.y);

  const auto dir = oracle::scratch_dir("csv");
  Dataset one{Matrix::from_rows({{0.5, -2}}), Matrix::from_rows({{3.25}}), {}};
  save_csv(one, dir / "one.csv");
  const Dataset one_back = load_csv(dir / "one.csv");
  CHECK(one_back.x == one.x);
  CHECK(one_back.y == one.y);

  std::stringstream crlf("x0,y0\r\n1,2\r\n\r\n3,4\r\n");
  const Dataset c = read_csv(crlf);
  CHECK(c.n() == 2);
  CHECK(c.y(1, 0) == 4.0);

  std::stringstream header_only("x0,y0,y1\n");
  CHECK(read_csv(header_only).n() == 0);
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.0) == "-2");
}

TEST_CASE("csv errors carry line numbers") {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::stringstream ss(text);
    try {
      read_csv(ss);
    } catch (const CsvError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("") == 1);
  CHECK(line_of("x0,x1\n1,2\n") == 1);         // missing y columns
  CHECK(line_of("y0,x0\n1,2\n") == 1);
  CHECK(line_of("x0,y1\n1,2\n") == 1);
  CHECK(line_of("x0,y0\n1,2\n3\n") == 3);
  CHECK(line_of("x0,y0\n1,2\n3,abc\n") == 3);
  CHECK(line_of("x0,y0\n1,nan\n") == 2);
  CHECK(line_of("x0,y0\n1,2,3\n") == 2);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), std::runtime_error);
  try {
    std::stringstream bad("x0,y0\n1,\n");
    read_csv(bad);
  } catch (const CsvError& e) {
    CHECK(std::string(e.what()).rfind("line 2: ", 0) == 0);
  }
}

TEST_CASE("dataset validation") {
  Dataset d{Matrix(3, 1), Matrix(2, 1), {}};
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  Dataset e{Matrix(2, 1), Matrix(2, 1), {}};
  e.y(0, 0) = std::nan("");
  CHECK_THROWS_AS(e.validate(), std::invalid_argument);
}

}
