#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "cgmmd/datasets.hpp"
#include "cgmmd/ecmmd.hpp"
#include "cgmmd/parallel.hpp"
#include "cgmmd/random.hpp"
#include "helpers.hpp"

using namespace cgmmd;
using doctest::Approx;

namespace {

const double kHand = 2.0 - 2.0 * 0.60653065971263342;  // 0.7869387...
const KernelConfig kUnit{KernelFamily::gaussian, 1.0};

struct Fixture {
  oracle::Rows x, y, z;
  std::size_t k;
};

Fixture random_fixture(std::mt19937_64& gen, std::size_t n, std::size_t d, std::size_t p, std::size_t k) {
  return {oracle::random_rows(gen, n, d), oracle::random_rows(gen, n, p), oracle::random_rows(gen, n, p), k};
}

// E_X[ MMD^2(N(aX+b, s^2), N(cX+e, t^2)) ] for X ~ N(0,1) by Simpson on [-10, 10]
double population_ecmmd(double a, double b, double s, double c, double e, double t, double h) {
  const auto f = [&](double x) {
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    const double m1 = a * x + b, m2 = c * x + e;
    const double k11 = h / std::sqrt(h * h + 2 * s * s);
    const double k22 = h / std::sqrt(h * h + 2 * t * t);
    const double v = h * h + s * s + t * t;
    const double k12 = h / std::sqrt(v) * std::exp(-(m1 - m2) * (m1 - m2) / (2 * v));
    return phi * (k11 + k22 - 2 * k12);
  };
  return oracle::simpson(f, -10.0, 10.0, 4000);
}

}  // namespace

TEST_SUITE("ecmmd") {

TEST_CASE("n=2 hand example") {
  const Matrix x = Matrix::from_rows({{0}, {1}});
  const Matrix y = Matrix::from_rows({{0}, {0}});
  const Matrix z = Matrix::from_rows({{1}, {1}});
  const auto g = build_knn_graph(x, 1);
  CHECK(std::abs(ecmmd_hat({g, y, z, kUnit}) - kHand) < 1e-12);
}

TEST_CASE("z = y gives exactly zero") {
  std::mt19937_64 gen(1);
  for (int t = 0; t < 50; ++t) {
    const auto f = random_fixture(gen, 2 + gen() % 80, 1 + t % 3, 1 + t % 4, 1);
    const std::size_t k = 1 + gen() % (f.x.size() - 1);
    const auto g = build_knn_graph(to_matrix(f.x), k);
    const Matrix y = to_matrix(f.y);
    const KernelConfig kern{t % 2 ? KernelFamily::laplace : KernelFamily::gaussian, 0.2 + 0.1 * t};
    CHECK(ecmmd_hat({g, y, y, kern}) == 0.0);
  }
}

TEST_CASE("matches the naive double sum") {
  std::mt19937_64 gen(2);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 3 + gen() % 120;
    const auto f = random_fixture(gen, n, 2, 2, 1 + gen() % 5);
    const std::size_t k = std::min(f.k, n - 1);
    const auto g = build_knn_graph(to_matrix(f.x), k);
    const double h = 0.5 + 0.1 * t;
    const double got = ecmmd_hat({g, to_matrix(f.y), to_matrix(f.z), {KernelFamily::gaussian, h}});
    CHECK(got == Approx(oracle::ecmmd(oracle::knn(f.x, k), f.y, f.z, h)).epsilon(1e-12));
  }
}

TEST_CASE("permutation equivariance") {
  std::mt19937_64 gen(3);
  const std::size_t n = 200, k = 6;
  const auto f = random_fixture(gen, n, 2, 2, k);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), gen);
  oracle::Rows px, py, pz;
  for (auto i : perm) {
    px.push_back(f.x[i]);
    py.push_back(f.y[i]);
    pz.push_back(f.z[i]);
  }
  const auto g1 = build_knn_graph(to_matrix(f.x), k);
  const auto g2 = build_knn_graph(to_matrix(px), k);
  const double a = ecmmd_hat({g1, to_matrix(f.y), to_matrix(f.z), kUnit});
  const double b = ecmmd_hat({g2, to_matrix(py), to_matrix(pz), kUnit});
  CHECK(a == Approx(b).epsilon(1e-12));
}

TEST_CASE("bitwise stable across thread counts") {
  std::mt19937_64 gen(4);
  const auto f = random_fixture(gen, 2000, 1, 2, 8);
  const auto g = build_knn_graph(to_matrix(f.x), 8);
  const Matrix y = to_matrix(f.y), z = to_matrix(f.z);
  set_thread_count(1);
  const double a = ecmmd_hat({g, y, z, kUnit});
  set_thread_count(4);
  const double b = ecmmd_hat({g, y, z, kUnit});
  set_thread_count(1);
  CHECK(a == b);
}

TEST_CASE("shape errors") {
  const auto g = build_knn_graph(Matrix::from_rows({{0}, {1}}), 1);
  const Matrix y = Matrix::from_rows({{0}, {0}});
  CHECK_THROWS_AS(ecmmd_hat({g, y, Matrix::from_rows({{0, 1}, {1, 1}}), kUnit}), std::invalid_argument);
  CHECK_THROWS_AS(ecmmd_hat({g, Matrix::from_rows({{0}, {0}, {0}}), Matrix::from_rows({{0}, {0}, {0}}), kUnit}),
                  std::invalid_argument);
  CHECK_THROWS_AS(ecmmd_hat({g, y, y, {KernelFamily::gaussian, 0.0}}), std::invalid_argument);
}

TEST_CASE("derandomized variant") {
  const Matrix x = Matrix::from_rows({{0}, {1}});
  const Matrix y = Matrix::from_rows({{0}, {0}});
  const auto g = build_knn_graph(x, 1);
  const std::vector<Matrix> draws{Matrix::from_rows({{1}, {1}}), Matrix::from_rows({{0}, {0}})};
  CHECK(ecmmd_hat_derandomized(g, y, draws, kUnit) == Approx(kHand / 2.0).epsilon(1e-12));

  std::mt19937_64 gen(5);
  for (int t = 0; t < 20; ++t) {
    const auto f = random_fixture(gen, 50, 2, 2, 4);
    const auto gg = build_knn_graph(to_matrix(f.x), 4);
    const Matrix yy = to_matrix(f.y), zz = to_matrix(f.z);
    const std::vector<Matrix> one{zz};
    CHECK(ecmmd_hat_derandomized(gg, yy, one, kUnit) == ecmmd_hat({gg, yy, zz, kUnit}));
    const std::vector<Matrix> same{zz, zz, zz};
    CHECK(ecmmd_hat_derandomized(gg, yy, same, kUnit) == Approx(ecmmd_hat({gg, yy, zz, kUnit})).epsilon(1e-13));
  }
  CHECK_THROWS_AS(ecmmd_hat_derandomized(g, y, std::span<const Matrix>{}, kUnit), std::invalid_argument);
}

TEST_CASE("discrete variant") {
  std::mt19937_64 gen(6);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + gen() % 40;
    const auto y = oracle::random_rows(gen, n, 2), z = oracle::random_rows(gen, n, 2);
    const std::vector<std::int64_t> shared(n, 3);
    const double got = ecmmd_hat_discrete(shared, to_matrix(y), to_matrix(z), kUnit);
    CHECK(std::abs(got - mmd2_vstat(kUnit, to_matrix(y), to_matrix(z))) < 1e-12);
    CHECK(std::abs(got - oracle::vstat(y, z, 1.0)) < 1e-12);
    CHECK(ecmmd_hat_discrete(shared, to_matrix(y), to_matrix(y), kUnit) == 0.0);
  }
  // two singleton groups: (1/n) sum_i H(W_i, W_i) = (1/n) sum_i (2 - 2 K(y_i, z_i))
  const Matrix y = Matrix::from_rows({{0.0}, {5.0}}), z = Matrix::from_rows({{1.0}, {5.5}});
  const std::vector<std::int64_t> labels{0, 1};
  const double expect = 0.5 * ((2 - 2 * std::exp(-0.5)) + (2 - 2 * std::exp(-0.125)));
  CHECK(ecmmd_hat_discrete(labels, y, z, kUnit) == Approx(expect).epsilon(1e-14));
  CHECK_THROWS_AS(ecmmd_hat_discrete(std::vector<std::int64_t>{0}, y, z, kUnit), std::invalid_argument);
}

TEST_CASE("mmd2_vstat") {
  CHECK(mmd2_vstat(kUnit, Matrix::from_rows({{0}}), Matrix::from_rows({{1}})) == Approx(kHand).epsilon(1e-14));
  std::mt19937_64 gen(7);
  for (int t = 0; t < 100; ++t) {
    const auto a = oracle::random_rows(gen, 1 + gen() % 20, 2), b = oracle::random_rows(gen, 1 + gen() % 20, 2);
    CHECK(mmd2_vstat(kUnit, to_matrix(a), to_matrix(a)) == 0.0);
    const double v = mmd2_vstat(kUnit, to_matrix(a), to_matrix(b));
    CHECK(v >= 0.0);
    CHECK(v == Approx(std::max(0.0, oracle::vstat(a, b, 1.0))).epsilon(1e-10));
  }
}

TEST_CASE("analytic gaussian MMD") {
  CHECK(mmd2_gaussian_analytic(0.3, 1.2, 0.3, 1.2, 0.7) == 0.0);
  CHECK(mmd2_gaussian_analytic(0, 1, 1, 2, 1) == Approx(mmd2_gaussian_analytic(1, 2, 0, 1, 1)).epsilon(1e-15));
  CHECK(mmd2_gaussian_analytic(0, 1, 1, 2, 1) > 0.0);

  // E K(A, B) by 2-D Simpson over the product density
  const auto expected_kernel = [](double ma, double sa, double mb, double sb, double h) {
    const auto pdf = [](double v, double m, double s) {
      return std::exp(-0.5 * (v - m) * (v - m) / (s * s)) / (s * std::sqrt(2 * M_PI));
    };
    return oracle::simpson(
        [&](double a) {
          return pdf(a, ma, sa) * oracle::simpson(
                                      [&](double b) { return pdf(b, mb, sb) * std::exp(-(a - b) * (a - b) / (2 * h * h)); },
                                      mb - 10 * sb, mb + 10 * sb, 400);
        },
        ma - 10 * sa, ma + 10 * sa, 400);
  };
  const double quad = expected_kernel(0, 1, 0, 1, 1) + expected_kernel(1, 1, 1, 1, 1) - 2 * expected_kernel(0, 1, 1, 1, 1);
  CHECK(std::abs(mmd2_gaussian_analytic(0, 1, 1, 1, 1) - quad) < 1e-6);
  CHECK_THROWS_AS(mmd2_gaussian_analytic(0, 0, 1, 1, 1), std::invalid_argument);
}

TEST_CASE("Monte-Carlo oracle") {
  ConditionalTask y_law{TaskKind::linear_gaussian, 0.0, 1.0, 0.0, 1.0};
  ConditionalTask z_law = y_law;
  z_law.intercept = 0.5;

  const auto same = ecmmd_mc_oracle(y_law, y_law, kUnit, 20000, 1);
  CHECK(std::abs(same.mean) < 3 * same.standard_error);

  const auto shifted = ecmmd_mc_oracle(y_law, z_law, kUnit, 20000, 2);
  const double truth = mmd2_gaussian_analytic(0, 1, 0.5, 1, 1);
  CHECK(std::abs(shifted.mean - truth) < 3 * shifted.standard_error);
  CHECK(truth == Approx(population_ecmmd(1, 0, 1, 1, 0.5, 1, 1)).epsilon(1e-10));

  // slope mismatch: truth depends on X, integrate by quadrature
  ConditionalTask tilted = y_law;
  tilted.slope = 1.5;
  const auto tilt = ecmmd_mc_oracle(y_law, tilted, kUnit, 20000, 3);
  CHECK(std::abs(tilt.mean - population_ecmmd(1, 0, 1, 1.5, 0, 1, 1)) < 3 * tilt.standard_error);

  const auto half = ecmmd_mc_oracle(y_law, z_law, kUnit, 10000, 4);
  const auto full = ecmmd_mc_oracle(y_law, z_law, kUnit, 40000, 4);
  CHECK(full.standard_error / half.standard_error == Approx(0.5).epsilon(0.1));
  CHECK(ecmmd_mc_oracle(y_law, z_law, kUnit, 100, 9).mean == ecmmd_mc_oracle(y_law, z_law, kUnit, 100, 9).mean);
  CHECK_THROWS_AS(ecmmd_mc_oracle(y_law, z_law, kUnit, 0, 1), std::invalid_argument);
}

TEST_CASE("consistency sweep: error shrinks with n") {
  ConditionalTask y_law{TaskKind::linear_gaussian, 0.0, 1.0, 0.0, 1.0};
  ConditionalTask z_law = y_law;
  z_law.intercept = 0.5;
  const double truth = mmd2_gaussian_analytic(0, 1, 0.5, 1, 1);
  std::vector<double> mean_err;
  for (std::size_t n : {256, 1024, 4096}) {
    const auto k = static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(n))));
    double err = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Dataset d = generate_task(y_law, n, derive_seed(seed, n));
      Matrix z(n, 1);
      Rng rng(derive_seed(seed, n + 1));
      for (std::size_t i = 0; i < n; ++i) z(i, 0) = d.x(i, 0) + 0.5 + rng.normal();
      const auto g = build_knn_graph(d.x, k);
      err += std::abs(ecmmd_hat({g, d.y, z, kUnit}) - truth);
    }
    mean_err.push_back(err / 10.0);
  }
  MESSAGE("mean abs error at n=256,1024,4096: " << mean_err[0] << " " << mean_err[1] << " " << mean_err[2]);
  CHECK(mean_err[1] < mean_err[0]);
  CHECK(mean_err[2] < mean_err[1]);
}

}
