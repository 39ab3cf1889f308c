#pragma once

#include <vector>

#include "cgmmd/knn_graph.hpp"
#include "cgmmd/matrix.hpp"
#include "oracles.hpp"

inline cgmmd::Matrix to_matrix(const oracle::Rows& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  cgmmd::Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

inline oracle::Rows to_rows(const cgmmd::Matrix& m) {
  oracle::Rows rows(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) rows[r][c] = m(r, c);
  }
  return rows;
}

inline std::vector<std::vector<std::size_t>> lists(const cgmmd::KnnGraph& g) {
  std::vector<std::vector<std::size_t>> out(g.n());
  for (std::size_t i = 0; i < g.n(); ++i) {
    auto nb = g.neighbors(i);
    out[i].assign(nb.begin(), nb.end());
  }
  return out;
}

#include "cgmmd/generator.hpp"

// Plain loops over the layer list; shares nothing with the library's forward pass.
inline oracle::Rows oracle_generate(const cgmmd::GeneratorNet& net, const oracle::Rows& eta, const oracle::Rows& x) {
  oracle::Rows out;
  for (std::size_t r = 0; r < x.size(); ++r) {
    std::vector<double> act = eta[r];
    act.insert(act.end(), x[r].begin(), x[r].end());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const auto& layer = net.layers[l];
      std::vector<double> next(layer.bias);
      for (std::size_t j = 0; j < next.size(); ++j) {
        for (std::size_t i = 0; i < act.size(); ++i) next[j] += act[i] * layer.weight(i, j);
      }
      const bool last = l + 1 == net.layers.size();
      for (auto& v : next) {
        if (!last) {
          v = v > 0.0 ? v : 0.0;
        } else if (net.config.output_activation == cgmmd::OutputActivation::sigmoid) {
          v = 1.0 / (1.0 + std::exp(-v));
        }
      }
      act = std::move(next);
    }
    out.push_back(act);
  }
  return out;
}

inline double oracle_loss(const cgmmd::GeneratorNet& net, const oracle::Rows& x, const oracle::Rows& y,
                          const oracle::Rows& eta, double h, std::size_t k) {
  return oracle::ecmmd(oracle::knn(x, k), y, oracle_generate(net, eta, x), h);
}

// central differences of oracle_loss over every weight then bias, layer by layer
inline std::vector<double> oracle_fd(const cgmmd::GeneratorNet& net, const oracle::Rows& x, const oracle::Rows& y,
                                     const oracle::Rows& eta, double h, std::size_t k, double step) {
  cgmmd::GeneratorNet probe = net;
  std::vector<double> g;
  auto central = [&](double& p) {
    const double saved = p;
    p = saved + step;
    const double up = oracle_loss(probe, x, y, eta, h, k);
    p = saved - step;
    const double down = oracle_loss(probe, x, y, eta, h, k);
    p = saved;
    return (up - down) / (2 * step);
  };
  for (auto& layer : probe.layers) {
    for (auto& w : layer.weight.storage()) g.push_back(central(w));
    for (auto& b : layer.bias) g.push_back(central(b));
  }
  return g;
}

// five-point central stencil, O(step^4)
inline std::vector<double> oracle_fd5(const cgmmd::GeneratorNet& net, const oracle::Rows& x, const oracle::Rows& y,
                                      const oracle::Rows& eta, double h, std::size_t k, double step) {
  cgmmd::GeneratorNet probe = net;
  std::vector<double> g;
  auto at = [&](double& p, double saved, double offset) {
    p = saved + offset;
    return oracle_loss(probe, x, y, eta, h, k);
  };
  auto stencil = [&](double& p) {
    const double saved = p;
    const double d = 8 * (at(p, saved, step) - at(p, saved, -step)) - (at(p, saved, 2 * step) - at(p, saved, -2 * step));
    p = saved;
    return d / (12 * step);
  };
  for (auto& layer : probe.layers) {
    for (auto& w : layer.weight.storage()) g.push_back(stencil(w));
    for (auto& b : layer.bias) g.push_back(stencil(b));
  }
  return g;
}

inline std::vector<double> flatten(const cgmmd::ParameterSet& params) {
  std::vector<double> out;
  for (const auto& layer : params) {
    out.insert(out.end(), layer.weight.data().begin(), layer.weight.data().end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  }
  return out;
}

inline double max_rel_error(const std::vector<double>& got, const std::vector<double>& ref) {
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    worst = std::max(worst, std::abs(got[i] - ref[i]) / (std::abs(ref[i]) + 1e-8));
  }
  return worst;
}

struct GradFixture {
  cgmmd::GeneratorNet net;
  oracle::Rows x, y, eta;
  double h = 1.0;
  std::size_t k = 3;
};

// random 2-hidden-layer net and a batch of 8 rows
inline GradFixture make_grad_fixture(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  GradFixture f;
  cgmmd::GeneratorConfig cfg;
  cfg.predictor_dim = 1 + seed % 2;
  cfg.noise_dim = 1 + seed % 3;
  cfg.response_dim = 1 + (seed / 2) % 2;
  cfg.hidden = {4 + seed % 3, 3 + seed % 4};
  cfg.output_activation = seed % 5 == 0 ? cgmmd::OutputActivation::sigmoid : cgmmd::OutputActivation::linear;
  cfg.seed = seed * 7919 + 1;
  f.net = cgmmd::init_generator(cfg);
  std::normal_distribution<double> nd(0.0, 0.1);
  for (auto& layer : f.net.layers) {
    for (auto& b : layer.bias) b = nd(gen);
  }
  f.x = oracle::random_rows(gen, 8, cfg.predictor_dim);
  f.y = oracle::random_rows(gen, 8, cfg.response_dim);
  f.eta = oracle::random_rows(gen, 8, cfg.noise_dim);
  f.h = std::uniform_real_distribution<double>(0.5, 2.0)(gen);
  f.k = 1 + seed % 4;
  return f;
}
