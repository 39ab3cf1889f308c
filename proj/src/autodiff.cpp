#include "cgmmd/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "cgmmd/ecmmd.hpp"
#include "cgmmd/errors.hpp"

namespace cgmmd::ad {

NodeId Tape::push(Node node) {
  if (consumed_) {
    throw std::logic_error("tape already consumed by backward()");
  }
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id >= nodes_.size()) {
    throw std::out_of_range("tape node id out of range");
  }
  return nodes_[id];
}

NodeId Tape::parameter(Tensor value) {
  const NodeId id = push({Op::parameter, 0, 0, 0.0, true, std::move(value), {}});
  parameters_.push_back(id);
  return id;
}

NodeId Tape::constant(Tensor value) {
  return push({Op::constant, 0, 0, 0.0, false, std::move(value), {}});
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  if (va.cols() != vb.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ");
  }
  Tensor out(va.rows(), vb.cols());
  for (std::size_t i = 0; i < va.rows(); ++i) {
    for (std::size_t k = 0; k < va.cols(); ++k) {
      const double aik = va(i, k);
      for (std::size_t j = 0; j < vb.cols(); ++j) {
        out(i, j) += aik * vb(k, j);
      }
    }
  }
  return push({Op::matmul, a, b, 0.0, node(a).requires_grad || node(b).requires_grad, std::move(out), {}});
}

NodeId Tape::add_bias(NodeId a, NodeId bias) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(bias).value;
  if (vb.rows() != 1 || vb.cols() != va.cols()) {
    throw std::invalid_argument("add_bias: bias must be 1×cols");
  }
  Tensor out = va;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      out(i, j) += vb(0, j);
    }
  }
  return push({Op::add_bias, a, bias, 0.0, node(a).requires_grad || node(bias).requires_grad, std::move(out), {}});
}

NodeId Tape::relu(NodeId a) {
  Tensor out = node(a).value;
  for (double& v : out.data()) {
    v = v > 0.0 ? v : 0.0;
  }
  return push({Op::relu, a, 0, 0.0, node(a).requires_grad, std::move(out), {}});
}

NodeId Tape::sigmoid(NodeId a) {
  Tensor out = node(a).value;
  for (double& v : out.data()) {
    v = 1.0 / (1.0 + std::exp(-v));
  }
  return push({Op::sigmoid, a, 0, 0.0, node(a).requires_grad, std::move(out), {}});
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
  Tensor out = concat_columns(node(a).value, node(b).value);
  return push({Op::concat, a, b, 0.0, node(a).requires_grad || node(b).requires_grad, std::move(out), {}});
}

NodeId Tape::pair_sq_dist(NodeId a, NodeId b, std::vector<IndexPair> pairs) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  if (va.cols() != vb.cols()) {
    throw std::invalid_argument("pair_sq_dist: column counts differ");
  }
  Tensor out(pairs.size(), 1);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    if (i >= va.rows() || j >= vb.rows()) {
      throw std::out_of_range("pair_sq_dist: row index out of range");
    }
    out(p, 0) = squared_distance(va.row(i).data(), vb.row(j).data(), va.cols());
  }
  return push({Op::pair_sq_dist, a, b, 0.0, node(a).requires_grad || node(b).requires_grad, std::move(out),
               std::move(pairs)});
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) {
    throw std::invalid_argument("add: shapes differ");
  }
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] += vb.data()[i];
  }
  return push({Op::add, a, b, 0.0, node(a).requires_grad || node(b).requires_grad, std::move(out), {}});
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) {
    throw std::invalid_argument("sub: shapes differ");
  }
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] -= vb.data()[i];
  }
  return push({Op::sub, a, b, 0.0, node(a).requires_grad || node(b).requires_grad, std::move(out), {}});
}

NodeId Tape::scale(NodeId a, double factor) {
  Tensor out = node(a).value;
  for (double& v : out.data()) {
    v *= factor;
  }
  return push({Op::scale, a, 0, factor, node(a).requires_grad, std::move(out), {}});
}

NodeId Tape::exp(NodeId a) {
  Tensor out = node(a).value;
  for (double& v : out.data()) {
    v = std::exp(v);
  }
  return push({Op::exp, a, 0, 0.0, node(a).requires_grad, std::move(out), {}});
}

NodeId Tape::sum(NodeId a) {
  double total = 0.0;
  for (double v : node(a).value.data()) {
    total += v;
  }
  return push({Op::sum, a, 0, 0.0, node(a).requires_grad, Tensor(1, 1, total), {}});
}

std::vector<Tensor> Tape::backward(NodeId output) {
  if (consumed_) {
    throw std::logic_error("tape already consumed by backward()");
  }
  const Node& out_node = node(output);
  if (out_node.value.rows() != 1 || out_node.value.cols() != 1) {
    throw std::invalid_argument("backward: output must be a 1×1 scalar");
  }
  consumed_ = true;

  std::vector<Tensor> grads(nodes_.size());
  const auto grad_of = [&](NodeId id) -> Tensor& {
    Tensor& g = grads[id];
    if (g.empty() && !nodes_[id].value.empty()) {
      g = Tensor(nodes_[id].value.rows(), nodes_[id].value.cols());
    }
    return g;
  };
  grad_of(output)(0, 0) = 1.0;

  for (NodeId id = output + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || grads[id].empty()) {
      continue;
    }
    const Tensor& g = grads[id];
    switch (n.op) {
      case Op::parameter:
      case Op::constant:
        break;
      case Op::matmul: {
        const Tensor& va = nodes_[n.a].value;
        const Tensor& vb = nodes_[n.b].value;
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_of(n.a);  // g * b^T
          for (std::size_t i = 0; i < va.rows(); ++i) {
            for (std::size_t k = 0; k < va.cols(); ++k) {
              double s = 0.0;
              for (std::size_t j = 0; j < vb.cols(); ++j) {
                s += g(i, j) * vb(k, j);
              }
              ga(i, k) += s;
            }
          }
        }
        if (nodes_[n.b].requires_grad) {
          Tensor& gb = grad_of(n.b);  // a^T * g
          for (std::size_t i = 0; i < va.rows(); ++i) {
            for (std::size_t k = 0; k < va.cols(); ++k) {
              const double aik = va(i, k);
              for (std::size_t j = 0; j < vb.cols(); ++j) {
                gb(k, j) += aik * g(i, j);
              }
            }
          }
        }
        break;
      }
      case Op::add_bias: {
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_of(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) {
            ga.data()[i] += g.data()[i];
          }
        }
        if (nodes_[n.b].requires_grad) {
          Tensor& gb = grad_of(n.b);
          for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < g.cols(); ++j) {
              gb(0, j) += g(i, j);
            }
          }
        }
        break;
      }
      case Op::relu: {
        Tensor& ga = grad_of(n.a);
        const Tensor& in = nodes_[n.a].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (in.data()[i] > 0.0) {
            ga.data()[i] += g.data()[i];
          }
        }
        break;
      }
      case Op::sigmoid: {
        Tensor& ga = grad_of(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = n.value.data()[i];
          ga.data()[i] += g.data()[i] * s * (1.0 - s);
        }
        break;
      }
      case Op::concat: {
        const std::size_t left = nodes_[n.a].value.cols();
        const std::size_t right = nodes_[n.b].value.cols();
        for (std::size_t i = 0; i < g.rows(); ++i) {
          if (nodes_[n.a].requires_grad) {
            Tensor& ga = grad_of(n.a);
            for (std::size_t c = 0; c < left; ++c) {
              ga(i, c) += g(i, c);
            }
          }
          if (nodes_[n.b].requires_grad) {
            Tensor& gb = grad_of(n.b);
            for (std::size_t c = 0; c < right; ++c) {
              gb(i, c) += g(i, left + c);
            }
          }
        }
        break;
      }
      case Op::pair_sq_dist: {
        const Tensor& va = nodes_[n.a].value;
        const Tensor& vb = nodes_[n.b].value;
        const bool need_a = nodes_[n.a].requires_grad;
        const bool need_b = nodes_[n.b].requires_grad;
        for (std::size_t p = 0; p < n.pairs.size(); ++p) {
          const auto [i, j] = n.pairs[p];
          const double gp = g(p, 0);
          for (std::size_t c = 0; c < va.cols(); ++c) {
            const double d = 2.0 * gp * (va(i, c) - vb(j, c));
            if (need_a) {
              grad_of(n.a)(i, c) += d;
            }
            if (need_b) {
              grad_of(n.b)(j, c) -= d;
            }
          }
        }
        break;
      }
      case Op::add:
      case Op::sub: {
        const double sign = n.op == Op::add ? 1.0 : -1.0;
        if (nodes_[n.a].requires_grad) {
          Tensor& ga = grad_of(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) {
            ga.data()[i] += g.data()[i];
          }
        }
        if (nodes_[n.b].requires_grad) {
          Tensor& gb = grad_of(n.b);
          for (std::size_t i = 0; i < g.size(); ++i) {
            gb.data()[i] += sign * g.data()[i];
          }
        }
        break;
      }
      case Op::scale: {
        Tensor& ga = grad_of(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data()[i] += n.factor * g.data()[i];
        }
        break;
      }
      case Op::exp: {
        Tensor& ga = grad_of(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data()[i] += g.data()[i] * n.value.data()[i];
        }
        break;
      }
      case Op::sum: {
        Tensor& ga = grad_of(n.a);
        for (double& v : ga.data()) {
          v += g(0, 0);
        }
        break;
      }
    }
  }

  std::vector<Tensor> out;
  out.reserve(parameters_.size());
  for (NodeId id : parameters_) {
    out.push_back(grads[id].empty() ? Tensor(nodes_[id].value.rows(), nodes_[id].value.cols()) : std::move(grads[id]));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_batch(const GeneratorNet& net, const BatchView& batch, const KernelConfig& kernel, const KnnGraph& graph) {
  kernel.validate();
  if (kernel.family != KernelFamily::gaussian) {
    throw std::invalid_argument("training loss requires the gaussian kernel");
  }
  const auto& cfg = net.config;
  const std::size_t n = batch.x.rows();
  if (batch.y.rows() != n || batch.eta.rows() != n) {
    throw std::invalid_argument("batch: x, y and eta row counts differ");
  }
  if (batch.x.cols() != cfg.predictor_dim || batch.eta.cols() != cfg.noise_dim || batch.y.cols() != cfg.response_dim) {
    throw std::invalid_argument("batch: column counts do not match the generator config");
  }
  if (graph.n() != n) {
    throw std::invalid_argument("batch: graph size does not match batch size");
  }
}

Tensor bias_row(const std::vector<double>& bias) {
  return Tensor(1, bias.size(), bias);
}

}  // namespace

LossTape forward_loss(const GeneratorNet& net, const BatchView& batch, const KernelConfig& kernel,
                      const KnnGraph& graph) {
  check_batch(net, batch, kernel, graph);
  LossTape result;
  Tape& tape = result.tape;

  NodeId act = tape.concat_cols(tape.constant(batch.eta), tape.constant(batch.x));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    const NodeId w = tape.parameter(layer.weight);
    const NodeId b = tape.parameter(bias_row(layer.bias));
    act = tape.add_bias(tape.matmul(act, w), b);
    const bool last = l + 1 == net.layers.size();
    if (!last) {
      act = tape.relu(act);
    } else if (net.config.output_activation == OutputActivation::sigmoid) {
      act = tape.sigmoid(act);
    }
    if (!tape.value(act).all_finite()) {
      throw NonFiniteError("non-finite activation in generator layer " + std::to_string(l + 1) + " of " +
                           std::to_string(net.layers.size()));
    }
  }
  const NodeId z = act;
  const NodeId y = tape.constant(batch.y);

  std::vector<IndexPair> pairs;
  pairs.reserve(graph.n() * graph.k());
  for (std::size_t i = 0; i < graph.n(); ++i) {
    for (std::size_t j : graph.neighbors_unchecked(i)) {
      pairs.emplace_back(i, j);
    }
  }
  Tensor kyy(pairs.size(), 1);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    kyy(p, 0) = kernel_value_unchecked(kernel, batch.y.row(pairs[p].first).data(),
                                       batch.y.row(pairs[p].second).data(), batch.y.cols());
  }

  const double coeff = -1.0 / (2.0 * kernel.bandwidth * kernel.bandwidth);
  const auto gaussian = [&](NodeId a, NodeId b) { return tape.exp(tape.scale(tape.pair_sq_dist(a, b, pairs), coeff)); };
  const NodeId k_yz = gaussian(y, z);
  const NodeId k_zy = gaussian(z, y);
  const NodeId k_zz = gaussian(z, z);
  const NodeId h = tape.add(tape.sub(tape.sub(tape.constant(std::move(kyy)), k_yz), k_zy), k_zz);
  const double norm = static_cast<double>(graph.n()) * static_cast<double>(graph.k());
  result.loss_node = tape.scale(tape.sum(h), 1.0 / norm);
  result.loss = tape.value(result.loss_node)(0, 0);
  if (!std::isfinite(result.loss)) {
    throw NonFiniteError("non-finite batch loss");
  }
  return result;
}

ParameterSet backward(LossTape& loss) {
  auto grads = loss.tape.backward(loss.loss_node);
  if (grads.size() % 2 != 0) {
    throw std::logic_error("backward: tape does not hold weight/bias pairs");
  }
  ParameterSet out;
  for (std::size_t i = 0; i < grads.size(); i += 2) {
    auto& b = grads[i + 1];
    out.push_back({std::move(grads[i]), std::vector<double>(b.data().begin(), b.data().end())});
  }
  return out;
}

double batch_loss_value(const GeneratorNet& net, const BatchView& batch, const KernelConfig& kernel,
                        const KnnGraph& graph) {
  check_batch(net, batch, kernel, graph);
  const Matrix z = generate(net, batch.eta, batch.x);
  return ecmmd_hat({graph, batch.y, z, kernel});
}

ParameterSet finite_diff_gradient(const GeneratorNet& net, const BatchView& batch, const KernelConfig& kernel,
                                  const KnnGraph& graph, double step) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("finite_diff_gradient: step must be positive");
  }
  GeneratorNet probe = net;
  ParameterSet grads = zeros_like(net.layers);
  const auto central = [&](double& param) {
    const double saved = param;
    param = saved + step;
    const double up = batch_loss_value(probe, batch, kernel, graph);
    param = saved - step;
    const double down = batch_loss_value(probe, batch, kernel, graph);
    param = saved;
    return (up - down) / (2.0 * step);
  };
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    auto& layer = probe.layers[l];
    for (std::size_t i = 0; i < layer.weight.size(); ++i) {
      grads[l].weight.data()[i] = central(layer.weight.data()[i]);
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      grads[l].bias[i] = central(layer.bias[i]);
    }
  }
  return grads;
}

}  // namespace cgmmd::ad
