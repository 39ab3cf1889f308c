#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cgmmd/generator.hpp"
#include "cgmmd/kernels.hpp"
#include "cgmmd/knn_graph.hpp"
#include "cgmmd/matrix.hpp"

namespace cgmmd::ad {

/// Dense 2-D row-major tensor; shape is (rows, cols).
using Tensor = Matrix;
using NodeId = std::size_t;
using IndexPair = std::pair<std::size_t, std::size_t>;

/// Reverse-mode tape. Every op appends a node whose inputs already exist, so
/// node order is a topological order and backward() is a single reverse sweep.
/// A tape can be differentiated once.
class Tape {
 public:
  NodeId parameter(Tensor value);
  NodeId constant(Tensor value);

  NodeId matmul(NodeId a, NodeId b);
  /// a (n×c) plus a 1×c bias row broadcast down the rows.
  NodeId add_bias(NodeId a, NodeId bias);
  /// max(a, 0); the derivative at exactly 0 is 0.
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId concat_cols(NodeId a, NodeId b);
  /// P×1 column of ||a_i - b_j||^2 for each listed (i, j).
  NodeId pair_sq_dist(NodeId a, NodeId b, std::vector<IndexPair> pairs);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId exp(NodeId a);
  /// 1×1 sum of all entries, accumulated in storage order.
  NodeId sum(NodeId a);

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

  /// Gradients of the 1×1 node `output` with respect to every parameter node,
  /// in creation order. Throws std::logic_error on a second call.
  std::vector<Tensor> backward(NodeId output);

 private:
  enum class Op { parameter, constant, matmul, add_bias, relu, sigmoid, concat, pair_sq_dist, add, sub, scale, exp, sum };

  struct Node {
    Op op;
    NodeId a = 0;
    NodeId b = 0;
    double factor = 0.0;
    bool requires_grad = false;
    Tensor value;
    std::vector<IndexPair> pairs;
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<NodeId> parameters_;
  bool consumed_ = false;
};

/// Training batch: predictors, observed responses and the noise rows that feed
/// the generator, all with the same row count.
struct BatchView {
  const Matrix& x;
  const Matrix& y;
  const Matrix& eta;
};

struct LossTape {
  double loss = 0.0;
  Tape tape;
  NodeId loss_node = 0;
};

/// Batch loss (1/(B k)) sum_i sum_{j in N(i)} H((y_i, g_i), (y_j, g_j)) with
/// g = net(eta, x), recorded on a tape. Gaussian kernel only.
/// Throws NonFiniteError naming the first layer whose activations are not finite.
LossTape forward_loss(const GeneratorNet& net, const BatchView& batch, const KernelConfig& kernel,
                      const KnnGraph& graph);

/// Parameter gradients from a tape made by forward_loss, shaped like net.layers.
ParameterSet backward(LossTape& loss);

/// The same loss through generate() and ecmmd_hat(), no tape.
double batch_loss_value(const GeneratorNet& net, const BatchView& batch, const KernelConfig& kernel,
                        const KnnGraph& graph);

/// Central differences of batch_loss_value, one parameter at a time. Test oracle.
ParameterSet finite_diff_gradient(const GeneratorNet& net, const BatchView& batch, const KernelConfig& kernel,
                                  const KnnGraph& graph, double step);

}  // namespace cgmmd::ad
