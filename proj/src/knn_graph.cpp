#include "cgmmd/knn_graph.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cgmmd/kernels.hpp"
#include "cgmmd/parallel.hpp"

namespace cgmmd {

KnnGraph::KnnGraph(std::size_t n, std::size_t k, std::size_t dim, std::vector<std::size_t> flat_neighbors)
    : n_(n), k_(k), dim_(dim), flat_(std::move(flat_neighbors)) {
  if (k_ == 0 || k_ >= n_) {
    throw std::invalid_argument("KnnGraph: need 1 <= k <= n - 1");
  }
  if (flat_.size() != n_ * k_) {
    throw std::invalid_argument("KnnGraph: neighbor storage must hold exactly n * k entries");
  }
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j : neighbors_unchecked(i)) {
      if (j >= n_ || j == i) {
        throw std::invalid_argument("KnnGraph: invalid neighbor " + std::to_string(j) + " for node " +
                                    std::to_string(i));
      }
    }
  }
}

std::span<const std::size_t> KnnGraph::neighbors(std::size_t i) const {
  if (i >= n_) {
    throw std::out_of_range("KnnGraph::neighbors: node " + std::to_string(i) + " out of range");
  }
  return neighbors_unchecked(i);
}

namespace {

struct Candidate {
  double dist;
  std::size_t index;

  friend bool operator<(const Candidate& a, const Candidate& b) noexcept {
    return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
  }
};

void brute_force_query(const Matrix& points, std::size_t query, std::size_t k, std::span<std::size_t> out,
                       std::vector<Candidate>& scratch) {
  scratch.clear();
  const double* q = points.row(query).data();
  for (std::size_t j = 0; j < points.rows(); ++j) {
    if (j != query) {
      scratch.push_back({squared_distance(q, points.row(j).data(), points.cols()), j});
    }
  }
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
  for (std::size_t r = 0; r < k; ++r) {
    out[r] = scratch[r].index;
  }
}

// Exact kd-tree. Internal nodes split at the median along the widest axis;
// points with coordinate equal to the split value may land on either side, so
// far-side pruning uses the plane distance as a strict lower bound and only
// skips a subtree when that bound exceeds the current k-th best distance.
class KdTree {
 public:
  explicit KdTree(const Matrix& points) : points_(points), order_(points.rows()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * points.rows() / kLeafSize + 2);
    build(0, points.rows());
  }

  void query(std::size_t query_index, std::size_t k, std::span<std::size_t> out,
             std::vector<Candidate>& heap) const {
    heap.clear();
    search(0, points_.row(query_index).data(), query_index, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    for (std::size_t r = 0; r < k; ++r) {
      out[r] = heap[r].index;
    }
  }

 private:
  static constexpr std::size_t kLeafSize = 16;

  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t axis = 0;
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    bool leaf = true;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) {
      return id;
    }
    const std::size_t dim = points_.cols();
    std::size_t axis = 0;
    double widest = -1.0;
    for (std::size_t a = 0; a < dim; ++a) {
      double lo = points_(order_[begin], a);
      double hi = lo;
      for (std::size_t i = begin + 1; i < end; ++i) {
        const double v = points_(order_[i], a);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > widest) {
        widest = hi - lo;
        axis = a;
      }
    }
    if (widest <= 0.0) {
      return id;  // all points coincide; keep as a leaf
    }
    const std::size_t mid = begin + (end - begin) / 2;
    const auto first = order_.begin();
    std::nth_element(first + static_cast<std::ptrdiff_t>(begin), first + static_cast<std::ptrdiff_t>(mid),
                     first + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                       const double va = points_(a, axis);
                       const double vb = points_(b, axis);
                       return va < vb || (va == vb && a < b);
                     });
    const double split = points_(order_[mid], axis);
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    Node& node = nodes_[id];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    node.leaf = false;
    return id;
  }

  void search(std::size_t id, const double* q, std::size_t self, std::size_t k, std::vector<Candidate>& heap) const {
    const Node& node = nodes_[id];
    if (node.leaf) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t j = order_[i];
        if (j == self) {
          continue;
        }
        const Candidate c{squared_distance(q, points_.row(j).data(), points_.cols()), j};
        if (heap.size() < k) {
          heap.push_back(c);
          std::push_heap(heap.begin(), heap.end());
        } else if (c < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = c;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    const std::size_t near = delta < 0.0 ? node.left : node.right;
    const std::size_t far = delta < 0.0 ? node.right : node.left;
    search(near, q, self, k, heap);
    if (heap.size() < k || delta * delta <= heap.front().dist) {
      search(far, q, self, k, heap);
    }
  }

  const Matrix& points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace

KnnGraph build_knn_graph(const Matrix& points, std::size_t k, const KnnOptions& options) {
  const std::size_t n = points.rows();
  if (n < 2) {
    throw std::invalid_argument("build_knn_graph: need at least 2 points");
  }
  if (k == 0 || k >= n) {
    throw std::invalid_argument("build_knn_graph: need 1 <= k <= n - 1 (k=" + std::to_string(k) +
                                ", n=" + std::to_string(n) + ")");
  }
  if (!points.all_finite()) {
    throw std::invalid_argument("build_knn_graph: non-finite coordinates");
  }

  bool use_tree = false;
  switch (options.method) {
    case KnnMethod::automatic: use_tree = n > options.brute_force_threshold; break;
    case KnnMethod::brute_force: use_tree = false; break;
    case KnnMethod::kd_tree: use_tree = true; break;
  }

  std::vector<std::size_t> flat(n * k);
  if (use_tree) {
    const KdTree tree(points);
    parallel_for(0, n, [&](std::size_t i) {
      thread_local std::vector<Candidate> heap;
      tree.query(i, k, std::span(flat).subspan(i * k, k), heap);
    });
  } else {
    parallel_for(0, n, [&](std::size_t i) {
      thread_local std::vector<Candidate> scratch;
      brute_force_query(points, i, k, std::span(flat).subspan(i * k, k), scratch);
    });
  }
  return KnnGraph(n, k, points.cols(), std::move(flat));
}

std::vector<std::size_t> degrees(const KnnGraph& graph) {
  std::vector<std::size_t> deg(graph.n(), graph.k());
  for (std::size_t i = 0; i < graph.n(); ++i) {
    for (std::size_t j : graph.neighbors_unchecked(i)) {
      ++deg[j];
    }
  }
  return deg;
}

}  // namespace cgmmd
