#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cgmmd/matrix.hpp"

namespace cgmmd {

enum class KnnMethod { automatic, brute_force, kd_tree };

struct KnnOptions {
  KnnMethod method = KnnMethod::automatic;
  /// automatic uses exhaustive search up to this many points, a kd-tree above.
  std::size_t brute_force_threshold = 256;
};

/// Directed k-nearest-neighbor graph. Node i points to the k rows closest to
/// row i in Euclidean distance, self excluded, ties broken toward the smaller
/// index. Lists are stored closest first.
class KnnGraph {
 public:
  /// Validates every invariant (list length k, no self loops, indices in range).
  KnnGraph(std::size_t n, std::size_t k, std::size_t dim, std::vector<std::size_t> flat_neighbors);

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t dim() const noexcept { return dim_; }

  /// Throws std::out_of_range for i >= n.
  std::span<const std::size_t> neighbors(std::size_t i) const;
  std::span<const std::size_t> neighbors_unchecked(std::size_t i) const noexcept {
    return {flat_.data() + i * k_, k_};
  }

  friend bool operator==(const KnnGraph&, const KnnGraph&) = default;

 private:
  std::size_t n_;
  std::size_t k_;
  std::size_t dim_;
  std::vector<std::size_t> flat_;
};

KnnGraph build_knn_graph(const Matrix& points, std::size_t k, const KnnOptions& options = {});

/// In-degree plus out-degree per node; sums to 2 n k.
std::vector<std::size_t> degrees(const KnnGraph& graph);

}  // namespace cgmmd
