#pragma once

#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "ramwalk/diff/ops.hpp"
#include "ramwalk/diff/tensor.hpp"

namespace ramwalk::walk {

using diff::Tensor;

// Row-stochastic transition between the node grids of two consecutive frames.
// Dense form stores an [m, m] matrix; local form stores one probability per
// edge of a shared neighbor structure.
struct TransitionMatrix {
  std::size_t nodes = 0;
  Tensor dense;                                   // [m, m] when index is null
  std::shared_ptr<const diff::RowIndex> index;    // local form
  Tensor values;                                  // [nnz] when local

  bool is_local() const { return index != nullptr; }
  // Probability of moving from node i to node j (0 for a missing edge).
  double at(std::size_t i, std::size_t j) const;
  // Dense [m, m] copy of the values (untracked).
  std::vector<double> to_dense() const;
};

// Cells whose L1 distance from each cell is strictly below `radius`.
// Throws std::invalid_argument when radius < 1.
diff::RowIndex l1_neighbors(int height, int width, double radius);

// Node matrix [m, D] from embeddings [D, H, W].
Tensor node_matrix(const Tensor& embeddings);

TransitionMatrix affinity_global(const Tensor& embeddings_t, const Tensor& embeddings_next, double temperature);
TransitionMatrix affinity_local(const Tensor& embeddings_t, const Tensor& embeddings_next, double temperature,
                                double radius);
// Same as affinity_local with a precomputed neighbor structure.
TransitionMatrix affinity_local(const Tensor& embeddings_t, const Tensor& embeddings_next, double temperature,
                                std::shared_ptr<const diff::RowIndex> index);

TransitionMatrix identity_transition(std::size_t nodes);
TransitionMatrix dense_transition(Tensor matrix);

// Walker state as a [1, m] row vector.
Tensor one_hot_walker(std::size_t nodes, std::size_t index);

Tensor walker_step(const Tensor& walker, const TransitionMatrix& a);

// X^0 .. X^T where X^t = X^{t-1} A_{t-1}^t.
std::vector<Tensor> rollout(const Tensor& start, const std::vector<TransitionMatrix>& transitions);

// Maximum probability and its flat index; ties resolve to the lowest index.
std::pair<double, std::size_t> walker_argmax(const Tensor& walker);

}  // namespace ramwalk::walk
