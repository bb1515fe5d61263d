#include "ramwalk/walk/transition.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace ramwalk::walk {

double TransitionMatrix::at(std::size_t i, std::size_t j) const {
  if (!is_local()) return dense[i * nodes + j];
  for (std::size_t e = index->offsets[i]; e < index->offsets[i + 1]; ++e)
    if (index->columns[e] == j) return values[e];
  return 0.0;
}

std::vector<double> TransitionMatrix::to_dense() const {
  if (!is_local()) {
    const auto d = dense.data();
    return {d.begin(), d.end()};
  }
  std::vector<double> out(nodes * nodes, 0.0);
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t e = index->offsets[i]; e < index->offsets[i + 1]; ++e)
      out[i * nodes + index->columns[e]] = values[e];
  return out;
}

diff::RowIndex l1_neighbors(int height, int width, double radius) {
  if (!(radius >= 1.0)) throw std::invalid_argument("local attention radius must be >= 1, got " + std::to_string(radius));
  diff::RowIndex index;
  index.rows = index.cols = static_cast<std::size_t>(height * width);
  index.offsets.push_back(0);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      for (int r2 = 0; r2 < height; ++r2) {
        for (int c2 = 0; c2 < width; ++c2) {
          if (std::abs(r2 - r) + std::abs(c2 - c) < radius) index.columns.push_back(static_cast<std::size_t>(r2 * width + c2));
        }
      }
      index.offsets.push_back(index.columns.size());
    }
  }
  return index;
}

Tensor node_matrix(const Tensor& embeddings) {
  if (embeddings.rank() != 3) throw diff::ShapeError("node_matrix: expected [D,H,W], got " + diff::shape_str(embeddings.shape()));
  const std::size_t d = embeddings.dim(0), m = embeddings.dim(1) * embeddings.dim(2);
  return diff::transpose(diff::reshape(embeddings, {d, m}));
}

namespace {

void check_pair(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || a.shape() != b.shape()) {
    throw diff::ShapeError("affinity: embeddings " + diff::shape_str(a.shape()) + " and " + diff::shape_str(b.shape()) +
                           " differ");
  }
}

}  // namespace

TransitionMatrix affinity_global(const Tensor& embeddings_t, const Tensor& embeddings_next, double temperature) {
  check_pair(embeddings_t, embeddings_next);
  const auto a = node_matrix(embeddings_t);
  const auto b = node_matrix(embeddings_next);
  TransitionMatrix out;
  out.nodes = a.dim(0);
  out.dense = diff::softmax_rows(diff::matmul(a, diff::transpose(b)), temperature);
  return out;
}

TransitionMatrix affinity_local(const Tensor& embeddings_t, const Tensor& embeddings_next, double temperature,
                                std::shared_ptr<const diff::RowIndex> index) {
  check_pair(embeddings_t, embeddings_next);
  const auto a = node_matrix(embeddings_t);
  const auto b = node_matrix(embeddings_next);
  if (index->rows != a.dim(0) || index->cols != b.dim(0)) {
    throw diff::ShapeError("affinity_local: neighbor structure does not match the node grid");
  }
  TransitionMatrix out;
  out.nodes = a.dim(0);
  out.values = diff::edge_softmax(diff::edge_dots(a, b, *index), *index, temperature);
  out.index = std::move(index);
  return out;
}

TransitionMatrix affinity_local(const Tensor& embeddings_t, const Tensor& embeddings_next, double temperature,
                                double radius) {
  check_pair(embeddings_t, embeddings_next);
  auto index = std::make_shared<const diff::RowIndex>(l1_neighbors(
      static_cast<int>(embeddings_t.dim(1)), static_cast<int>(embeddings_t.dim(2)), radius));
  return affinity_local(embeddings_t, embeddings_next, temperature, std::move(index));
}

TransitionMatrix identity_transition(std::size_t nodes) {
  std::vector<double> v(nodes * nodes, 0.0);
  for (std::size_t i = 0; i < nodes; ++i) v[i * nodes + i] = 1.0;
  return dense_transition(Tensor({nodes, nodes}, std::move(v)));
}

TransitionMatrix dense_transition(Tensor matrix) {
  if (matrix.rank() != 2 || matrix.dim(0) != matrix.dim(1)) {
    throw diff::ShapeError("dense_transition: expected a square matrix, got " + diff::shape_str(matrix.shape()));
  }
  TransitionMatrix out;
  out.nodes = matrix.dim(0);
  out.dense = std::move(matrix);
  return out;
}

Tensor one_hot_walker(std::size_t nodes, std::size_t index) {
  if (index >= nodes) throw std::out_of_range("one_hot_walker: index outside the grid");
  std::vector<double> v(nodes, 0.0);
  v[index] = 1.0;
  return Tensor({1, nodes}, std::move(v));
}

Tensor walker_step(const Tensor& walker, const TransitionMatrix& a) {
  if (a.is_local()) return diff::sparse_matmul(walker, a.values, *a.index);
  return diff::matmul(walker, a.dense);
}

std::vector<Tensor> rollout(const Tensor& start, const std::vector<TransitionMatrix>& transitions) {
  std::vector<Tensor> states{start};
  states.reserve(transitions.size() + 1);
  for (const auto& a : transitions) states.push_back(walker_step(states.back(), a));
  return states;
}

std::pair<double, std::size_t> walker_argmax(const Tensor& walker) {
  const auto d = walker.data();
  std::size_t best = 0;
  for (std::size_t i = 1; i < d.size(); ++i)
    if (d[i] > d[best]) best = i;
  return {d.empty() ? 0.0 : d[best], best};
}

}  // namespace ramwalk::walk
