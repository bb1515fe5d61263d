#pragma once

#include <cstddef>
#include <vector>

#include "ramwalk/diff/tensor.hpp"

namespace ramwalk::diff {

// Elementwise, same shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor log(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);  // rank 2
Tensor matmul(const Tensor& a, const Tensor& b);

// Concatenation along axis 0 (channels for [C,H,W] maps).
Tensor concat_channels(const std::vector<Tensor>& parts);

// Flat-index gather: out[k] = x.flat[indices[k]].
Tensor gather(const Tensor& x, const std::vector<std::size_t>& indices);

// Cross-correlation of x[C,H,W] with w[K,C,kh,kw] plus bias[K]; odd kernels,
// zero padding so the output is [K,H,W].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias);

// Max pooling over x[C,H,W]. Windows start at multiples of `stride` and are
// clamped to the last row/column (replicate-edge padding), so the output is
// [C, ceil(H/stride), ceil(W/stride)]. Gradient goes to the first maximum in
// row-major window order.
Tensor maxpool2d(const Tensor& x, std::size_t kernel, std::size_t stride);

Tensor softmax_rows(const Tensor& logits, double temperature);

// Unit-normalizes each vector along the last axis. Vectors whose norm is below
// kNormEpsilon become zero.
inline constexpr double kNormEpsilon = 1e-12;
Tensor l2_normalize(const Tensor& v);

// Sparse row structure (CSR) used by the local-attention transitions.
struct RowIndex {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> offsets;  // rows + 1 entries
  std::vector<std::size_t> columns;  // nnz entries, ascending within a row

  std::size_t nnz() const { return columns.size(); }
};

// out[e] = <a[i], b[j]> for every stored edge e = (i, j); a[rows,D], b[cols,D].
Tensor edge_dots(const Tensor& a, const Tensor& b, const RowIndex& index);

// Per-row softmax over the stored edges of `logits[nnz]`.
Tensor edge_softmax(const Tensor& logits, const RowIndex& index, double temperature);

// x[n,rows] times the sparse matrix (values[nnz] laid out by index) -> [n,cols].
Tensor sparse_matmul(const Tensor& x, const Tensor& values, const RowIndex& index);

}  // namespace ramwalk::diff
