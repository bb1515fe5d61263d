#include "ramwalk/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <cblas.h>

namespace ramwalk::diff {

namespace {

int blas_int(std::size_t n) { return static_cast<int>(n); }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_str(x.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  const auto da = a.data();
  const auto db = b.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  return Tape::record(a.shape(), std::move(out), {a, b}, [](std::span<const double> g, const GradSlots& gi) {
    for (auto* slot : gi) {
      if (!slot) continue;
      for (std::size_t i = 0; i < g.size(); ++i) (*slot)[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  const auto da = a.data();
  const auto db = b.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  return Tape::record(a.shape(), std::move(out), {a, b}, [](std::span<const double> g, const GradSlots& gi) {
    if (gi[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
    if (gi[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  const auto da = a.data();
  const auto db = b.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  return Tape::record(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g, const GradSlots& gi) {
    const auto da = a.data();
    const auto db = b.data();
    if (gi[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * db[i];
    if (gi[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * da[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  const auto da = a.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * factor;
  return Tape::record(a.shape(), std::move(out), {a}, [factor](std::span<const double> g, const GradSlots& gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * factor;
  });
}

namespace {

// Elementwise op whose derivative is expressed through input and output.
template <typename Fwd, typename Deriv>
Tensor elementwise(const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto in = x.data();
  auto out = std::make_shared<std::vector<double>>(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) (*out)[i] = fwd(in[i]);
  std::vector<double> values = *out;
  return Tape::record(x.shape(), std::move(values), {x},
                      [x, out, deriv](std::span<const double> g, const GradSlots& gi) {
                        const auto in = x.data();
                        auto& dst = *gi[0];
                        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * deriv(in[i], (*out)[i]);
                      });
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
  return elementwise(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return elementwise(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return elementwise(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor log(const Tensor& x) {
  return elementwise(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sum(const Tensor& x) {
  const auto d = x.data();
  double s = 0.0;
  for (double v : d) s += v;
  return Tape::record({}, {s}, {x}, [](std::span<const double> g, const GradSlots& gi) {
    for (auto& v : *gi[0]) v += g[0];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tape::record(std::move(shape), std::move(out), {x}, [](std::span<const double> g, const GradSlots& gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
  });
}

Tensor transpose(const Tensor& x) {
  require_rank("transpose", x, 2);
  const std::size_t n = x.dim(0);
  const std::size_t m = x.dim(1);
  const auto d = x.data();
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = d[i * m + j];
  return Tape::record({m, n}, std::move(out), {x}, [n, m](std::span<const double> g, const GradSlots& gi) {
    auto& dst = *gi[0];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) dst[i * m + j] += g[j * n + i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t n = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t m = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const auto da = a.data();
  const auto db = b.data();
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = da[i * k + p];
      if (av == 0.0) continue;
      const double* brow = db.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += av * brow[j];
    }
  }
  return Tape::record({n, m}, std::move(out), {a, b}, [a, b, n, k, m](std::span<const double> g, const GradSlots& gi) {
    const auto da = a.data();
    const auto db = b.data();
    if (gi[0]) {
      auto& ga = *gi[0];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          const double* grow = g.data() + i * m;
          const double* brow = db.data() + p * m;
          for (std::size_t j = 0; j < m; ++j) s += grow[j] * brow[j];
          ga[i * k + p] += s;
        }
    }
    if (gi[1]) {
      auto& gb = *gi[1];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = da[i * k + p];
          if (av == 0.0) continue;
          const double* grow = g.data() + i * m;
          double* dst = gb.data() + p * m;
          for (std::size_t j = 0; j < m; ++j) dst[j] += av * grow[j];
        }
    }
  });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape& first = parts.front().shape();
  if (first.empty()) throw ShapeError("concat_channels: scalar input");
  std::size_t channels = 0;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    if (p.rank() != first.size() || !std::equal(first.begin() + 1, first.end(), p.shape().begin() + 1)) {
      throw ShapeError("concat_channels: incompatible shapes " + shape_str(first) + " and " + shape_str(p.shape()));
    }
    channels += p.dim(0);
    sizes.push_back(p.numel());
  }
  Shape shape = first;
  shape[0] = channels;
  std::vector<double> out;
  out.reserve(shape_numel(shape));
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return Tape::record(std::move(shape), std::move(out), parts, [sizes](std::span<const double> g, const GradSlots& gi) {
    std::size_t offset = 0;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      if (gi[s])
        for (std::size_t i = 0; i < sizes[s]; ++i) (*gi[s])[i] += g[offset + i];
      offset += sizes[s];
    }
  });
}

Tensor gather(const Tensor& x, const std::vector<std::size_t>& indices) {
  const auto d = x.data();
  std::vector<double> out(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= d.size()) {
      throw ShapeError("gather: index " + std::to_string(indices[k]) + " out of range for shape " +
                       shape_str(x.shape()));
    }
    out[k] = d[indices[k]];
  }
  return Tape::record({indices.size()}, std::move(out), {x}, [indices](std::span<const double> g, const GradSlots& gi) {
    for (std::size_t k = 0; k < indices.size(); ++k) (*gi[0])[indices[k]] += g[k];
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank("conv2d", x, 3);
  require_rank("conv2d", w, 4);
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t K = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != C) {
    throw ShapeError("conv2d: input channels do not match weights, input " + shape_str(x.shape()) + " vs weights " +
                     shape_str(w.shape()));
  }
  if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("conv2d: kernel must be odd, got " + shape_str(w.shape()));
  if (bias.shape() != Shape{K}) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match weights " + shape_str(w.shape()));
  }
  const std::size_t HW = H * W;
  const std::size_t R = C * kh * kw;
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);

  // Patch matrix [R, HW]: row r = (c, dy, dx) holds the shifted input plane.
  auto cols = std::make_shared<std::vector<double>>(R * HW, 0.0);
  const auto dx_in = x.data();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t dy = 0; dy < kh; ++dy)
      for (std::size_t dx = 0; dx < kw; ++dx) {
        double* row = cols->data() + ((c * kh + dy) * kw + dx) * HW;
        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(dy) - ph;
        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(dx) - pw;
        for (std::size_t oy = 0; oy < H; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) + sy;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -sx));
          const std::size_t x1 = static_cast<std::size_t>(std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W),
                                                                                   static_cast<std::ptrdiff_t>(W) - sx));
          const double* src = dx_in.data() + c * HW + static_cast<std::size_t>(iy) * W;
          for (std::size_t ox = x0; ox < x1; ++ox) row[oy * W + ox] = src[static_cast<std::ptrdiff_t>(ox) + sx];
        }
      }

  const auto dw = w.data();
  const auto db = bias.data();
  std::vector<double> out(K * HW);
  for (std::size_t k = 0; k < K; ++k) std::fill(out.begin() + k * HW, out.begin() + (k + 1) * HW, db[k]);
  // out[K,HW] += w[K,R] * cols[R,HW]
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, blas_int(K), blas_int(HW), blas_int(R), 1.0, dw.data(),
              blas_int(R), cols->data(), blas_int(HW), 1.0, out.data(), blas_int(HW));

  return Tape::record(
      {K, H, W}, std::move(out), {x, w, bias},
      [w, cols, C, H, W, K, kh, kw, ph, pw, HW, R](std::span<const double> g, const GradSlots& gi) {
        if (gi[2]) {
          auto& gb = *gi[2];
          for (std::size_t k = 0; k < K; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < HW; ++i) s += g[k * HW + i];
            gb[k] += s;
          }
        }
        if (gi[1]) {
          // gw[K,R] += g[K,HW] * cols[R,HW]^T
          cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, blas_int(K), blas_int(R), blas_int(HW), 1.0, g.data(),
                      blas_int(HW), cols->data(), blas_int(HW), 1.0, gi[1]->data(), blas_int(R));
        }
        if (gi[0]) {
          const auto dw = w.data();
          // gcol[R,HW] = w[K,R]^T * g[K,HW]
          std::vector<double> gcol(R * HW, 0.0);
          cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, blas_int(R), blas_int(HW), blas_int(K), 1.0, dw.data(),
                      blas_int(R), g.data(), blas_int(HW), 0.0, gcol.data(), blas_int(HW));
          auto& gx = *gi[0];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t dy = 0; dy < kh; ++dy)
              for (std::size_t dx = 0; dx < kw; ++dx) {
                const double* row = gcol.data() + ((c * kh + dy) * kw + dx) * HW;
                const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(dy) - ph;
                const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(dx) - pw;
                for (std::size_t oy = 0; oy < H; ++oy) {
                  const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) + sy;
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                  const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -sx));
                  const std::size_t x1 = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
                      static_cast<std::ptrdiff_t>(W), static_cast<std::ptrdiff_t>(W) - sx));
                  double* dst = gx.data() + c * HW + static_cast<std::size_t>(iy) * W;
                  for (std::size_t ox = x0; ox < x1; ++ox) dst[static_cast<std::ptrdiff_t>(ox) + sx] += row[oy * W + ox];
                }
              }
        }
      });
}

Tensor maxpool2d(const Tensor& x, std::size_t kernel, std::size_t stride) {
  require_rank("maxpool2d", x, 3);
  if (kernel == 0 || stride == 0) throw ShapeError("maxpool2d: kernel and stride must be positive");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (kernel > H || kernel > W) {
    throw ShapeError("maxpool2d: kernel " + std::to_string(kernel) + " larger than input " + shape_str(x.shape()));
  }
  const std::size_t Ho = (H + stride - 1) / stride;
  const std::size_t Wo = (W + stride - 1) / stride;
  const auto d = x.data();
  std::vector<double> out(C * Ho * Wo);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          const std::size_t iy = std::min(oy * stride + ky, H - 1);
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::size_t ix = std::min(ox * stride + kx, W - 1);
            const std::size_t idx = (c * H + iy) * W + ix;
            if (d[idx] > best) {
              best = d[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (c * Ho + oy) * Wo + ox;
        out[o] = best;
        argmax[o] = best_idx;
      }
  return Tape::record({C, Ho, Wo}, std::move(out), {x}, [argmax](std::span<const double> g, const GradSlots& gi) {
    for (std::size_t o = 0; o < g.size(); ++o) (*gi[0])[argmax[o]] += g[o];
  });
}

Tensor softmax_rows(const Tensor& logits, double temperature) {
  require_rank("softmax_rows", logits, 2);
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax_rows: temperature must be positive");
  const std::size_t n = logits.dim(0);
  const std::size_t m = logits.dim(1);
  const auto d = logits.data();
  auto out = std::make_shared<std::vector<double>>(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = d.data() + i * m;
    double* o = out->data() + i * m;
    const double mx = *std::max_element(row, row + m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      o[j] = std::exp((row[j] - mx) / temperature);
      z += o[j];
    }
    for (std::size_t j = 0; j < m; ++j) o[j] /= z;
  }
  std::vector<double> values = *out;
  return Tape::record(logits.shape(), std::move(values), {logits},
                      [out, n, m, temperature](std::span<const double> g, const GradSlots& gi) {
                        auto& dst = *gi[0];
                        for (std::size_t i = 0; i < n; ++i) {
                          const double* p = out->data() + i * m;
                          const double* gr = g.data() + i * m;
                          double dot = 0.0;
                          for (std::size_t j = 0; j < m; ++j) dot += p[j] * gr[j];
                          for (std::size_t j = 0; j < m; ++j) dst[i * m + j] += p[j] * (gr[j] - dot) / temperature;
                        }
                      });
}

Tensor l2_normalize(const Tensor& v) {
  if (v.rank() == 0) throw ShapeError("l2_normalize: scalar input");
  const std::size_t D = v.shape().back();
  const std::size_t n = D == 0 ? 0 : v.numel() / D;
  const auto d = v.data();
  auto out = std::make_shared<std::vector<double>>(v.numel(), 0.0);
  auto norms = std::make_shared<std::vector<double>>(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < D; ++k) s += d[i * D + k] * d[i * D + k];
    const double norm = std::sqrt(s);
    (*norms)[i] = norm;
    if (norm < kNormEpsilon) continue;
    for (std::size_t k = 0; k < D; ++k) (*out)[i * D + k] = d[i * D + k] / norm;
  }
  std::vector<double> values = *out;
  return Tape::record(v.shape(), std::move(values), {v}, [out, norms, n, D](std::span<const double> g, const GradSlots& gi) {
    auto& dst = *gi[0];
    for (std::size_t i = 0; i < n; ++i) {
      const double norm = (*norms)[i];
      if (norm < kNormEpsilon) continue;
      const double* y = out->data() + i * D;
      const double* gr = g.data() + i * D;
      double dot = 0.0;
      for (std::size_t k = 0; k < D; ++k) dot += y[k] * gr[k];
      for (std::size_t k = 0; k < D; ++k) dst[i * D + k] += (gr[k] - y[k] * dot) / norm;
    }
  });
}

Tensor edge_dots(const Tensor& a, const Tensor& b, const RowIndex& index) {
  require_rank("edge_dots", a, 2);
  require_rank("edge_dots", b, 2);
  if (a.dim(0) != index.rows || b.dim(0) != index.cols || a.dim(1) != b.dim(1)) {
    throw ShapeError("edge_dots: embeddings " + shape_str(a.shape()) + " / " + shape_str(b.shape()) +
                     " do not fit a " + std::to_string(index.rows) + "x" + std::to_string(index.cols) + " index");
  }
  const std::size_t D = a.dim(1);
  const auto da = a.data();
  const auto db = b.data();
  std::vector<double> out(index.nnz());
  for (std::size_t i = 0; i < index.rows; ++i)
    for (std::size_t e = index.offsets[i]; e < index.offsets[i + 1]; ++e) {
      const double* ai = da.data() + i * D;
      const double* bj = db.data() + index.columns[e] * D;
      double s = 0.0;
      for (std::size_t k = 0; k < D; ++k) s += ai[k] * bj[k];
      out[e] = s;
    }
  return Tape::record({index.nnz()}, std::move(out), {a, b},
                      [a, b, index, D](std::span<const double> g, const GradSlots& gi) {
                        const auto da = a.data();
                        const auto db = b.data();
                        for (std::size_t i = 0; i < index.rows; ++i)
                          for (std::size_t e = index.offsets[i]; e < index.offsets[i + 1]; ++e) {
                            const std::size_t j = index.columns[e];
                            if (gi[0])
                              for (std::size_t k = 0; k < D; ++k) (*gi[0])[i * D + k] += g[e] * db[j * D + k];
                            if (gi[1])
                              for (std::size_t k = 0; k < D; ++k) (*gi[1])[j * D + k] += g[e] * da[i * D + k];
                          }
                      });
}

Tensor edge_softmax(const Tensor& logits, const RowIndex& index, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("edge_softmax: temperature must be positive");
  if (logits.numel() != index.nnz()) {
    throw ShapeError("edge_softmax: " + std::to_string(logits.numel()) + " logits for " +
                     std::to_string(index.nnz()) + " edges");
  }
  const auto d = logits.data();
  auto out = std::make_shared<std::vector<double>>(index.nnz());
  for (std::size_t i = 0; i < index.rows; ++i) {
    const std::size_t b = index.offsets[i], e = index.offsets[i + 1];
    if (b == e) continue;
    const double mx = *std::max_element(d.begin() + static_cast<std::ptrdiff_t>(b), d.begin() + static_cast<std::ptrdiff_t>(e));
    double z = 0.0;
    for (std::size_t k = b; k < e; ++k) {
      (*out)[k] = std::exp((d[k] - mx) / temperature);
      z += (*out)[k];
    }
    for (std::size_t k = b; k < e; ++k) (*out)[k] /= z;
  }
  std::vector<double> values = *out;
  return Tape::record(logits.shape(), std::move(values), {logits},
                      [out, index, temperature](std::span<const double> g, const GradSlots& gi) {
                        auto& dst = *gi[0];
                        for (std::size_t i = 0; i < index.rows; ++i) {
                          const std::size_t b = index.offsets[i], e = index.offsets[i + 1];
                          double dot = 0.0;
                          for (std::size_t k = b; k < e; ++k) dot += (*out)[k] * g[k];
                          for (std::size_t k = b; k < e; ++k) dst[k] += (*out)[k] * (g[k] - dot) / temperature;
                        }
                      });
}

Tensor sparse_matmul(const Tensor& x, const Tensor& values, const RowIndex& index) {
  require_rank("sparse_matmul", x, 2);
  if (x.dim(1) != index.rows || values.numel() != index.nnz()) {
    throw ShapeError("sparse_matmul: operand " + shape_str(x.shape()) + " does not fit a " +
                     std::to_string(index.rows) + "x" + std::to_string(index.cols) + " index");
  }
  const std::size_t n = x.dim(0);
  const auto dx = x.data();
  const auto dv = values.data();
  std::vector<double> out(n * index.cols, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < index.rows; ++i) {
      const double xv = dx[r * index.rows + i];
      if (xv == 0.0) continue;
      for (std::size_t e = index.offsets[i]; e < index.offsets[i + 1]; ++e)
        out[r * index.cols + index.columns[e]] += xv * dv[e];
    }
  return Tape::record({n, index.cols}, std::move(out), {x, values},
                      [x, values, index, n](std::span<const double> g, const GradSlots& gi) {
                        const auto dx = x.data();
                        const auto dv = values.data();
                        for (std::size_t r = 0; r < n; ++r)
                          for (std::size_t i = 0; i < index.rows; ++i) {
                            const double xv = dx[r * index.rows + i];
                            double s = 0.0;
                            for (std::size_t e = index.offsets[i]; e < index.offsets[i + 1]; ++e) {
                              const double go = g[r * index.cols + index.columns[e]];
                              s += go * dv[e];
                              if (gi[1]) (*gi[1])[e] += xv * go;
                            }
                            if (gi[0]) (*gi[0])[r * index.rows + i] += s;
                          }
                      });
}

}  // namespace ramwalk::diff
