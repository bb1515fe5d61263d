// Test-side oracles: independent reimplementations used to derive expected
// values, plus finite-difference gradient checking.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "ramwalk/diff/ops.hpp"
#include "ramwalk/diff/tensor.hpp"
#include "ramwalk/world/world.hpp"

namespace ramwalk::oracle {

using diff::Shape;
using diff::Tensor;

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(diff::shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(shape, std::move(v));
}

inline Tensor with_value(const Tensor& t, std::size_t i, double value) {
  std::vector<double> v(t.data().begin(), t.data().end());
  v[i] = value;
  return Tensor(t.shape(), std::move(v));
}

struct GradCheck {
  double max_rel = 0.0;   // worst per-element relative error
  std::size_t checked = 0;
};

// Compares reverse-mode gradients of a scalar function against central
// differences. Per element the error is |analytic - numeric| divided by
// max(|analytic|, |numeric|, floor); the floor keeps near-zero gradients from
// dividing by rounding noise.
inline GradCheck check_gradients(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                                 const std::vector<Tensor>& inputs, double step = 1e-5, double floor = 1e-6) {
  diff::Tape tape;
  std::vector<Tensor> watched;
  for (std::size_t i = 0; i < inputs.size(); ++i) watched.push_back(tape.watch(inputs[i], i));
  const auto grads = tape.backward(f(watched));
  GradCheck out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto analytic = grads.at(i).data();
    for (std::size_t k = 0; k < inputs[i].numel(); ++k) {
      auto plus = inputs;
      auto minus = inputs;
      plus[i] = with_value(inputs[i], k, inputs[i][k] + step);
      minus[i] = with_value(inputs[i], k, inputs[i][k] - step);
      const double numeric = (f(plus).item() - f(minus).item()) / (2.0 * step);
      const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), floor});
      out.max_rel = std::max(out.max_rel, std::abs(analytic[k] - numeric) / denom);
      ++out.checked;
    }
  }
  return out;
}

// Scalar probe with a distinct fixed weight per output element, so an error
// in any single gradient entry is visible.
inline Tensor probe_sum(const Tensor& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return diff::sum(diff::mul(y, random_tensor(y.shape(), rng, -1.0, 1.0)));
}

// Unit-norm random node embeddings [D, H, W].
inline Tensor random_embeddings(std::size_t d, std::size_t h, std::size_t w, std::mt19937_64& rng) {
  return diff::reshape(
      diff::transpose(diff::l2_normalize(diff::transpose(diff::reshape(random_tensor({d, h, w}, rng), {d, h * w})))),
      {d, h, w});
}

// Row-stochastic random matrix, row-major [m, m]; roughly `zero_frac` of the
// entries are exactly zero.
inline std::vector<double> random_stochastic(std::size_t m, std::mt19937_64& rng, double zero_frac = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> a(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      a[i * m + j] = u(rng) < zero_frac && j != i ? 0.0 : u(rng);
      s += a[i * m + j];
    }
    for (std::size_t j = 0; j < m; ++j) a[i * m + j] /= s;
  }
  return a;
}

// x <- x A for each matrix in turn, dot products accumulated in index order.
inline std::vector<std::vector<double>> dense_chain(const std::vector<double>& x0,
                                                    const std::vector<std::vector<double>>& mats) {
  const std::size_t m = x0.size();
  std::vector<std::vector<double>> states{x0};
  for (const auto& a : mats) {
    const auto& x = states.back();
    std::vector<double> next(m);
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < m; ++p) s += x[p] * a[p * m + j];
      next[j] = s;
    }
    states.push_back(std::move(next));
  }
  return states;
}

// Depth rank used by the painter: targets < containers < occluders; later
// index nearer among equals.
inline int oracle_depth(world::ShapeClass s) {
  switch (s) {
    case world::ShapeClass::Target: return 0;
    case world::ShapeClass::Container: return 1;
    case world::ShapeClass::Occluder: return 2;
  }
  return 0;
}

inline bool box_has(const world::Box& b, int row, int col) {
  return col >= b.x && col < b.x + b.w && row >= b.y && row < b.y + b.h;
}

inline bool encloses(const world::Box& outer, const world::Box& inner) {
  return outer.x <= inner.x && outer.y <= inner.y && outer.x + outer.w >= inner.x + inner.w &&
         outer.y + outer.h >= inner.y + inner.h;
}

// Owner per pixel from the labeled boxes alone (-1 for background).
inline std::vector<int> oracle_owners(const world::SceneSequence& seq, std::size_t t) {
  const int H = seq.config.height, W = seq.config.width;
  std::vector<int> owner(static_cast<std::size_t>(H * W), -1);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      int best = -1;
      for (std::size_t k = 0; k < seq.tracks.size(); ++k) {
        if (!box_has(seq.tracks[k].entries[t]->box, r, c)) continue;
        if (best < 0 || oracle_depth(seq.tracks[k].shape) >= oracle_depth(seq.tracks[static_cast<std::size_t>(best)].shape))
          best = static_cast<int>(k);
      }
      owner[static_cast<std::size_t>(r * W + c)] = best;
    }
  return owner;
}

// Brute-force visibility state of object k at frame t from pixel coverage.
inline world::Visibility oracle_state(const world::SceneSequence& seq, std::size_t k, std::size_t t) {
  const auto owners = oracle_owners(seq, t);
  const auto& box = seq.tracks[k].entries[t]->box;
  const int W = seq.config.width;
  double covered = 0.0;
  for (int r = static_cast<int>(box.y); r < box.y + box.h; ++r)
    for (int c = static_cast<int>(box.x); c < box.x + box.w; ++c)
      if (owners[static_cast<std::size_t>(r * W + c)] != static_cast<int>(k)) covered += 1.0;
  if (covered < seq.config.coverage_threshold * box.area() - 1e-9) return world::Visibility::Visible;
  bool contained = false;
  for (std::size_t j = 0; j < seq.tracks.size(); ++j) {
    const auto& cj = seq.tracks[j];
    if (j == k || cj.shape != world::ShapeClass::Container ||
        oracle_depth(cj.shape) <= oracle_depth(seq.tracks[k].shape))
      continue;
    if (!encloses(cj.entries[t]->box, box)) continue;
    contained = true;
    if (t > 0 && !(cj.entries[t]->box == cj.entries[t - 1]->box) &&
        encloses(cj.entries[t - 1]->box, seq.tracks[k].entries[t - 1]->box))
      return world::Visibility::Carried;
  }
  return contained ? world::Visibility::Contained : world::Visibility::Occluded;
}

inline world::ObjectPath static_path(world::ShapeClass shape, int row, int col, int w, int h, std::size_t frames) {
  world::ObjectPath p;
  p.shape = shape;
  p.width = w;
  p.height = h;
  p.top_left.assign(frames, world::Cell{row, col});
  return p;
}

// 4x4, two frames: target A steps right behind a static occluder column while
// target B stays visible, so every loss term is active.
inline world::SceneSequence micro_scene() {
  world::ScenarioConfig c;
  c.height = 4;
  c.width = 4;
  c.length = 2;
  c.occluders = 1;
  auto a = static_path(world::ShapeClass::Target, 1, 0, 1, 1, 2);
  a.top_left[1] = world::Cell{1, 1};
  auto b = static_path(world::ShapeClass::Target, 3, 3, 1, 1, 2);
  auto occ = static_path(world::ShapeClass::Occluder, 0, 1, 1, 3, 2);
  return world::compose_scene(c, 11, {a, b, occ});
}

}  // namespace ramwalk::oracle
