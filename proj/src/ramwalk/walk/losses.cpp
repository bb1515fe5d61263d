#include "ramwalk/walk/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ramwalk/diff/ops.hpp"
#include "ramwalk/model/model.hpp"
#include "ramwalk/util/config.hpp"
#include "ramwalk/world/world.hpp"

namespace ramwalk::walk {

void LossWeights::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("loss weights: tau must be positive");
  if (lambda_ram < 0.0 || lambda_over < 0.0 || size_weight < 0.0) {
    throw std::invalid_argument("loss weights: lambdas must be non-negative");
  }
  if (!(radius_frac > 0.0)) throw std::invalid_argument("loss weights: radius_frac must be positive");
  if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("loss weights: focal exponents must be non-negative");
}

LossWeights weights_from_config(const util::KeyValueConfig& cfg, const std::string& section) {
  LossWeights w;
  w.lambda_ram = cfg.get_double(section, "lambda_ram", w.lambda_ram);
  w.lambda_over = cfg.get_double(section, "lambda_over", w.lambda_over);
  w.tau = cfg.get_double(section, "tau", w.tau);
  w.radius_frac = cfg.get_double(section, "radius_frac", w.radius_frac);
  w.alpha = cfg.get_double(section, "focal_alpha", w.alpha);
  w.beta = cfg.get_double(section, "focal_beta", w.beta);
  w.negatives = cfg.get_bool(section, "walk_negatives", w.negatives);
  w.size_weight = cfg.get_double(section, "size_weight", w.size_weight);
  w.local_attention = cfg.get_bool(section, "local_attention", w.local_attention);
  w.validate();
  return w;
}

double gaussian_radius(double box_h, double box_w, double min_overlap) {
  const double m = min_overlap;
  const double b1 = box_h + box_w;
  const double c1 = box_w * box_h * (1 - m) / (1 + m);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4 * c1)) / 2;
  const double b2 = 2 * (box_h + box_w);
  const double c2 = (1 - m) * box_w * box_h;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 16 * c2)) / 2;
  const double a3 = 4 * m;
  const double b3 = -2 * m * (box_h + box_w);
  const double c3 = (m - 1) * box_w * box_h;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4 * a3 * c3)) / 2;
  return std::min({r1, r2, r3});
}

double gaussian_sigma(double box_h, double box_w) {
  const double radius = std::max(0.0, std::floor(gaussian_radius(box_h, box_w)));
  return (2 * radius + 1) / 6.0;
}

std::vector<double> smoothing_mask(int height, int width, std::size_t center, double sigma) {
  const auto cells = static_cast<std::size_t>(height * width);
  if (center >= cells) throw std::out_of_range("smoothing_mask: center outside the grid");
  const int cr = static_cast<int>(center) / width;
  const int cc = static_cast<int>(center) % width;
  std::vector<double> mask(cells);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double d2 = double((r - cr) * (r - cr) + (c - cc) * (c - cc));
      mask[static_cast<std::size_t>(r * width + c)] = 1.0 - std::exp(-d2 / (2 * sigma * sigma));
    }
  }
  mask[center] = 1.0;
  return mask;
}

namespace {

// Focal loss over x' = scale * x: positive cells contribute
// -(1 - x')^alpha log x', other cells -weight * x'^alpha log(1 - x').
// The result is divided by `norm`.
Tensor focal(const Tensor& x, const std::vector<double>& scale, const std::vector<char>& positive,
             const std::vector<double>& neg_weight, double alpha, double norm) {
  const auto n = x.numel();
  if (scale.size() != n || positive.size() != n || neg_weight.size() != n) {
    throw diff::ShapeError("focal loss: map of " + std::to_string(n) + " cells does not match its weights");
  }
  const auto xv = x.data();
  auto pow_or_one = [](double base, double e) { return e == 0.0 ? 1.0 : std::pow(base, e); };
  auto dpow = [](double base, double e) { return e == 0.0 ? 0.0 : e * std::pow(base, e - 1.0); };
  double total = 0.0;
  std::vector<double> grad(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double xp = scale[k] * xv[k];
    double g = 0.0;
    if (positive[k]) {
      const double lp = std::log(std::max(xp, kLogEpsilon));
      total += -pow_or_one(1.0 - xp, alpha) * lp;
      g = dpow(1.0 - xp, alpha) * lp - (xp > kLogEpsilon ? pow_or_one(1.0 - xp, alpha) / xp : 0.0);
    } else if (neg_weight[k] != 0.0) {
      const double q = 1.0 - xp;
      const double lq = std::log(std::max(q, kLogEpsilon));
      total += -neg_weight[k] * pow_or_one(xp, alpha) * lq;
      g = -neg_weight[k] * (dpow(xp, alpha) * lq - (q > kLogEpsilon ? pow_or_one(xp, alpha) / q : 0.0));
    }
    grad[k] = g * scale[k] / norm;
  }
  return diff::Tape::record({}, {total / norm}, {x}, [grad = std::move(grad)](auto g_out, const diff::GradSlots& in) {
    if (!in[0]) return;
    for (std::size_t k = 0; k < grad.size(); ++k) (*in[0])[k] += g_out[0] * grad[k];
  });
}

Tensor accumulate(const std::vector<Tensor>& terms) {
  if (terms.empty()) return Tensor::scalar(0.0);
  Tensor acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = diff::add(acc, terms[i]);
  return acc;
}

}  // namespace

Tensor loss_nll(const Tensor& walker, std::size_t gt, const std::vector<double>& mask, double alpha, double beta,
                bool negatives) {
  const auto n = walker.numel();
  if (gt >= n) throw std::out_of_range("loss_nll: ground-truth cell outside the walker grid");
  std::vector<char> positive(n, 0);
  positive[gt] = 1;
  std::vector<double> neg(n, 0.0);
  if (negatives)
    for (std::size_t k = 0; k < n; ++k) neg[k] = std::pow(mask[k], beta);
  return focal(walker, mask, positive, neg, alpha, 1.0);
}

std::vector<WalkTarget> build_walk_targets(const world::SceneSequence& seq, const model::GridGeometry& geom,
                                           std::size_t start, std::size_t length) {
  if (start + length > seq.length()) throw std::out_of_range("build_walk_targets: window exceeds the sequence");
  const double s = geom.walker_scale();
  std::vector<WalkTarget> out;
  for (const auto& tr : seq.tracks) {
    if (tr.shape != world::ShapeClass::Target) continue;
    const auto& first = tr.entries[start];
    if (!first || first->state != world::Visibility::Visible) continue;
    WalkTarget wt;
    wt.cells.resize(length);
    wt.sigma.assign(length, 0.0);
    for (std::size_t t = 0; t < length; ++t) {
      const auto& e = tr.entries[start + t];
      if (!e || e->state != world::Visibility::Visible) continue;
      wt.cells[t] = geom.walker_index(e->center.row, e->center.col);
      wt.sigma[t] = gaussian_sigma(e->box.h / s, e->box.w / s);
    }
    out.push_back(std::move(wt));
  }
  return out;
}

Tensor loss_ram(const std::vector<std::vector<Tensor>>& walkers, const std::vector<WalkTarget>& targets,
                const model::GridGeometry& geom, const LossWeights& w) {
  if (walkers.size() != targets.size()) throw std::invalid_argument("loss_ram: one rollout per object required");
  if (targets.empty()) return Tensor::scalar(0.0);
  std::vector<Tensor> per_object;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    std::vector<Tensor> terms;
    const auto& cells = targets[i].cells;
    for (std::size_t t = 0; t < cells.size() && t < walkers[i].size(); ++t) {
      if (!cells[t]) continue;
      const auto mask = smoothing_mask(geom.walker_h, geom.walker_w, *cells[t], targets[i].sigma[t]);
      terms.push_back(loss_nll(walkers[i][t], *cells[t], mask, w.alpha, w.beta, w.negatives));
    }
    per_object.push_back(accumulate(terms));
  }
  return diff::scale(accumulate(per_object), 1.0 / static_cast<double>(targets.size()));
}

Tensor loss_overlap(const std::vector<std::vector<Tensor>>& walkers, const std::vector<WalkTarget>& targets) {
  if (walkers.size() != targets.size()) throw std::invalid_argument("loss_overlap: one rollout per object required");
  std::vector<Tensor> terms;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (std::size_t t = 0; t < targets[i].cells.size() && t < walkers[i].size(); ++t) {
      if (targets[i].cells[t]) continue;
      std::vector<std::size_t> others;
      for (std::size_t j = 0; j < targets.size(); ++j)
        if (j != i && t < targets[j].cells.size() && targets[j].cells[t]) others.push_back(*targets[j].cells[t]);
      if (others.empty()) continue;
      terms.push_back(diff::sum(diff::gather(walkers[i][t], others)));
    }
  }
  if (terms.empty()) return Tensor::scalar(0.0);
  return diff::scale(accumulate(terms), 1.0 / static_cast<double>(terms.size()));
}

Tensor center_focal_loss(const Tensor& heatmap, const std::vector<double>& target, double alpha, double beta) {
  const auto n = heatmap.numel();
  if (target.size() != n) throw diff::ShapeError("center_focal_loss: target size differs from heatmap");
  std::vector<char> positive(n, 0);
  std::vector<double> neg(n, 0.0);
  std::size_t count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (target[k] == 1.0) {
      positive[k] = 1;
      ++count;
    } else {
      neg[k] = std::pow(1.0 - target[k], beta);
    }
  }
  return focal(heatmap, std::vector<double>(n, 1.0), positive, neg, alpha, static_cast<double>(std::max<std::size_t>(1, count)));
}

Tensor size_l1_loss(const Tensor& sizes, const std::vector<SizeLabel>& labels) {
  if (sizes.rank() != 3 || sizes.dim(0) != 2) throw diff::ShapeError("size_l1_loss: expected [2,H,W] sizes");
  if (labels.empty()) return Tensor::scalar(0.0);
  const std::size_t plane = sizes.dim(1) * sizes.dim(2);
  const auto v = sizes.data();
  const double norm = static_cast<double>(labels.size());
  double total = 0.0;
  std::vector<std::pair<std::size_t, double>> grads;
  for (const auto& l : labels) {
    if (l.cell >= plane) throw std::out_of_range("size_l1_loss: label cell outside the map");
    const double dw = v[l.cell] - l.w;
    const double dh = v[plane + l.cell] - l.h;
    total += std::abs(dw) + std::abs(dh);
    auto sign = [](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); };
    grads.emplace_back(l.cell, sign(dw) / norm);
    grads.emplace_back(plane + l.cell, sign(dh) / norm);
  }
  return diff::Tape::record({}, {total / norm}, {sizes}, [grads = std::move(grads)](auto g_out, const diff::GradSlots& in) {
    if (!in[0]) return;
    for (const auto& [k, g] : grads) (*in[0])[k] += g_out[0] * g;
  });
}

std::vector<double> center_target(const world::SceneSequence& seq, const model::GridGeometry& geom, std::size_t t) {
  std::vector<double> map(geom.memory_cells(), 0.0);
  const double s = geom.stride;
  for (const auto& tr : seq.tracks) {
    if (tr.shape != world::ShapeClass::Target) continue;
    const auto& e = tr.entries.at(t);
    if (!e || e->state != world::Visibility::Visible) continue;
    const std::size_t c = geom.memory_index(e->center.row, e->center.col);
    const double sigma = gaussian_sigma(e->box.h / s, e->box.w / s);
    const int cr = static_cast<int>(c) / geom.memory_w;
    const int cc = static_cast<int>(c) % geom.memory_w;
    for (int r = 0; r < geom.memory_h; ++r) {
      for (int col = 0; col < geom.memory_w; ++col) {
        const double d2 = double((r - cr) * (r - cr) + (col - cc) * (col - cc));
        auto& v = map[static_cast<std::size_t>(r * geom.memory_w + col)];
        v = std::max(v, std::exp(-d2 / (2 * sigma * sigma)));
      }
    }
    map[c] = 1.0;
  }
  return map;
}

std::vector<SizeLabel> size_labels(const world::SceneSequence& seq, const model::GridGeometry& geom, std::size_t t) {
  std::vector<SizeLabel> out;
  for (const auto& tr : seq.tracks) {
    if (tr.shape != world::ShapeClass::Target) continue;
    const auto& e = tr.entries.at(t);
    if (!e || e->state != world::Visibility::Visible) continue;
    out.push_back({geom.memory_index(e->center.row, e->center.col), e->box.w, e->box.h});
  }
  return out;
}

Tensor total_loss(const Tensor& visible, const Tensor& ram, const Tensor& overlap, const LossWeights& w) {
  Tensor out = visible;
  if (w.lambda_ram != 0.0) out = diff::add(out, diff::scale(ram, w.lambda_ram));
  if (w.lambda_over != 0.0) out = diff::add(out, diff::scale(overlap, w.lambda_over));
  return out;
}

}  // namespace ramwalk::walk
