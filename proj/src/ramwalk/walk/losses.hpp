#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ramwalk/diff/tensor.hpp"

namespace ramwalk::util {
class KeyValueConfig;
}
namespace ramwalk::world {
struct SceneSequence;
}
namespace ramwalk::model {
struct GridGeometry;
}

namespace ramwalk::walk {

using diff::Tensor;

struct LossWeights {
  double lambda_ram = 0.5;
  double lambda_over = 50.0;
  double tau = 0.1;
  double radius_frac = 0.2;
  double alpha = 2.0;
  double beta = 4.0;
  // When false the walker loss keeps only the positive term at the GT cell.
  bool negatives = true;
  double size_weight = 0.1;
  bool local_attention = true;

  void validate() const;
};

LossWeights weights_from_config(const util::KeyValueConfig& cfg, const std::string& section);

inline constexpr double kLogEpsilon = 1e-12;
inline constexpr double kMinOverlap = 0.7;

// Radius (in cells) of the center-heatmap Gaussian for a box of the given size,
// following the standard keypoint-heatmap rule with minimum overlap 0.7.
double gaussian_radius(double box_h, double box_w, double min_overlap = kMinOverlap);
double gaussian_sigma(double box_h, double box_w);

// 1 - exp(-d^2 / 2 sigma^2) over a [height, width] grid, with the center cell set to 1.
std::vector<double> smoothing_mask(int height, int width, std::size_t center, double sigma);

// Focal negative log-likelihood of a walker state [1, m] (or [m]) at cell `gt`
// after multiplying it by `mask`.
Tensor loss_nll(const Tensor& walker, std::size_t gt, const std::vector<double>& mask, double alpha, double beta,
                bool negatives = true);

// Ground truth for one object's walk inside a training window, on the walker grid.
struct WalkTarget {
  std::vector<std::optional<std::size_t>> cells;  // per frame, nullopt when redacted
  std::vector<double> sigma;                       // smoothing sigma per frame (visible frames)
};

// Walk targets for every target-class object visible at frame `start`, for
// frames [start, start + length). Expects a redacted sequence.
std::vector<WalkTarget> build_walk_targets(const world::SceneSequence& seq, const model::GridGeometry& geom,
                                           std::size_t start, std::size_t length);

// Average over objects of the per-frame walker losses summed over labeled frames.
// walkers[i][t] is object i's state at frame t.
Tensor loss_ram(const std::vector<std::vector<Tensor>>& walkers, const std::vector<WalkTarget>& targets,
                const model::GridGeometry& geom, const LossWeights& w);

// Walker mass that redacted objects place on the centers of other labeled
// objects, averaged over contributing (object, frame) pairs.
Tensor loss_overlap(const std::vector<std::vector<Tensor>>& walkers, const std::vector<WalkTarget>& targets);

// Keypoint focal loss of a center heatmap against a target map; normalized by
// the number of cells whose target equals 1 (at least 1).
Tensor center_focal_loss(const Tensor& heatmap, const std::vector<double>& target, double alpha, double beta);

struct SizeLabel {
  std::size_t cell = 0;
  double w = 0, h = 0;
};

// Mean L1 error of the size map [2, H, W] at labeled cells; 0 without labels.
Tensor size_l1_loss(const Tensor& sizes, const std::vector<SizeLabel>& labels);

// Center target map on the memory grid: per cell the maximum of the Gaussians
// of all labeled target-class objects at frame t.
std::vector<double> center_target(const world::SceneSequence& seq, const model::GridGeometry& geom, std::size_t t);
std::vector<SizeLabel> size_labels(const world::SceneSequence& seq, const model::GridGeometry& geom, std::size_t t);

Tensor total_loss(const Tensor& visible, const Tensor& ram, const Tensor& overlap, const LossWeights& w);

}  // namespace ramwalk::walk
