#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ramwalk/model/model.hpp"
#include "ramwalk/walk/losses.hpp"
#include "ramwalk/world/world.hpp"

namespace ramwalk::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 4;
  int iterations = 0;  // optimizer steps per epoch; 0 means one pass over the dataset
  int seq_len = 16;
  walk::LossWeights weights;
  std::uint64_t seed = 0;
  bool occlusion_only = false;
  bool freeze_backbone = false;
  int accumulate = 1;
  int decay_step = 0;  // epochs between learning-rate decays; 0 disables
  double decay_factor = 0.1;
  double max_grad_norm = 0.0;  // global gradient clipping; 0 disables
  int workers = 1;

  void validate() const;
};

TrainConfig train_from_config(const util::KeyValueConfig& cfg, const std::string& section);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochRecord {
  int epoch = 0;
  double loss_vis = 0;
  double loss_ram = 0;
  double loss_over = 0;
  double loss_total = 0;
  double wall_seconds = 0;
  std::size_t steps = 0;
};

std::string to_json_line(const EpochRecord& r);

struct Objective {
  diff::Tensor total;
  double visible = 0;
  double ram = 0;
  double overlap = 0;
};

// Full training objective for frames [start, start + length) of a redacted
// sequence under bound parameters.
Objective sequence_objective(const model::BoundParams& p, const model::ModelConfig& mc,
                             const world::SceneSequence& redacted, std::size_t start, std::size_t length,
                             const walk::LossWeights& w);

// Adaptive-moment optimizer state over the model's parameter slots.
class Adam {
 public:
  Adam(const TrainConfig& cfg, const model::ModelParams& params);
  // Applies one update to every slot present in `grads`.
  void step(model::ModelParams& params, const diff::Gradients& grads, double learning_rate);
  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::array<std::vector<double>, model::kParamCount> m_, v_;
};

struct TrainResult {
  model::ModelParams params;
  std::vector<EpochRecord> log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Windows eligible for training: (sequence index, start frame).
std::vector<std::pair<std::size_t, std::size_t>> training_windows(const std::vector<world::SceneSequence>& redacted,
                                                                  const TrainConfig& cfg);

TrainResult train(const std::vector<world::SceneSequence>& dataset, const model::ModelParams& init,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Long-sequence phase with encoder and memory parameters frozen.
TrainResult freeze_finetune(const std::vector<world::SceneSequence>& dataset, const model::ModelParams& params,
                            TrainConfig cfg, const EpochCallback& on_epoch = {});

}  // namespace ramwalk::train
