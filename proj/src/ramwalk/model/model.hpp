#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ramwalk/diff/checkpoint.hpp"
#include "ramwalk/diff/tensor.hpp"

namespace ramwalk::util {
class KeyValueConfig;
}

namespace ramwalk::model {

using diff::Tensor;

struct ModelConfig {
  int in_channels = 4;
  int feat_channels = 16;
  int memory_channels = 32;
  int embed_channels = 16;
  int stride = 1;  // encoder downsampling
  int pool = 1;    // embedding-head max-pool kernel (and stride)
  int height = 16;
  int width = 16;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

ModelConfig model_from_config(const util::KeyValueConfig& cfg, const std::string& section);

// Pixel <-> grid mapping. The memory grid is the frame downsampled by
// `stride`; the walker grid is the memory grid max-pooled by `pool`.
struct GridGeometry {
  int memory_h = 0, memory_w = 0;
  int walker_h = 0, walker_w = 0;
  int stride = 1;
  int pool = 1;

  explicit GridGeometry(const ModelConfig& c);

  std::size_t memory_cells() const { return static_cast<std::size_t>(memory_h * memory_w); }
  std::size_t walker_cells() const { return static_cast<std::size_t>(walker_h * walker_w); }

  // Flat index of the grid cell containing pixel (row, col), clamped to the grid.
  std::size_t memory_index(double row, double col) const;
  std::size_t walker_index(double row, double col) const;
  // Pixel coordinates of a cell's center.
  std::array<double, 2> memory_center(std::size_t index) const;
  std::array<double, 2> walker_center(std::size_t index) const;
  double walker_scale() const { return static_cast<double>(stride * pool); }
};

enum ParamSlot : std::size_t {
  kEncoderW1,
  kEncoderB1,
  kEncoderW2,
  kEncoderB2,
  kUpdateW,
  kUpdateB,
  kResetW,
  kResetB,
  kCandidateW,
  kCandidateB,
  kCenterW,
  kCenterB,
  kSizeW,
  kSizeB,
  kEmbedW1,
  kEmbedB1,
  kEmbedW2,
  kEmbedB2,
  kParamCount
};

const char* param_name(std::size_t slot);
diff::Shape param_shape(const ModelConfig& c, std::size_t slot);
// Encoder and recurrent-memory parameters.
bool is_backbone(std::size_t slot);

struct ModelParams {
  ModelConfig config;
  std::array<Tensor, kParamCount> values;
};

ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
ModelParams zero_params(const ModelConfig& config);

// Parameter tensors as seen by one forward pass. Slots selected by
// `trainable` are watched on `tape` with their slot as id.
struct BoundParams {
  std::array<Tensor, kParamCount> t;
};

BoundParams bind(const ModelParams& params, diff::Tape* tape, const std::function<bool(std::size_t)>& trainable);
BoundParams bind_constant(const ModelParams& params);

Tensor encode_frame(const Tensor& frame, const BoundParams& p, const ModelConfig& c);
Tensor gru_step(const Tensor& features, const Tensor& memory_prev, const BoundParams& p);
Tensor initial_memory(const ModelConfig& c);
Tensor project_centers(const Tensor& memory, const BoundParams& p);  // [H', W']
Tensor predict_sizes(const Tensor& memory, const BoundParams& p);    // [2, H', W'], (w, h) in pixels
Tensor embed_nodes(const Tensor& memory, const BoundParams& p, const ModelConfig& c);  // [D_q, H'', W'']

struct FrameOutputs {
  Tensor memory;
  Tensor centers;
  Tensor sizes;
  Tensor embeddings;
};

// One recurrent step with all heads.
FrameOutputs step_frame(const Tensor& frame, const Tensor& memory_prev, const BoundParams& p, const ModelConfig& c);

std::vector<diff::NamedTensor> to_named(const ModelParams& params);
ModelParams from_named(const std::vector<diff::NamedTensor>& tensors);

void save_model(const std::string& path, const ModelParams& params);
ModelParams load_model(const std::string& path);
// Fails with a manifest error when the stored channel plan differs from `expected`.
ModelParams load_model(const std::string& path, const ModelConfig& expected);

bool same_params(const ModelParams& a, const ModelParams& b);

}  // namespace ramwalk::model
