#include "ramwalk/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "ramwalk/diff/ops.hpp"
#include "ramwalk/util/config.hpp"

namespace ramwalk::model {

namespace {

constexpr const char* kPlanName = "meta.plan";
constexpr double kUpdateGateBias = -1.0;
// Prior probability of about 0.1 for a center at any cell.
constexpr double kCenterBias = -2.19;

std::size_t ceil_div(int a, int b) { return static_cast<std::size_t>((a + b - 1) / b); }

diff::Shape conv_shape(int out, int in, int k) {
  return {static_cast<std::size_t>(out), static_cast<std::size_t>(in), static_cast<std::size_t>(k),
          static_cast<std::size_t>(k)};
}

diff::Shape bias_shape(int out) { return {static_cast<std::size_t>(out)}; }

std::vector<double> plan_values(const ModelConfig& c) {
  return {double(c.in_channels), double(c.feat_channels), double(c.memory_channels), double(c.embed_channels),
          double(c.stride),      double(c.pool),          double(c.height),          double(c.width)};
}

ModelConfig plan_from(const Tensor& t) {
  if (t.shape() != diff::Shape{8}) throw diff::CheckpointError("checkpoint: malformed " + std::string(kPlanName));
  auto v = [&](std::size_t i) { return static_cast<int>(std::lround(t[i])); };
  ModelConfig c{v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7)};
  c.validate();
  return c;
}

std::string plan_str(const ModelConfig& c) {
  return "in=" + std::to_string(c.in_channels) + " feat=" + std::to_string(c.feat_channels) +
         " memory=" + std::to_string(c.memory_channels) + " embed=" + std::to_string(c.embed_channels) +
         " stride=" + std::to_string(c.stride) + " pool=" + std::to_string(c.pool) +
         " grid=" + std::to_string(c.height) + "x" + std::to_string(c.width);
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string("model: ") + name + " must be >= 1");
  };
  positive(in_channels, "in_channels");
  positive(feat_channels, "feat_channels");
  positive(memory_channels, "memory_channels");
  positive(embed_channels, "embed_channels");
  positive(height, "height");
  positive(width, "width");
  if (stride != 1 && stride != 2) throw std::invalid_argument("model: stride must be 1 or 2");
  if (pool != 1 && pool != 3) throw std::invalid_argument("model: pool must be 1 or 3");
  if (static_cast<int>(ceil_div(height, stride)) < pool || static_cast<int>(ceil_div(width, stride)) < pool) {
    throw std::invalid_argument("model: memory grid smaller than the pooling kernel");
  }
}

ModelConfig model_from_config(const util::KeyValueConfig& cfg, const std::string& section) {
  ModelConfig c;
  auto get = [&](const char* key, int fallback) { return static_cast<int>(cfg.get_int(section, key, fallback)); };
  c.in_channels = get("in_channels", c.in_channels);
  c.feat_channels = get("feat_channels", c.feat_channels);
  c.memory_channels = get("memory_channels", c.memory_channels);
  c.embed_channels = get("embed_channels", c.embed_channels);
  c.stride = get("stride", c.stride);
  c.pool = get("pool", c.pool);
  c.height = get("height", c.height);
  c.width = get("width", c.width);
  c.validate();
  return c;
}

GridGeometry::GridGeometry(const ModelConfig& c) : stride(c.stride), pool(c.pool) {
  memory_h = static_cast<int>(ceil_div(c.height, c.stride));
  memory_w = static_cast<int>(ceil_div(c.width, c.stride));
  walker_h = static_cast<int>(ceil_div(memory_h, c.pool));
  walker_w = static_cast<int>(ceil_div(memory_w, c.pool));
}

std::size_t GridGeometry::memory_index(double row, double col) const {
  const int r = std::clamp(static_cast<int>(std::floor(row / stride)), 0, memory_h - 1);
  const int c = std::clamp(static_cast<int>(std::floor(col / stride)), 0, memory_w - 1);
  return static_cast<std::size_t>(r * memory_w + c);
}

std::size_t GridGeometry::walker_index(double row, double col) const {
  const double s = walker_scale();
  const int r = std::clamp(static_cast<int>(std::floor(row / s)), 0, walker_h - 1);
  const int c = std::clamp(static_cast<int>(std::floor(col / s)), 0, walker_w - 1);
  return static_cast<std::size_t>(r * walker_w + c);
}

std::array<double, 2> GridGeometry::memory_center(std::size_t index) const {
  const double s = stride;
  const auto r = static_cast<double>(index / static_cast<std::size_t>(memory_w));
  const auto c = static_cast<double>(index % static_cast<std::size_t>(memory_w));
  return {r * s + (s - 1) / 2.0, c * s + (s - 1) / 2.0};
}

std::array<double, 2> GridGeometry::walker_center(std::size_t index) const {
  const double s = walker_scale();
  const auto r = static_cast<double>(index / static_cast<std::size_t>(walker_w));
  const auto c = static_cast<double>(index % static_cast<std::size_t>(walker_w));
  return {r * s + (s - 1) / 2.0, c * s + (s - 1) / 2.0};
}

const char* param_name(std::size_t slot) {
  static constexpr std::array<const char*, kParamCount> names = {
      "encoder.conv1.weight", "encoder.conv1.bias",     "encoder.conv2.weight", "encoder.conv2.bias",
      "memory.update.weight", "memory.update.bias",     "memory.reset.weight",  "memory.reset.bias",
      "memory.candidate.weight", "memory.candidate.bias", "center.weight",      "center.bias",
      "size.weight",          "size.bias",              "embed.conv1.weight",   "embed.conv1.bias",
      "embed.conv2.weight",   "embed.conv2.bias"};
  return names.at(slot);
}

diff::Shape param_shape(const ModelConfig& c, std::size_t slot) {
  const int gru_in = c.feat_channels + c.memory_channels;
  switch (slot) {
    case kEncoderW1: return conv_shape(c.feat_channels, c.in_channels, 3);
    case kEncoderB1: return bias_shape(c.feat_channels);
    case kEncoderW2: return conv_shape(c.feat_channels, c.feat_channels, 3);
    case kEncoderB2: return bias_shape(c.feat_channels);
    case kUpdateW:
    case kResetW:
    case kCandidateW: return conv_shape(c.memory_channels, gru_in, 3);
    case kUpdateB:
    case kResetB:
    case kCandidateB: return bias_shape(c.memory_channels);
    case kCenterW: return conv_shape(1, c.memory_channels, 1);
    case kCenterB: return bias_shape(1);
    case kSizeW: return conv_shape(2, c.memory_channels, 1);
    case kSizeB: return bias_shape(2);
    case kEmbedW1: return conv_shape(c.embed_channels, c.memory_channels, 1);
    case kEmbedB1: return bias_shape(c.embed_channels);
    case kEmbedW2: return conv_shape(c.embed_channels, c.embed_channels, 1);
    case kEmbedB2: return bias_shape(c.embed_channels);
    default: throw std::out_of_range("model: unknown parameter slot");
  }
}

bool is_backbone(std::size_t slot) { return slot <= kCandidateB; }

ModelParams zero_params(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  for (std::size_t s = 0; s < kParamCount; ++s) p.values[s] = Tensor::zeros(param_shape(config, s));
  return p;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = zero_params(config);
  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < kParamCount; ++s) {
    const auto shape = param_shape(config, s);
    if (shape.size() == 4) {
      const double fan_in = static_cast<double>(shape[1] * shape[2] * shape[3]);
      const double a = std::sqrt(1.0 / fan_in);
      std::uniform_real_distribution<double> dist(-a, a);
      std::vector<double> v(diff::shape_numel(shape));
      for (auto& x : v) x = dist(rng);
      p.values[s] = Tensor(shape, std::move(v));
    } else if (s == kUpdateB) {
      p.values[s] = Tensor::filled(shape, kUpdateGateBias);
    } else if (s == kCenterB) {
      p.values[s] = Tensor::filled(shape, kCenterBias);
    }
  }
  return p;
}

BoundParams bind(const ModelParams& params, diff::Tape* tape, const std::function<bool(std::size_t)>& trainable) {
  BoundParams b;
  for (std::size_t s = 0; s < kParamCount; ++s) {
    b.t[s] = (tape && trainable(s)) ? tape->watch(params.values[s], s) : params.values[s];
  }
  return b;
}

BoundParams bind_constant(const ModelParams& params) {
  return bind(params, nullptr, [](std::size_t) { return false; });
}

Tensor encode_frame(const Tensor& frame, const BoundParams& p, const ModelConfig& c) {
  if (frame.rank() != 3 || frame.dim(0) != static_cast<std::size_t>(c.in_channels)) {
    throw diff::ShapeError("encode_frame: expected " + std::to_string(c.in_channels) + " input channels, got frame " +
                           diff::shape_str(frame.shape()));
  }
  auto h = diff::relu(diff::conv2d(frame, p.t[kEncoderW1], p.t[kEncoderB1]));
  h = diff::relu(diff::conv2d(h, p.t[kEncoderW2], p.t[kEncoderB2]));
  if (c.stride > 1) {
    const auto s = static_cast<std::size_t>(c.stride);
    h = diff::maxpool2d(h, s, s);
  }
  return h;
}

Tensor gru_step(const Tensor& features, const Tensor& memory_prev, const BoundParams& p) {
  if (features.rank() != 3 || memory_prev.rank() != 3 || features.dim(1) != memory_prev.dim(1) ||
      features.dim(2) != memory_prev.dim(2)) {
    throw diff::ShapeError("gru_step: features " + diff::shape_str(features.shape()) + " and memory " +
                           diff::shape_str(memory_prev.shape()) + " differ spatially");
  }
  const auto joint = diff::concat_channels({features, memory_prev});
  const auto update = diff::sigmoid(diff::conv2d(joint, p.t[kUpdateW], p.t[kUpdateB]));
  const auto reset = diff::sigmoid(diff::conv2d(joint, p.t[kResetW], p.t[kResetB]));
  const auto gated = diff::concat_channels({features, diff::mul(reset, memory_prev)});
  const auto candidate = diff::tanh(diff::conv2d(gated, p.t[kCandidateW], p.t[kCandidateB]));
  const auto keep = diff::sub(Tensor::filled(update.shape(), 1.0), update);
  return diff::add(diff::mul(keep, memory_prev), diff::mul(update, candidate));
}

Tensor initial_memory(const ModelConfig& c) {
  const GridGeometry g(c);
  return Tensor::zeros({static_cast<std::size_t>(c.memory_channels), static_cast<std::size_t>(g.memory_h),
                        static_cast<std::size_t>(g.memory_w)});
}

Tensor project_centers(const Tensor& memory, const BoundParams& p) {
  const auto logits = diff::conv2d(memory, p.t[kCenterW], p.t[kCenterB]);
  return diff::reshape(diff::sigmoid(logits), {memory.dim(1), memory.dim(2)});
}

Tensor predict_sizes(const Tensor& memory, const BoundParams& p) {
  return diff::conv2d(memory, p.t[kSizeW], p.t[kSizeB]);
}

Tensor embed_nodes(const Tensor& memory, const BoundParams& p, const ModelConfig& c) {
  Tensor h = memory;
  if (c.pool > 1) {
    const auto k = static_cast<std::size_t>(c.pool);
    h = diff::maxpool2d(h, k, k);
  }
  h = diff::relu(diff::conv2d(h, p.t[kEmbedW1], p.t[kEmbedB1]));
  h = diff::conv2d(h, p.t[kEmbedW2], p.t[kEmbedB2]);
  const std::size_t d = h.dim(0), rows = h.dim(1), cols = h.dim(2);
  const auto nodes = diff::l2_normalize(diff::transpose(diff::reshape(h, {d, rows * cols})));
  return diff::reshape(diff::transpose(nodes), {d, rows, cols});
}

FrameOutputs step_frame(const Tensor& frame, const Tensor& memory_prev, const BoundParams& p, const ModelConfig& c) {
  FrameOutputs out;
  out.memory = gru_step(encode_frame(frame, p, c), memory_prev, p);
  out.centers = project_centers(out.memory, p);
  out.sizes = predict_sizes(out.memory, p);
  out.embeddings = embed_nodes(out.memory, p, c);
  return out;
}

std::vector<diff::NamedTensor> to_named(const ModelParams& params) {
  std::vector<diff::NamedTensor> out;
  out.push_back({kPlanName, Tensor({8}, plan_values(params.config))});
  for (std::size_t s = 0; s < kParamCount; ++s) out.push_back({param_name(s), params.values[s]});
  return out;
}

ModelParams from_named(const std::vector<diff::NamedTensor>& tensors) {
  auto plan = std::find_if(tensors.begin(), tensors.end(), [](const auto& t) { return t.name == kPlanName; });
  if (plan == tensors.end()) throw diff::CheckpointError("checkpoint: missing " + std::string(kPlanName));
  ModelParams p = zero_params(plan_from(plan->value));
  diff::check_manifest(to_named(p), tensors);
  for (const auto& t : tensors) {
    for (std::size_t s = 0; s < kParamCount; ++s)
      if (t.name == param_name(s)) p.values[s] = t.value;
  }
  return p;
}

void save_model(const std::string& path, const ModelParams& params) {
  diff::save_checkpoint_file(path, to_named(params));
}

ModelParams load_model(const std::string& path) { return from_named(diff::load_checkpoint_file(path)); }

ModelParams load_model(const std::string& path, const ModelConfig& expected) {
  const auto tensors = diff::load_checkpoint_file(path);
  auto reference = to_named(zero_params(expected));
  reference.front().value = Tensor({8}, plan_values(expected));
  try {
    diff::check_manifest(reference, tensors);
  } catch (const diff::CheckpointError& e) {
    throw diff::CheckpointError(std::string(e.what()) + " (expected channel plan " + plan_str(expected) + ")");
  }
  ModelParams p = from_named(tensors);
  if (!(p.config == expected)) {
    throw diff::CheckpointError("checkpoint: channel plan " + plan_str(p.config) + " does not match expected " +
                                plan_str(expected));
  }
  return p;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  if (!(a.config == b.config)) return false;
  for (std::size_t s = 0; s < kParamCount; ++s)
    if (!diff::same_values(a.values[s], b.values[s])) return false;
  return true;
}

}  // namespace ramwalk::model
