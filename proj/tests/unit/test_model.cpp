#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "ramwalk/diff/checkpoint.hpp"
#include "ramwalk/model/model.hpp"

using namespace ramwalk;
using diff::Tensor;
using model::ModelConfig;

namespace {

ModelConfig tiny(int in = 1, int stride = 1, int pool = 1, int size = 6) {
  ModelConfig c;
  c.in_channels = in;
  c.feat_channels = 3;
  c.memory_channels = 4;
  c.embed_channels = 3;
  c.stride = stride;
  c.pool = pool;
  c.height = size;
  c.width = size;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("ramwalk_test_" + name)).string();
}

model::ModelParams with_bias(model::ModelParams p, std::size_t slot, double value) {
  p.values[slot] = Tensor::filled(p.values[slot].shape(), value);
  return p;
}

}  // namespace

TEST(Model, ZeroFrameZeroBiasesGiveZeroFeatures) {
  auto p = model::init_params(tiny(), 1);
  p = with_bias(with_bias(p, model::kEncoderB1, 0.0), model::kEncoderB2, 0.0);
  const auto f = model::encode_frame(Tensor::zeros({1, 6, 6}), model::bind_constant(p), p.config);
  for (double v : f.data()) EXPECT_EQ(v, 0.0);
}

TEST(Model, EncoderOutputIsCeilDownsampled) {
  for (int stride : {1, 2}) {
    const auto c = tiny(1, stride, 1, 7);
    const auto p = model::init_params(c, 2);
    const auto f = model::encode_frame(Tensor::zeros({1, 7, 7}), model::bind_constant(p), c);
    const auto expect = static_cast<std::size_t>((7 + stride - 1) / stride);
    EXPECT_EQ(f.shape(), (diff::Shape{3, expect, expect}));
  }
}

TEST(Model, EncoderRejectsChannelMismatch) {
  const auto p = model::init_params(tiny(2), 1);
  EXPECT_THROW(model::encode_frame(Tensor::zeros({1, 6, 6}), model::bind_constant(p), p.config), diff::ShapeError);
}

TEST(Model, EncoderFiniteDifference) {
  const auto p = model::init_params(tiny(), 3);
  std::mt19937_64 rng(3);
  const auto frame = oracle::random_tensor({1, 6, 6}, rng);
  const auto r = oracle::check_gradients(
      [&](const std::vector<Tensor>& in) {
        auto b = model::bind_constant(p);
        b.t[model::kEncoderW1] = in[1];
        b.t[model::kEncoderB1] = in[2];
        b.t[model::kEncoderW2] = in[3];
        b.t[model::kEncoderB2] = in[4];
        return diff::sum(diff::tanh(model::encode_frame(in[0], b, p.config)));
      },
      {frame, p.values[model::kEncoderW1], p.values[model::kEncoderB1], p.values[model::kEncoderW2],
       p.values[model::kEncoderB2]});
  EXPECT_LT(r.max_rel, 1e-4);
}

TEST(Gru, ClosedUpdateGateKeepsMemory) {
  const auto p = with_bias(model::init_params(tiny(), 4), model::kUpdateB, -1000.0);
  std::mt19937_64 rng(4);
  const auto f = oracle::random_tensor({3, 6, 6}, rng);
  const auto m = oracle::random_tensor({4, 6, 6}, rng, -0.9, 0.9);
  EXPECT_TRUE(diff::same_values(model::gru_step(f, m, model::bind_constant(p)), m));
}

TEST(Gru, OpenUpdateGateReplacesMemory) {
  auto p = with_bias(model::init_params(tiny(), 5), model::kUpdateB, 1000.0);
  p = with_bias(p, model::kResetB, -1000.0);
  std::mt19937_64 rng(5);
  const auto f = oracle::random_tensor({3, 6, 6}, rng);
  const auto b = model::bind_constant(p);
  const auto m1 = model::gru_step(f, oracle::random_tensor({4, 6, 6}, rng, -0.9, 0.9), b);
  const auto m2 = model::gru_step(f, oracle::random_tensor({4, 6, 6}, rng, -0.9, 0.9), b);
  EXPECT_TRUE(diff::same_values(m1, m2));
  // With the reset gate closed the candidate sees only the features.
  const auto zero_memory = diff::concat_channels({f, Tensor::zeros({4, 6, 6})});
  const auto candidate = diff::tanh(diff::conv2d(zero_memory, p.values[model::kCandidateW], p.values[model::kCandidateB]));
  EXPECT_TRUE(diff::same_values(m1, candidate));
}

TEST(Gru, RejectsSpatialMismatch) {
  const auto p = model::init_params(tiny(), 6);
  EXPECT_THROW(model::gru_step(Tensor::zeros({3, 6, 6}), Tensor::zeros({4, 5, 6}), model::bind_constant(p)),
               diff::ShapeError);
}

TEST(Gru, FiniteDifference) {
  const auto p = model::init_params(tiny(1, 1, 1, 4), 7);
  std::mt19937_64 rng(7);
  const auto f = oracle::random_tensor({3, 4, 4}, rng);
  const auto m = oracle::random_tensor({4, 4, 4}, rng, -0.9, 0.9);
  const auto r = oracle::check_gradients(
      [&](const std::vector<Tensor>& in) {
        auto b = model::bind_constant(p);
        for (std::size_t s = model::kUpdateW; s <= model::kCandidateB; ++s) b.t[s] = in[2 + s - model::kUpdateW];
        return oracle::probe_sum(model::gru_step(in[0], in[1], b));
      },
      {f, m, p.values[model::kUpdateW], p.values[model::kUpdateB], p.values[model::kResetW], p.values[model::kResetB],
       p.values[model::kCandidateW], p.values[model::kCandidateB]});
  EXPECT_LT(r.max_rel, 1e-4);
}

TEST(Model, MemoryStaysInsideOpenUnitInterval) {
  const auto c = tiny(4, 1, 1, 8);
  const auto p = model::init_params(c, 8);
  const auto b = model::bind_constant(p);
  std::mt19937_64 rng(8);
  auto m = model::initial_memory(c);
  for (int t = 0; t < 30; ++t) {
    m = model::step_frame(oracle::random_tensor({4, 8, 8}, rng, 0.0, 3.0), m, b, c).memory;
    for (double v : m.data()) ASSERT_TRUE(v > -1.0 && v < 1.0);
  }
}

TEST(Model, StepFrameEqualsSequentialGruSteps) {
  const auto c = tiny(4, 2, 1, 8);
  const auto p = model::init_params(c, 9);
  const auto b = model::bind_constant(p);
  std::mt19937_64 rng(9);
  auto m1 = model::initial_memory(c);
  auto m2 = m1;
  for (int t = 0; t < 6; ++t) {
    const auto frame = oracle::random_tensor({4, 8, 8}, rng, 0.0, 1.0);
    m1 = model::step_frame(frame, m1, b, c).memory;
    m2 = model::gru_step(model::encode_frame(frame, b, c), m2, b);
    ASSERT_TRUE(diff::same_values(m1, m2));
  }
}

TEST(Heads, ZeroParamsGiveHalfHeatmap) {
  const auto c = tiny();
  const auto p = model::zero_params(c);
  std::mt19937_64 rng(10);
  const auto h = model::project_centers(oracle::random_tensor({4, 6, 6}, rng), model::bind_constant(p));
  EXPECT_EQ(h.shape(), (diff::Shape{6, 6}));
  for (double v : h.data()) EXPECT_EQ(v, 0.5);
}

TEST(Heads, HeatmapInUnitRangeAndSizesShaped) {
  const auto c = tiny();
  const auto p = model::init_params(c, 11);
  std::mt19937_64 rng(11);
  const auto m = oracle::random_tensor({4, 6, 6}, rng, -1, 1);
  const auto heat = model::project_centers(m, model::bind_constant(p));
  for (double v : heat.data()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  EXPECT_EQ(model::predict_sizes(m, model::bind_constant(p)).shape(), (diff::Shape{2, 6, 6}));
}

TEST(Heads, EmbeddingsAreUnitOrZero) {
  for (int pool : {1, 3}) {
    const auto c = tiny(1, 1, pool, 9);
    const auto p = model::init_params(c, 12);
    std::mt19937_64 rng(12);
    const auto e = model::embed_nodes(oracle::random_tensor({4, 9, 9}, rng, -1, 1), model::bind_constant(p), c);
    const std::size_t side = pool == 1 ? 9 : 3;
    ASSERT_EQ(e.shape(), (diff::Shape{3, side, side}));
    for (std::size_t i = 0; i < side * side; ++i) {
      double n = 0.0;
      for (std::size_t d = 0; d < 3; ++d) n += e[d * side * side + i] * e[d * side * side + i];
      if (n != 0.0) {
        EXPECT_NEAR(std::sqrt(n), 1.0, 1e-9);
      }
    }
  }
}

TEST(Init, DeclaredBiasesAndBounds) {
  const ModelConfig c;
  const auto p = model::init_params(c, 13);
  for (double v : p.values[model::kUpdateB].data()) EXPECT_EQ(v, -1.0);
  for (double v : p.values[model::kCenterB].data()) EXPECT_EQ(v, -2.19);
  const double bound = std::sqrt(1.0 / (c.in_channels * 9));
  for (double v : p.values[model::kEncoderW1].data()) EXPECT_LE(std::abs(v), bound);
  EXPECT_TRUE(model::same_params(p, model::init_params(c, 13)));
  EXPECT_FALSE(model::same_params(p, model::init_params(c, 14)));
}

TEST(Geometry, CellMapping) {
  auto c = tiny(4, 2, 3, 16);
  const model::GridGeometry g(c);
  EXPECT_EQ(g.memory_h, 8);
  EXPECT_EQ(g.walker_h, 3);
  EXPECT_EQ(g.memory_index(5.0, 3.0), static_cast<std::size_t>(2 * 8 + 1));
  EXPECT_EQ(g.walker_index(15.0, 15.0), static_cast<std::size_t>(2 * 3 + 2));
  const auto center = g.memory_center(0);
  EXPECT_DOUBLE_EQ(center[0], 0.5);
  EXPECT_DOUBLE_EQ(g.walker_scale(), 6.0);
}

TEST(Checkpoint, RoundTripPreservesParamsAndForward) {
  const ModelConfig c;
  const auto p = model::init_params(c, 15);
  const auto path = temp_path("roundtrip.ckpt");
  model::save_model(path, p);
  const auto q = model::load_model(path);
  EXPECT_TRUE(model::same_params(p, q));
  std::mt19937_64 rng(15);
  const auto frame = oracle::random_tensor({4, 16, 16}, rng, 0, 1);
  const auto a = model::step_frame(frame, model::initial_memory(c), model::bind_constant(p), c);
  const auto b = model::step_frame(frame, model::initial_memory(c), model::bind_constant(q), c);
  EXPECT_TRUE(diff::same_values(a.centers, b.centers));
  EXPECT_TRUE(diff::same_values(a.embeddings, b.embeddings));
  std::filesystem::remove(path);
}

TEST(Checkpoint, DifferentChannelPlanIsAManifestError) {
  const auto path = temp_path("plan.ckpt");
  model::save_model(path, model::init_params(ModelConfig{}, 16));
  ModelConfig other;
  other.memory_channels = 8;
  EXPECT_THROW(model::load_model(path, other), diff::CheckpointError);
  EXPECT_NO_THROW(model::load_model(path, ModelConfig{}));
  std::filesystem::remove(path);
}

TEST(Checkpoint, ParameterNamesAreStable) {
  EXPECT_STREQ(model::param_name(model::kEncoderW1), "encoder.conv1.weight");
  EXPECT_STREQ(model::param_name(model::kUpdateW), "memory.update.weight");
  EXPECT_STREQ(model::param_name(model::kEmbedB2), "embed.conv2.bias");
}
