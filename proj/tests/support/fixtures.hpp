// Shared fixtures built on the library: the end-to-end objective check.
#pragma once

#include "oracles.hpp"
#include "ramwalk/diff/ops.hpp"
#include "ramwalk/metrics/metrics.hpp"
#include "ramwalk/model/model.hpp"
#include "ramwalk/track/tracker.hpp"
#include "ramwalk/train/trainer.hpp"

namespace ramwalk::oracle {

inline model::ModelConfig micro_model_config() {
  model::ModelConfig c;
  c.feat_channels = 3;
  c.memory_channels = 4;
  c.embed_channels = 3;
  c.height = 4;
  c.width = 4;
  return c;
}

// Central-difference check of the full training objective with respect to
// every model parameter on the 4x4, two-frame micro scene.
inline GradCheck objective_gradient_check(bool local_attention, std::uint64_t seed) {
  const auto seq = world::redact_for_training(micro_scene());
  const auto config = micro_model_config();
  // Random offsets on every slot keep relu inputs off their kink; with the
  // zero initial biases many sit exactly at 0 on the blank micro frames.
  auto params = model::init_params(config, seed);
  std::mt19937_64 rng(seed);
  for (auto& v : params.values) v = diff::add(v, random_tensor(v.shape(), rng, -0.5, 0.5));
  walk::LossWeights w;
  w.local_attention = local_attention;
  w.radius_frac = 0.75;  // radius 3 on the 4-row grid
  std::vector<Tensor> inputs(params.values.begin(), params.values.end());
  return check_gradients(
      [&](const std::vector<Tensor>& in) {
        model::BoundParams b;
        for (std::size_t s = 0; s < model::kParamCount; ++s) b.t[s] = in[s];
        return train::sequence_objective(b, config, seq, 0, 2, w).total;
      },
      inputs);
}

// Weights whose center heatmap fires on target pixels of the current frame
// (about 0.99995 there, 4.5e-5 elsewhere) with unit boxes and zero
// embeddings. Memory holds only the current frame.
inline model::ModelParams handcrafted_detector(int height, int width) {
  model::ModelConfig c;
  c.feat_channels = 2;
  c.memory_channels = 2;
  c.embed_channels = 2;
  c.height = height;
  c.width = width;
  auto p = model::zero_params(c);
  auto set = [&](std::size_t slot, std::vector<std::pair<std::size_t, double>> entries) {
    std::vector<double> v(p.values[slot].data().begin(), p.values[slot].data().end());
    for (const auto& [i, x] : entries) v[i] = x;
    p.values[slot] = Tensor(p.values[slot].shape(), std::move(v));
  };
  const std::size_t center_tap = 4;  // (1, 1) of a 3x3 kernel, output 0, input 0
  set(model::kEncoderW1, {{center_tap, 1.0}});
  set(model::kEncoderW2, {{center_tap, 1.0}});
  set(model::kUpdateB, {{0, 50.0}, {1, 50.0}});
  set(model::kResetB, {{0, -50.0}, {1, -50.0}});
  set(model::kCandidateW, {{center_tap, 5.0}});
  set(model::kCenterW, {{0, 20.0}});
  set(model::kCenterB, {{0, -10.0}});
  return p;
}

struct MetricsCase {
  world::SceneSequence gt;
  std::vector<track::TrackRecord> predictions;
};

inline world::ObjectTrack gt_track(int id, world::ShapeClass shape, const std::vector<world::Box>& boxes,
                                   const std::vector<world::Visibility>& states) {
  world::ObjectTrack t;
  t.object_id = id;
  t.shape = shape;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    world::TrackEntry e;
    e.box = boxes[i];
    e.center = {static_cast<int>(boxes[i].center_y()), static_cast<int>(boxes[i].center_x())};
    e.state = states[i];
    t.entries.push_back(e);
  }
  return t;
}

inline track::TrackRecord prediction(int frame, int id, world::Box box, bool visible) {
  track::TrackRecord r;
  r.frame = frame;
  r.id = id;
  r.box = box;
  r.confidence = 1.0;
  r.visible = visible;
  r.center_x = box.center_x();
  r.center_y = box.center_y();
  return r;
}

inline world::SceneSequence blank_sequence(std::size_t frames) {
  world::SceneSequence s;
  s.config.height = 12;
  s.config.width = 12;
  s.config.length = static_cast<int>(frames);
  for (std::size_t t = 0; t < frames; ++t) s.frames.push_back(Tensor::zeros({world::kFrameChannels, 12, 12}));
  return s;
}

// Three hand-scored sequences. Expected aggregate (derived by hand):
//   visible   9 frames, IoU sum 8,   hits 8
//   occluded  2 frames, IoU sum 1/3, hits 1
//   contained 2 frames, IoU sum 0,   hits 0
//   carried   1 frame,  IoU sum 1/7, hits 1
//   3 episodes, 2 recovered, 1 identity switch
inline std::vector<MetricsCase> golden_metrics_cases() {
  using world::Box;
  using V = world::Visibility;
  const auto T = world::ShapeClass::Target;
  std::vector<MetricsCase> out;

  // A: target slides right under an occluder; the hypothesis stays at the last box.
  MetricsCase a{blank_sequence(4), {}};
  a.gt.tracks.push_back(gt_track(0, T, {{0, 0, 2, 2}, {1, 0, 2, 2}, {2, 0, 2, 2}, {3, 0, 2, 2}},
                                 {V::Visible, V::Occluded, V::Occluded, V::Visible}));
  a.predictions = {prediction(0, 1, {0, 0, 2, 2}, true), prediction(1, 1, {0, 0, 2, 2}, false),
                   prediction(2, 1, {0, 0, 2, 2}, false), prediction(3, 1, {3, 0, 2, 2}, true)};
  out.push_back(a);

  // B: contained target; the tracker drops it and starts a new identity.
  MetricsCase b{blank_sequence(4), {}};
  b.gt.tracks.push_back(gt_track(0, T, std::vector<Box>(4, Box{4, 4, 2, 2}),
                                 {V::Visible, V::Contained, V::Contained, V::Visible}));
  b.predictions = {prediction(0, 5, {4, 4, 2, 2}, true), prediction(3, 6, {4, 4, 2, 2}, true)};
  out.push_back(b);

  // C: two targets plus an occluder track that the metrics ignore.
  MetricsCase c{blank_sequence(3), {}};
  c.gt.tracks.push_back(
      gt_track(0, T, {{0, 0, 2, 2}, {1, 0, 2, 2}, {2, 0, 2, 2}}, {V::Visible, V::Carried, V::Visible}));
  c.gt.tracks.push_back(gt_track(1, T, std::vector<Box>(3, Box{6, 6, 2, 2}), std::vector<V>(3, V::Visible)));
  c.gt.tracks.push_back(gt_track(2, world::ShapeClass::Occluder, std::vector<Box>(3, Box{0, 0, 3, 3}),
                                 std::vector<V>(3, V::Visible)));
  for (int t = 0; t < 3; ++t) c.predictions.push_back(prediction(t, 2, {6, 6, 2, 2}, true));
  c.predictions.push_back(prediction(0, 3, {0, 0, 2, 2}, true));
  c.predictions.push_back(prediction(1, 3, {0, 1, 2, 2}, false));
  c.predictions.push_back(prediction(2, 3, {2, 0, 2, 2}, true));
  out.push_back(c);
  return out;
}

}  // namespace ramwalk::oracle
