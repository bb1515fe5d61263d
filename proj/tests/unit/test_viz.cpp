#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ramwalk/track/track_io.hpp"
#include "ramwalk/viz/ppm.hpp"

using namespace ramwalk;

namespace {

world::SceneSequence occluded_scene(int occluders, std::uint64_t seed) {
  world::ScenarioConfig wc;
  wc.length = 16;
  wc.target_size = 1;
  wc.occluders = occluders;
  wc.occluder_width = 4;
  wc.occluder_height = 8;
  wc.require_reappearance = occluders > 0;
  return world::generate_sequence(wc, seed);
}

track::TrackerConfig frozen_tracker() {
  track::TrackerConfig t;
  t.mode = track::WalkerMode::Frozen;
  t.conf_det = 0.5;
  return t;
}

}  // namespace

TEST(Viz, PpmHeader) {
  viz::Image img(3, 2);
  const auto bytes = viz::encode_ppm(img);
  const std::string header(bytes.begin(), bytes.begin() + 11);
  EXPECT_EQ(header, "P6\n3 2\n255\n");
  EXPECT_EQ(bytes.size(), 11u + 18u);
}

TEST(Viz, RenderScaleAndShapeChecks) {
  const auto seq = occluded_scene(1, 3);
  const auto img = viz::render_scene(seq.frames[0], 4);
  EXPECT_EQ(img.width, 64);
  EXPECT_EQ(img.height, 64);
  EXPECT_THROW(viz::render_scene(seq.frames[0], 0), std::invalid_argument);
  EXPECT_THROW(viz::render_scene(diff::Tensor::zeros({3, 4, 4}), 1), diff::ShapeError);
}

TEST(Viz, DetectorFixtureFindsTheTarget) {
  const auto seq = occluded_scene(0, 4);
  const auto params = oracle::handcrafted_detector(16, 16);
  const auto recs = track::track_sequence(params, seq, frozen_tracker());
  ASSERT_EQ(recs.size(), seq.length());
  for (const auto& r : recs) {
    const auto& e = seq.tracks[0].entries[static_cast<std::size_t>(r.frame)];
    EXPECT_TRUE(r.visible);
    EXPECT_EQ(r.id, 0);
    EXPECT_DOUBLE_EQ(r.center_x, e->box.center_x());
    EXPECT_DOUBLE_EQ(r.center_y, e->box.center_y());
  }
}

TEST(Viz, NoOverlayWhileEverythingIsVisible) {
  const auto seq = occluded_scene(0, 5);
  const auto frames = viz::visualize_sequence(oracle::handcrafted_detector(16, 16), seq, frozen_tracker(), {});
  ASSERT_EQ(frames.size(), seq.length());
  for (const auto& f : frames) EXPECT_EQ(f.overlay_cells, 0u) << "frame " << f.frame;
}

TEST(Viz, OverlayExactlyWhereBeliefExceedsThreshold) {
  model::ModelConfig c;
  c.height = 4;
  c.width = 4;
  const model::GridGeometry g(c);
  std::vector<double> belief(16, 0.0);
  belief[5] = 0.5;
  belief[6] = 0.01;  // equal to the threshold: not drawn
  belief[15] = 0.02;
  viz::Image img(8, 8);
  const auto before = img;
  EXPECT_EQ(viz::overlay_belief(img, belief, g, 2, 0.01), 2u);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const auto cell = static_cast<std::size_t>((y / 2) * 4 + x / 2);
      const bool changed = img.at(x, y) != before.at(x, y);
      EXPECT_EQ(changed, cell == 5 || cell == 15) << x << "," << y;
    }
}

TEST(Viz, MarkerAgreesWithTrackFile) {
  const auto params = oracle::handcrafted_detector(16, 16);
  const auto cfg = frozen_tracker();
  viz::VizConfig vc;
  vc.scale = 8;
  std::size_t hypotheses = 0;
  for (std::uint64_t seed = 20; seed < 24; ++seed) {
    const auto seq = occluded_scene(1, seed);
    const auto recs = track::parse_tracks(track::format_tracks(track::track_sequence(params, seq, cfg)));
    const auto frames = viz::visualize_sequence(params, seq, cfg, vc);
    for (const auto& r : recs) {
      if (r.visible) continue;
      ++hypotheses;
      const auto& img = frames[static_cast<std::size_t>(r.frame)].image;
      const int x = static_cast<int>(std::lround(r.center_x * vc.scale));
      const int y = static_cast<int>(std::lround(r.center_y * vc.scale));
      EXPECT_EQ(img.at(x, y), (viz::Color{230, 40, 230})) << "seed " << seed << " frame " << r.frame;
      EXPECT_GE(frames[static_cast<std::size_t>(r.frame)].overlay_cells, 1u);
    }
  }
  EXPECT_GT(hypotheses, 0u);
}

TEST(Viz, RejectsMismatchedModel) {
  const auto seq = occluded_scene(1, 6);
  EXPECT_THROW(viz::visualize_sequence(oracle::handcrafted_detector(12, 12), seq, frozen_tracker(), {}),
               diff::ShapeError);
}
