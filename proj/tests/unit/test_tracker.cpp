#include <gtest/gtest.h>

#include <set>

#include "ramwalk/track/boxes.hpp"
#include "ramwalk/track/track_io.hpp"
#include "ramwalk/track/tracker.hpp"

using namespace ramwalk;
using diff::Tensor;
using track::Detection;
using track::StepOutcome;
using track::Track;
using world::Box;

namespace {

model::ModelConfig grid10() {
  model::ModelConfig c;
  c.feat_channels = 2;
  c.memory_channels = 2;
  c.embed_channels = 2;
  c.height = 10;
  c.width = 10;
  return c;
}

Tensor sizes_filled(double w, double h) {
  std::vector<double> s(200, w);
  std::fill(s.begin() + 100, s.end(), h);
  return Tensor({2, 10, 10}, std::move(s));
}

Tensor heat_with(std::initializer_list<std::pair<std::size_t, double>> peaks, double base = 0.0) {
  std::vector<double> v(100, base);
  for (const auto& [i, x] : peaks) v[i] = x;
  return Tensor({10, 10}, std::move(v));
}

// Every walker cell moves one column right (the last column stays put).
walk::TransitionMatrix shift_right() {
  std::vector<double> m(100 * 100, 0.0);
  for (std::size_t i = 0; i < 100; ++i) m[i * 100 + ((i % 10 == 9) ? i : i + 1)] = 1.0;
  return walk::dense_transition(Tensor({100, 100}, std::move(m)));
}

walk::TransitionMatrix uniform() {
  return walk::dense_transition(Tensor::filled({100, 100}, 0.01));
}

Track track_at(double row, double col) {
  Track t;
  t.row = row;
  t.col = col;
  t.box = world::box_around(col + 0.5, row + 0.5, 2, 2);
  t.last_visible = t.box;
  return t;
}

Detection detection_at(double row, double col, double conf = 0.9) {
  Detection d;
  d.row = row;
  d.col = col;
  d.cell = static_cast<std::size_t>(row * 10 + col);
  d.confidence = conf;
  d.box = world::box_around(col + 0.5, row + 0.5, 2, 2);
  return d;
}

}  // namespace

TEST(Detect, NothingBelowThreshold) {
  const model::GridGeometry g(grid10());
  const auto heat = heat_with({}, 0.29);
  EXPECT_TRUE(track::detect_visible(heat, sizes_filled(2, 2), 0.3, g).empty());
}

TEST(Detect, SinglePeakGivesOneBox) {
  const model::GridGeometry g(grid10());
  const auto heat = heat_with({{34, 0.9}});
  const auto d = track::detect_visible(heat, sizes_filled(3, 2), 0.3, g);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].cell, 34u);
  EXPECT_DOUBLE_EQ(d[0].row, 3.0);
  EXPECT_DOUBLE_EQ(d[0].col, 4.0);
  EXPECT_DOUBLE_EQ(d[0].confidence, 0.9);
  EXPECT_DOUBLE_EQ(d[0].box.center_x(), 4.5);
  EXPECT_DOUBLE_EQ(d[0].box.center_y(), 3.5);
  EXPECT_DOUBLE_EQ(d[0].box.w, 3.0);
  EXPECT_DOUBLE_EQ(d[0].box.h, 2.0);
}

TEST(Detect, SizesBelowOneAreClamped) {
  const model::GridGeometry g(grid10());
  const auto heat = heat_with({{55, 0.5}});
  const auto d = track::detect_visible(heat, sizes_filled(0.2, -1.0), 0.3, g);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_DOUBLE_EQ(d[0].box.w, 1.0);
  EXPECT_DOUBLE_EQ(d[0].box.h, 1.0);
}

TEST(Detect, TiesKeepRowMajorOrderAndHigherFirst) {
  const model::GridGeometry g(grid10());
  // 23 is dominated by its neighbor 22
  const auto heat = heat_with({{66, 0.7}, {22, 0.7}, {88, 0.95}, {23, 0.4}});
  const auto d = track::detect_visible(heat, sizes_filled(2, 2), 0.3, g);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0].cell, 88u);
  EXPECT_EQ(d[1].cell, 22u);
  EXPECT_EQ(d[2].cell, 66u);
}

TEST(Detect, HeatmapShapeMismatchThrows) {
  const model::GridGeometry g(grid10());
  EXPECT_THROW(track::detect_visible(Tensor::zeros({9, 10}), sizes_filled(2, 2), 0.3, g), diff::ShapeError);
}

TEST(Associate, SameCellMatches) {
  const auto t = track_at(3, 4);
  const auto a = track::associate({&t}, {detection_at(3, 4)}, 1.0);
  ASSERT_EQ(a.matches.size(), 1u);
  EXPECT_TRUE(a.unmatched_tracks.empty());
  EXPECT_TRUE(a.unmatched_detections.empty());
}

TEST(Associate, OutsideGateStaysUnmatched) {
  const auto t = track_at(3, 4);  // gate = sqrt(2*2) = 2
  const auto a = track::associate({&t}, {detection_at(3, 7)}, 1.0);
  EXPECT_TRUE(a.matches.empty());
  EXPECT_EQ(a.unmatched_tracks, std::vector<std::size_t>{0});
  EXPECT_EQ(a.unmatched_detections, std::vector<std::size_t>{0});
  EXPECT_EQ(track::associate({&t}, {detection_at(3, 6)}, 1.0).matches.size(), 1u);  // exactly on the gate
}

TEST(Associate, FirstDetectionWinsContention) {
  const auto t = track_at(5, 5);
  const auto a = track::associate({&t}, {detection_at(5, 6, 0.9), detection_at(5, 5, 0.8)}, 1.0);
  ASSERT_EQ(a.matches.size(), 1u);
  EXPECT_EQ(a.matches[0].detection, 0u);
  EXPECT_EQ(a.unmatched_detections, std::vector<std::size_t>{1});
}

TEST(Associate, NearestTrackAndLowestIndexOnTies) {
  const auto t0 = track_at(5, 4), t1 = track_at(5, 6), t2 = track_at(5, 5);
  auto a = track::associate({&t0, &t1, &t2}, {detection_at(5, 5)}, 1.0);
  ASSERT_EQ(a.matches.size(), 1u);
  EXPECT_EQ(a.matches[0].track, 2u);
  a = track::associate({&t0, &t1}, {detection_at(5, 5)}, 1.0);
  EXPECT_EQ(a.matches[0].track, 0u);
}

TEST(OccludedStep, IdentityKeepsFullConfidence) {
  const model::GridGeometry g(grid10());
  track::TrackerConfig cfg;
  auto t = track_at(4, 5);
  std::vector<bool> claimed;
  for (int i = 1; i <= 3; ++i) {
    EXPECT_EQ(track::occluded_step(t, walk::identity_transition(100), {}, claimed, cfg, g), StepOutcome::Hypothesized);
    EXPECT_EQ(t.age, i);
  }
  EXPECT_EQ(t.entry_cell, 45u);
  EXPECT_EQ(t.hypothesis, 45u);
  EXPECT_DOUBLE_EQ(t.confidence, 1.0);
  EXPECT_TRUE(t.is_static);
  EXPECT_FALSE(t.visible);
}

TEST(OccludedStep, ShiftMovesHypothesisAndClearsStatic) {
  const model::GridGeometry g(grid10());
  track::TrackerConfig cfg;
  auto t = track_at(4, 5);
  t.moving = true;
  std::vector<bool> claimed;
  EXPECT_EQ(track::occluded_step(t, shift_right(), {}, claimed, cfg, g), StepOutcome::Hypothesized);
  EXPECT_EQ(t.hypothesis, 46u);
  EXPECT_DOUBLE_EQ(t.col, 6.0);
  EXPECT_DOUBLE_EQ(t.row, 4.0);
  EXPECT_FALSE(t.is_static);
  EXPECT_TRUE(t.was_moving);
  // Returning to the entry cell does not make the track static again.
  std::vector<double> back(100 * 100, 0.0);
  for (std::size_t i = 0; i < 100; ++i) back[i * 100 + (i % 10 == 0 ? i : i - 1)] = 1.0;
  EXPECT_EQ(track::occluded_step(t, walk::dense_transition(Tensor({100, 100}, std::move(back))), {}, claimed, cfg, g), StepOutcome::Hypothesized);
  EXPECT_EQ(t.hypothesis, 45u);
  EXPECT_FALSE(t.is_static);
}

TEST(OccludedStep, LowConfidenceTerminates) {
  const model::GridGeometry g(grid10());
  track::TrackerConfig cfg;
  cfg.conf_th = 0.05;
  auto t = track_at(4, 5);
  std::vector<bool> claimed;
  EXPECT_EQ(track::occluded_step(t, uniform(), {}, claimed, cfg, g), StepOutcome::TerminatedConfidence);
  EXPECT_NEAR(t.confidence, 0.01, 1e-15);
}

TEST(OccludedStep, BoundaryTerminates) {
  const model::GridGeometry g(grid10());
  track::TrackerConfig cfg;
  auto t = track_at(4, 8);
  std::vector<bool> claimed;
  EXPECT_EQ(track::occluded_step(t, shift_right(), {}, claimed, cfg, g), StepOutcome::TerminatedBoundary);
}

TEST(OccludedStep, RematchesUnclaimedDetectionNearHypothesis) {
  const model::GridGeometry g(grid10());
  track::TrackerConfig cfg;
  auto t = track_at(4, 5);
  std::vector<Detection> dets{detection_at(4, 6), detection_at(4, 7, 0.8)};
  std::vector<bool> claimed{true, false};  // the nearest is taken
  EXPECT_EQ(track::occluded_step(t, shift_right(), dets, claimed, cfg, g), StepOutcome::Rematched);
  EXPECT_TRUE(claimed[1]);
  EXPECT_TRUE(t.visible);
  EXPECT_FALSE(t.walker.has_value());
  EXPECT_EQ(t.age, 0);
  EXPECT_DOUBLE_EQ(t.col, 7.0);
  EXPECT_DOUBLE_EQ(t.confidence, 0.8);
}

TEST(Prune, RemovesOnlyTracksOlderThanMaxAge) {
  std::vector<Track> tracks(3);
  tracks[0].age = 16;
  tracks[1].age = 17;
  tracks[2].age = 0;
  tracks[0].id = 0;
  tracks[2].id = 2;
  track::prune(tracks, 16);
  ASSERT_EQ(tracks.size(), 2u);
  EXPECT_EQ(tracks[0].id, 0);
  EXPECT_EQ(tracks[1].id, 2);
}

TEST(Boxes, RefineSnapsUnderNearestBoxBottomAligned) {
  const Box last{0, 0, 2, 2};
  const std::vector<Box> visible{{10, 10, 4, 6}, {1, 1, 4, 6}};
  const auto b = track::refine_box(3, 4, last, visible);
  // Nearest is the second box (center 3, 4): same column, bottoms aligned at y = 7.
  EXPECT_DOUBLE_EQ(b.center_x(), 3.0);
  EXPECT_DOUBLE_EQ(b.y + b.h, 7.0);
  EXPECT_DOUBLE_EQ(b.w, 2.0);
  EXPECT_DOUBLE_EQ(b.h, 2.0);
}

TEST(Boxes, RefineTieTakesLowerIndex) {
  const Box last{0, 0, 2, 2};
  const std::vector<Box> visible{{0, 4, 2, 2}, {8, 4, 2, 2}};  // centers (1,5) and (9,5)
  EXPECT_DOUBLE_EQ(track::refine_box(5, 5, last, visible).center_x(), 1.0);
}

TEST(Boxes, RefineWithoutVisibleBoxesRecenters) {
  const auto b = track::refine_box(6, 7, Box{0, 0, 3, 2}, {});
  EXPECT_DOUBLE_EQ(b.center_x(), 6.0);
  EXPECT_DOUBLE_EQ(b.center_y(), 7.0);
  EXPECT_DOUBLE_EQ(b.w, 3.0);
}

TEST(Boxes, PredictBranches) {
  track::BoxContext ctx;
  ctx.last_visible = Box{2, 2, 2, 2};
  ctx.detection = Box{5, 5, 3, 3};
  ctx.center_x = 6.0;  // three columns right of the last box
  ctx.center_y = 3.0;
  ctx.others = {Box{7, 0, 4, 8}};

  ctx.visible = true;
  EXPECT_EQ(track::predict_box(ctx), ctx.detection);
  ctx.visible = false;

  ctx.was_moving = true;
  const auto moved = track::predict_box(ctx);
  EXPECT_DOUBLE_EQ(moved.x, 5.0);
  EXPECT_DOUBLE_EQ(moved.y, 2.0);

  ctx.was_moving = false;
  ctx.is_static = true;
  EXPECT_EQ(track::predict_box(ctx), ctx.last_visible);

  ctx.is_static = false;
  const auto refined = track::predict_box(ctx);
  EXPECT_DOUBLE_EQ(refined.center_x(), 9.0);
  EXPECT_DOUBLE_EQ(refined.y + refined.h, 8.0);
}

namespace {

std::vector<track::TrackRecord> run_session(const model::ModelParams& p, const world::SceneSequence& seq,
                                            const track::TrackerConfig& cfg, bool check_unique) {
  track::TrackingSession session(p, cfg);
  std::vector<track::TrackRecord> all;
  for (const auto& f : seq.frames) {
    const auto recs = session.step(f);
    all.insert(all.end(), recs.begin(), recs.end());
    if (!check_unique) continue;
    std::set<std::pair<double, double>> seen;
    std::set<int> ids;
    for (const auto& t : session.tracks()) {
      EXPECT_TRUE(ids.insert(t.id).second);
      if (t.visible && t.age == 0) {
        EXPECT_TRUE(seen.insert({t.row, t.col}).second) << "detection matched twice at frame " << session.frame_index();
      }
    }
  }
  return all;
}

}  // namespace

TEST(Session, DeterministicAndOneTrackPerDetection) {
  world::ScenarioConfig wc;
  wc.height = 16;
  wc.width = 16;
  wc.length = 12;
  wc.target_size = 2;
  wc.min_targets = 2;
  wc.max_targets = 2;
  wc.occluder_width = 4;
  wc.occluder_height = 8;
  const auto seq = world::generate_sequence(wc, 31);
  model::ModelConfig mc = grid10();
  mc.height = 16;
  mc.width = 16;
  auto params = model::init_params(mc, 31);
  track::TrackerConfig cfg;
  cfg.conf_det = 0.05;
  cfg.conf_th = 0.001;
  const auto a = run_session(params, seq, cfg, true);
  const auto b = track::track_sequence(params, seq, cfg);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a.empty());
  cfg.mode = track::WalkerMode::Frozen;
  EXPECT_EQ(run_session(params, seq, cfg, true), track::track_sequence(params, seq, cfg));
}

TEST(Session, ConfigValidation) {
  track::TrackerConfig cfg;
  cfg.conf_det = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.max_age = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.tau = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(TrackIo, RoundTrip) {
  std::vector<track::TrackRecord> recs(2);
  recs[0] = {0, 3, Box{1.5, 2.25, 3, 4}, 0.875, true, 3.0, 4.25};
  recs[1] = {7, 11, Box{0, 0, 1, 1}, 0.0625, false, 0.5, 0.5};
  const auto text = track::format_tracks(recs);
  EXPECT_EQ(text.rfind("#", 0), 0u);
  EXPECT_EQ(track::parse_tracks(text), recs);
  EXPECT_TRUE(track::parse_tracks("# only a comment\n").empty());
}

TEST(TrackIo, RejectsMalformedLines) {
  EXPECT_THROW(track::parse_tracks("0 1 0 0 1 1 0.5 visible 0.5\n"), track::TrackFormatError);
  EXPECT_THROW(track::parse_tracks("0 1 0 0 1 1 0.5 maybe 0.5 0.5\n"), track::TrackFormatError);
  EXPECT_THROW(track::parse_tracks("a 1 0 0 1 1 0.5 visible 0.5 0.5\n"), track::TrackFormatError);
  EXPECT_THROW(track::read_tracks("/nonexistent/x.tracks"), std::exception);
}
