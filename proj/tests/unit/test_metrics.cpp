#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "ramwalk/metrics/metrics.hpp"

using namespace ramwalk;
using metrics::EvalReport;
using world::Box;
using world::Visibility;

TEST(Iou, Examples) {
  EXPECT_DOUBLE_EQ(metrics::iou({0, 0, 2, 2}, {0, 0, 2, 2}), 1.0);
  EXPECT_DOUBLE_EQ(metrics::iou({0, 0, 2, 2}, {2, 0, 2, 2}), 0.0);  // touching edges
  EXPECT_DOUBLE_EQ(metrics::iou({0, 0, 2, 2}, {1, 0, 2, 2}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(metrics::iou({0, 0, 0, 0}, {0, 0, 0, 0}), 0.0);
}

TEST(Metrics, GoldenFixture) {
  EvalReport total;
  for (const auto& c : oracle::golden_metrics_cases()) total += metrics::evaluate(c.predictions, c.gt);
  EXPECT_EQ(total.sequences, 3u);
  const auto& vis = total.state(Visibility::Visible);
  EXPECT_EQ(vis.frames, 9u);
  EXPECT_EQ(vis.hits, 8u);
  EXPECT_NEAR(vis.mean_iou(), 8.0 / 9.0, 1e-12);
  const auto& occ = total.state(Visibility::Occluded);
  EXPECT_EQ(occ.frames, 2u);
  EXPECT_NEAR(occ.mean_iou(), 1.0 / 6.0, 1e-12);
  EXPECT_DOUBLE_EQ(occ.accuracy(), 0.5);
  const auto& con = total.state(Visibility::Contained);
  EXPECT_EQ(con.frames, 2u);
  EXPECT_EQ(con.iou_sum, 0.0);
  EXPECT_EQ(con.accuracy(), 0.0);
  const auto& car = total.state(Visibility::Carried);
  EXPECT_EQ(car.frames, 1u);
  EXPECT_NEAR(car.mean_iou(), 1.0 / 7.0, 1e-12);
  EXPECT_DOUBLE_EQ(car.accuracy(), 1.0);
  EXPECT_EQ(total.episodes, 3u);
  EXPECT_EQ(total.recovered, 2u);
  EXPECT_EQ(total.id_switches, 1u);
}

TEST(Metrics, GoldenAssignment) {
  const auto cases = oracle::golden_metrics_cases();
  EXPECT_EQ(metrics::assign_predictions(cases[1].predictions, cases[1].gt)[0], 5);
  const auto c = metrics::assign_predictions(cases[2].predictions, cases[2].gt);
  EXPECT_EQ(c[0], 3);
  EXPECT_EQ(c[1], 2);
  EXPECT_FALSE(c[2].has_value());
}

TEST(Metrics, PerfectPredictionsScoreOne) {
  world::ScenarioConfig wc;
  wc.length = 12;
  const auto seq = world::generate_sequence(wc, 77);
  std::vector<track::TrackRecord> preds;
  for (std::size_t k = 0; k < seq.tracks.size(); ++k) {
    if (seq.tracks[k].shape != world::ShapeClass::Target) continue;
    for (std::size_t t = 0; t < seq.length(); ++t) {
      const auto& e = seq.tracks[k].entries[t];
      preds.push_back(oracle::prediction(static_cast<int>(t), static_cast<int>(k), e->box,
                                         e->state == Visibility::Visible));
    }
  }
  const auto r = metrics::evaluate(preds, seq);
  for (auto v : world::kAllStates) {
    const auto& s = r.state(v);
    if (s.frames == 0) continue;
    EXPECT_DOUBLE_EQ(s.mean_iou(), 1.0) << world::to_string(v);
    EXPECT_DOUBLE_EQ(s.accuracy(), 1.0);
  }
  EXPECT_GE(r.episodes, 1u);
  EXPECT_EQ(r.recovered, r.episodes);
  EXPECT_EQ(r.id_switches, 0u);
}

TEST(Metrics, FrozenBoxOverlapDecaysInClosedForm) {
  // A side-s box moving one pixel per frame against a frozen prediction:
  // after d pixels the overlap is (s - d) / (s + d).
  const double s = 5.0;
  const std::size_t n = 8;
  auto gt = oracle::blank_sequence(n);
  std::vector<Box> boxes;
  std::vector<Visibility> states;
  for (std::size_t t = 0; t < n; ++t) {
    boxes.push_back({static_cast<double>(t), 3, s, s});
    states.push_back(t == 0 ? Visibility::Visible : Visibility::Occluded);
  }
  gt.tracks.push_back(oracle::gt_track(0, world::ShapeClass::Target, boxes, states));
  std::vector<track::TrackRecord> preds;
  for (std::size_t t = 0; t < n; ++t) preds.push_back(oracle::prediction(static_cast<int>(t), 0, boxes[0], t == 0));
  const auto r = metrics::evaluate(preds, gt);
  double expected_sum = 0.0;
  std::size_t expected_hits = 0;
  for (std::size_t d = 1; d < n; ++d) {
    const double v = d < s ? (s - static_cast<double>(d)) / (s + static_cast<double>(d)) : 0.0;
    EXPECT_NEAR(metrics::iou(boxes[0], boxes[d]), v, 1e-15);
    expected_sum += v;
    expected_hits += v >= 0.1;
  }
  EXPECT_NEAR(r.state(Visibility::Occluded).iou_sum, expected_sum, 1e-12);
  EXPECT_EQ(r.state(Visibility::Occluded).hits, expected_hits);
  EXPECT_EQ(r.episodes, 0u);  // never reappears
}

TEST(Metrics, RecoveryIsFractionOfEpisodesKeepingIdentity) {
  // E episodes of one hidden frame each; the identity changes after the last one.
  const std::size_t episodes = 4;
  const std::size_t n = 2 * episodes + 1;
  auto gt = oracle::blank_sequence(n);
  std::vector<Box> boxes(n, Box{3, 3, 2, 2});
  std::vector<Visibility> states;
  for (std::size_t t = 0; t < n; ++t) states.push_back(t % 2 ? Visibility::Occluded : Visibility::Visible);
  gt.tracks.push_back(oracle::gt_track(0, world::ShapeClass::Target, boxes, states));
  std::vector<track::TrackRecord> preds;
  for (std::size_t t = 0; t < n; ++t) {
    if (t % 2) continue;
    preds.push_back(oracle::prediction(static_cast<int>(t), t + 1 == n ? 9 : 1, boxes[t], true));
  }
  const auto r = metrics::evaluate(preds, gt);
  EXPECT_EQ(r.episodes, episodes);
  EXPECT_DOUBLE_EQ(r.recovery_rate(), static_cast<double>(episodes - 1) / static_cast<double>(episodes));
  EXPECT_EQ(r.id_switches, 1u);
}

TEST(Metrics, OcclusionEpisodesNeedVisibleFramesOnBothSides) {
  world::ObjectTrack t;
  using V = Visibility;
  for (auto s : {V::Occluded, V::Visible, V::Contained, V::Carried, V::Visible, V::Occluded}) {
    world::TrackEntry e;
    e.state = s;
    t.entries.push_back(e);
  }
  const auto ep = metrics::occlusion_episodes(t);
  ASSERT_EQ(ep.size(), 1u);
  EXPECT_EQ(ep[0], std::make_pair(std::size_t{2}, std::size_t{4}));
}

TEST(Metrics, FrameOutOfRangeThrows) {
  const auto cases = oracle::golden_metrics_cases();
  auto preds = cases[0].predictions;
  preds.push_back(oracle::prediction(4, 1, {0, 0, 2, 2}, true));
  EXPECT_THROW(metrics::evaluate(preds, cases[0].gt), metrics::EvalError);
  preds.back().frame = -1;
  EXPECT_THROW(metrics::evaluate(preds, cases[0].gt), metrics::EvalError);
}

TEST(Metrics, AggregationIgnoresOrder) {
  auto cases = oracle::golden_metrics_cases();
  EvalReport forward, backward;
  for (const auto& c : cases) forward += metrics::evaluate(c.predictions, c.gt);
  std::mt19937_64 rng(5);
  for (auto it = cases.rbegin(); it != cases.rend(); ++it) {
    std::shuffle(it->predictions.begin(), it->predictions.end(), rng);
    backward += metrics::evaluate(it->predictions, it->gt);
  }
  for (std::size_t s = 0; s < 4; ++s) {
    EXPECT_EQ(forward.states[s].frames, backward.states[s].frames);
    EXPECT_EQ(forward.states[s].hits, backward.states[s].hits);
    EXPECT_NEAR(forward.states[s].iou_sum, backward.states[s].iou_sum, 1e-12);
  }
  EXPECT_EQ(forward.episodes, backward.episodes);
  EXPECT_EQ(forward.recovered, backward.recovered);
  EXPECT_EQ(forward.id_switches, backward.id_switches);
}

TEST(Metrics, ReportFormatting) {
  EvalReport total;
  for (const auto& c : oracle::golden_metrics_cases()) total += metrics::evaluate(c.predictions, c.gt);
  const auto text = metrics::format_report(total);
  EXPECT_NE(text.find("recovery_rate 0.6667"), std::string::npos) << text;
  const auto line = metrics::to_json_line(total, 2, 900);
  EXPECT_EQ(line.rfind(R"({"sequence":2,"seed":900,)", 0), 0u);
  EXPECT_NE(line.find(R"("id_switches":1})"), std::string::npos);
}
