#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ramwalk/track/tracker.hpp"
#include "ramwalk/world/world.hpp"

namespace ramwalk::metrics {

using world::Box;

double iou(const Box& a, const Box& b);

inline constexpr double kHitThreshold = 0.1;

struct StateStats {
  std::size_t frames = 0;
  double iou_sum = 0;
  std::size_t hits = 0;  // frames with IoU >= kHitThreshold

  double mean_iou() const { return frames ? iou_sum / static_cast<double>(frames) : 0.0; }
  double accuracy() const { return frames ? static_cast<double>(hits) / static_cast<double>(frames) : 0.0; }
};

struct EvalReport {
  std::array<StateStats, 4> states{};
  std::size_t episodes = 0;
  std::size_t recovered = 0;
  std::size_t id_switches = 0;
  std::size_t sequences = 0;

  double recovery_rate() const {
    return episodes ? static_cast<double>(recovered) / static_cast<double>(episodes) : 0.0;
  }
  const StateStats& state(world::Visibility v) const { return states[static_cast<std::size_t>(v)]; }

  // Sum of counts; the aggregate of per-sequence reports.
  EvalReport& operator+=(const EvalReport& other);
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Prediction id assigned to each target-class GT track (by track index), or
// nullopt. Pairs are ranked by center distance in their first mutually
// visible frame and accepted greedily one-to-one.
std::vector<std::optional<int>> assign_predictions(const std::vector<track::TrackRecord>& predictions,
                                                   const world::SceneSequence& gt);

// Per-frame matched prediction id for GT track `k`: the nearest prediction
// (any visibility) within sqrt(w*h) of the GT box, greedy over GT tracks in
// index order. Indexed [track][frame].
std::vector<std::vector<std::optional<int>>> frame_matches(const std::vector<track::TrackRecord>& predictions,
                                                           const world::SceneSequence& gt);

// Occlusion episodes of one GT track: maximal runs of non-visible frames with
// a visible frame on both sides, as (first hidden frame, first visible frame after).
std::vector<std::pair<std::size_t, std::size_t>> occlusion_episodes(const world::ObjectTrack& track);

EvalReport evaluate(const std::vector<track::TrackRecord>& predictions, const world::SceneSequence& gt);

std::string format_report(const EvalReport& report);
std::string to_json_line(const EvalReport& report, std::size_t sequence, std::uint64_t seed);

}  // namespace ramwalk::metrics
