#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ramwalk/model/model.hpp"
#include "ramwalk/walk/transition.hpp"
#include "ramwalk/world/world.hpp"

namespace ramwalk::util {
class KeyValueConfig;
}

namespace ramwalk::track {

using diff::Tensor;
using world::Box;

enum class WalkerMode {
  Learned,  // walkers follow the model's transition matrices
  Frozen,   // walkers never move: the hidden object is assumed to stay put
};

struct TrackerConfig {
  double conf_det = 0.3;
  double conf_th = 0.05;
  int max_age = 16;
  double kappa = 1.0;
  WalkerMode mode = WalkerMode::Learned;
  bool local_attention = true;
  double radius_frac = 0.2;
  double tau = 0.1;

  void validate() const;
};

TrackerConfig tracker_from_config(const util::KeyValueConfig& cfg, const std::string& section);

struct Detection {
  std::size_t cell = 0;  // memory-grid index
  double row = 0;        // pixel coordinates of the cell center
  double col = 0;
  Box box;
  double confidence = 0;
};

// Local maxima of the heatmap [H', W'] over 3x3 neighborhoods with value >=
// conf_det, sorted by confidence (descending) then row-major index.
std::vector<Detection> detect_visible(const Tensor& heatmap, const Tensor& sizes, double conf_det,
                                      const model::GridGeometry& geom);

struct Track {
  int id = 0;
  double row = 0;  // current center, pixel coordinates
  double col = 0;
  Box box;
  Box last_visible;
  double confidence = 0;
  int age = 0;  // frames since the last match
  bool visible = true;
  bool moving = false;  // center moved >= 1 cell at the last visible step
  bool was_moving = false;
  bool is_static = true;
  std::optional<Tensor> walker;  // [1, m] while occluded
  std::size_t entry_cell = 0;    // walker cell where the occlusion started
  std::size_t hypothesis = 0;    // walker argmax while occluded

  double gate(double kappa) const;
};

struct Match {
  std::size_t track = 0;
  std::size_t detection = 0;
};

struct Association {
  std::vector<Match> matches;
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_detections;
};

// Greedy center matching: detections in order claim the nearest unclaimed
// track within that track's gate (lowest index on distance ties).
Association associate(const std::vector<const Track*>& tracks, const std::vector<Detection>& detections,
                      double kappa);

enum class StepOutcome { Hypothesized, Rematched, TerminatedConfidence, TerminatedBoundary };

// One occluded-track update: starts the walker at the track's center on the
// first unmatched frame, advances it through `a`, and either terminates,
// re-matches against unclaimed detections, or stores the argmax hypothesis.
// `claimed` marks detections already taken and is updated on a re-match.
StepOutcome occluded_step(Track& track, const walk::TransitionMatrix& a, const std::vector<Detection>& detections,
                          std::vector<bool>& claimed, const TrackerConfig& cfg, const model::GridGeometry& geom);

// Removes tracks whose age exceeds max_age.
void prune(std::vector<Track>& tracks, int max_age);

struct TrackRecord {
  int frame = 0;
  int id = 0;
  Box box;
  double confidence = 0;
  bool visible = true;
  double center_x = 0;  // continuous center, pixel units
  double center_y = 0;

  bool operator==(const TrackRecord&) const = default;
};

// Frame-by-frame tracking state machine over one sequence.
class TrackingSession {
 public:
  TrackingSession(const model::ModelParams& params, TrackerConfig cfg);

  // Consumes the next frame and returns records for every live track.
  std::vector<TrackRecord> step(const Tensor& frame);

  const std::vector<Track>& tracks() const { return tracks_; }
  const std::vector<Detection>& detections() const { return detections_; }
  const model::GridGeometry& geometry() const { return geom_; }
  int frame_index() const { return frame_ - 1; }

 private:
  walk::TransitionMatrix transition(const Tensor& embeddings_prev, const Tensor& embeddings) const;

  const model::ModelParams& params_;
  model::BoundParams bound_;
  TrackerConfig cfg_;
  model::GridGeometry geom_;
  std::shared_ptr<const diff::RowIndex> index_;
  Tensor memory_;
  std::optional<Tensor> embeddings_prev_;
  std::vector<Track> tracks_;
  std::vector<Detection> detections_;
  int next_id_ = 0;
  int frame_ = 0;
};

std::vector<TrackRecord> track_sequence(const model::ModelParams& params, const world::SceneSequence& seq,
                                        const TrackerConfig& cfg);

}  // namespace ramwalk::track
