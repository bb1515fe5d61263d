#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ramwalk/diff/tensor.hpp"

namespace ramwalk::util {
class KeyValueConfig;
}

namespace ramwalk::world {

enum class Visibility : std::uint8_t { Visible = 0, Occluded = 1, Contained = 2, Carried = 3 };
inline constexpr std::array<Visibility, 4> kAllStates = {Visibility::Visible, Visibility::Occluded,
                                                         Visibility::Contained, Visibility::Carried};
const char* to_string(Visibility v);

enum class ShapeClass : std::uint8_t { Target = 0, Occluder = 1, Container = 2 };

// Axis-aligned box in pixel units covering [x, x+w) x [y, y+h).
struct Box {
  double x = 0, y = 0, w = 0, h = 0;

  double center_x() const { return x + w / 2.0; }
  double center_y() const { return y + h / 2.0; }
  double area() const { return w * h; }
  bool operator==(const Box&) const = default;
};

Box box_around(double center_x, double center_y, double w, double h);

// Integer pixel cell (row, col).
struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

struct TrackEntry {
  Cell center;
  Box box;
  Visibility state = Visibility::Visible;
  bool operator==(const TrackEntry&) const = default;
};

// One object's per-frame ground truth. A nullopt entry is a redacted frame:
// the object was not visible and its geometry is withheld.
struct ObjectTrack {
  int object_id = 0;
  ShapeClass shape = ShapeClass::Target;
  std::vector<std::optional<TrackEntry>> entries;
  bool operator==(const ObjectTrack&) const = default;
};

enum class MotionModel : std::uint8_t { ConstantVelocity = 0, Turning = 1, StopAndGo = 2 };

struct ScenarioConfig {
  int height = 16;
  int width = 16;
  int length = 16;
  int min_targets = 1;
  int max_targets = 1;
  int occluders = 1;
  int containers = 0;
  int target_size = 3;
  int occluder_width = 7;
  int occluder_height = 9;
  int container_size = 5;
  int speed = 1;
  // Relative weights of the target motion models.
  double weight_constant = 1.0;
  double weight_turning = 0.0;
  double weight_stop_and_go = 0.0;
  // Maximum per-frame camera translation in pixels; 0 keeps the camera fixed.
  int camera_drift = 0;
  // Probability that a container performs a cover-and-carry episode.
  double containment_prob = 0.0;
  int carry_distance = 4;
  double coverage_threshold = 0.9;
  // Rejection-sample until the planned target has an occlusion episode that
  // ends before the last frame.
  bool require_reappearance = true;

  void validate() const;
  bool operator==(const ScenarioConfig&) const = default;
};

ScenarioConfig scenario_from_config(const util::KeyValueConfig& cfg, const std::string& section);

inline constexpr std::size_t kFrameChannels = 4;  // target, occluder, container, intensity

struct SceneSequence {
  ScenarioConfig config;
  std::uint64_t seed = 0;
  std::vector<diff::Tensor> frames;  // each [kFrameChannels, H, W]
  std::vector<ObjectTrack> tracks;

  std::size_t length() const { return frames.size(); }
};

bool operator==(const SceneSequence& a, const SceneSequence& b);

class InfeasibleScenario : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-frame placement of one object before rendering; used by the generator
// and exposed for scripted scenes.
struct ObjectPath {
  ShapeClass shape = ShapeClass::Target;
  int width = 1;
  int height = 1;
  double intensity = 1.0;
  std::vector<Cell> top_left;  // one per frame, pixel coordinates
};

// Depth order: targets are painted first, then containers, then occluders;
// ties by index. Higher depth is nearer the camera.
int depth_of(ShapeClass s);

// Builds the rendered frames and labeled tracks from explicit object paths.
// Visibility is derived from painted pixel coverage.
SceneSequence compose_scene(const ScenarioConfig& config, std::uint64_t seed, const std::vector<ObjectPath>& paths);

SceneSequence generate_sequence(const ScenarioConfig& config, std::uint64_t seed);

// Copy with every non-Visible entry replaced by nullopt.
SceneSequence redact_for_training(const SceneSequence& seq);

// True when any entry has been withheld (nullopt).
bool has_redacted_entry(const SceneSequence& seq);

// Per-state counts of labeled (object, frame) entries.
std::array<std::size_t, 4> state_counts(const SceneSequence& seq);

}  // namespace ramwalk::world
