#include "ramwalk/world/world.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ramwalk/util/config.hpp"
#include "ramwalk/world/render.hpp"

namespace ramwalk::world {

const char* to_string(Visibility v) {
  switch (v) {
    case Visibility::Visible:
      return "visible";
    case Visibility::Occluded:
      return "occluded";
    case Visibility::Contained:
      return "contained";
    case Visibility::Carried:
      return "carried";
  }
  return "unknown";
}

Box box_around(double center_x, double center_y, double w, double h) {
  return Box{center_x - w / 2.0, center_y - h / 2.0, w, h};
}

int depth_of(ShapeClass s) {
  switch (s) {
    case ShapeClass::Target:
      return 0;
    case ShapeClass::Container:
      return 1;
    case ShapeClass::Occluder:
      return 2;
  }
  return 0;
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("scenario config: " + m); };
  if (height < 3 || width < 3) fail("grid must be at least 3x3");
  if (length < 2) fail("sequence length must be at least 2");
  if (min_targets < 0 || max_targets < min_targets) fail("invalid target count range");
  if (occluders < 0 || containers < 0) fail("negative object count");
  if (target_size < 1 || occluder_width < 1 || occluder_height < 1 || container_size < 1) fail("object sizes must be positive");
  if (speed < 0) fail("speed must be non-negative");
  if (weight_constant < 0 || weight_turning < 0 || weight_stop_and_go < 0 ||
      weight_constant + weight_turning + weight_stop_and_go <= 0) {
    fail("motion weights must be non-negative with a positive sum");
  }
  if (camera_drift < 0) fail("camera drift must be non-negative");
  if (containment_prob < 0 || containment_prob > 1) fail("containment probability must lie in [0,1]");
  if (coverage_threshold <= 0 || coverage_threshold > 1) fail("coverage threshold must lie in (0,1]");
  if (carry_distance < 1) fail("carry distance must be at least 1");
}

ScenarioConfig scenario_from_config(const util::KeyValueConfig& cfg, const std::string& s) {
  ScenarioConfig c;
  c.height = static_cast<int>(cfg.get_int(s, "height", c.height));
  c.width = static_cast<int>(cfg.get_int(s, "width", c.width));
  c.length = static_cast<int>(cfg.get_int(s, "length", c.length));
  c.min_targets = static_cast<int>(cfg.get_int(s, "min_targets", c.min_targets));
  c.max_targets = static_cast<int>(cfg.get_int(s, "max_targets", c.max_targets));
  c.occluders = static_cast<int>(cfg.get_int(s, "occluders", c.occluders));
  c.containers = static_cast<int>(cfg.get_int(s, "containers", c.containers));
  c.target_size = static_cast<int>(cfg.get_int(s, "target_size", c.target_size));
  c.occluder_width = static_cast<int>(cfg.get_int(s, "occluder_width", c.occluder_width));
  c.occluder_height = static_cast<int>(cfg.get_int(s, "occluder_height", c.occluder_height));
  c.container_size = static_cast<int>(cfg.get_int(s, "container_size", c.container_size));
  c.speed = static_cast<int>(cfg.get_int(s, "speed", c.speed));
  c.weight_constant = cfg.get_double(s, "weight_constant", c.weight_constant);
  c.weight_turning = cfg.get_double(s, "weight_turning", c.weight_turning);
  c.weight_stop_and_go = cfg.get_double(s, "weight_stop_and_go", c.weight_stop_and_go);
  c.camera_drift = static_cast<int>(cfg.get_int(s, "camera_drift", c.camera_drift));
  c.containment_prob = cfg.get_double(s, "containment_prob", c.containment_prob);
  c.carry_distance = static_cast<int>(cfg.get_int(s, "carry_distance", c.carry_distance));
  c.coverage_threshold = cfg.get_double(s, "coverage_threshold", c.coverage_threshold);
  c.require_reappearance = cfg.get_bool(s, "require_reappearance", c.require_reappearance);
  c.validate();
  return c;
}

bool operator==(const SceneSequence& a, const SceneSequence& b) {
  if (!(a.config == b.config) || a.seed != b.seed || a.tracks != b.tracks || a.frames.size() != b.frames.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.frames.size(); ++i)
    if (!diff::same_values(a.frames[i], b.frames[i])) return false;
  return true;
}

SceneSequence compose_scene(const ScenarioConfig& config, std::uint64_t seed, const std::vector<ObjectPath>& paths) {
  const auto T = static_cast<std::size_t>(config.length);
  for (const auto& p : paths) {
    if (p.top_left.size() != T) throw InfeasibleScenario("object path length does not match sequence length");
    for (const auto& c : p.top_left) {
      if (c.row < 0 || c.col < 0 || c.row + p.height > config.height || c.col + p.width > config.width) {
        throw InfeasibleScenario("object leaves the frame");
      }
    }
  }

  SceneSequence seq;
  seq.config = config;
  seq.seed = seed;
  seq.tracks.resize(paths.size());
  for (std::size_t k = 0; k < paths.size(); ++k) {
    seq.tracks[k].object_id = static_cast<int>(k);
    seq.tracks[k].shape = paths[k].shape;
    seq.tracks[k].entries.resize(T);
  }

  std::vector<bool> enclosed_prev(paths.size() * paths.size(), false);
  for (std::size_t t = 0; t < T; ++t) {
    const auto owners = paint_owners(config.height, config.width, paths, t);
    seq.frames.push_back(render_frame(config.height, config.width, paths, owners));
    std::vector<bool> enclosed_now(paths.size() * paths.size(), false);
    for (std::size_t k = 0; k < paths.size(); ++k) {
      const auto& p = paths[k];
      const Cell tl = p.top_left[t];
      TrackEntry e;
      e.box = Box{static_cast<double>(tl.col), static_cast<double>(tl.row), static_cast<double>(p.width),
                  static_cast<double>(p.height)};
      e.center = Cell{tl.row + p.height / 2, tl.col + p.width / 2};
      const double covered = covered_fraction(owners, config.width, paths, k, t);

      for (std::size_t j = 0; j < paths.size(); ++j) {
        if (j == k || paths[j].shape != ShapeClass::Container || depth_of(paths[j].shape) <= depth_of(p.shape)) continue;
        const Cell c = paths[j].top_left[t];
        enclosed_now[k * paths.size() + j] = c.row <= tl.row && c.col <= tl.col &&
                                             c.row + paths[j].height >= tl.row + p.height &&
                                             c.col + paths[j].width >= tl.col + p.width;
      }

      if (covered + 1e-12 < config.coverage_threshold) {
        e.state = Visibility::Visible;
      } else {
        e.state = Visibility::Occluded;
        for (std::size_t j = 0; j < paths.size(); ++j) {
          if (!enclosed_now[k * paths.size() + j]) continue;
          e.state = Visibility::Contained;
          const bool moved = t > 0 && !(paths[j].top_left[t] == paths[j].top_left[t - 1]);
          if (moved && enclosed_prev[k * paths.size() + j]) {
            e.state = Visibility::Carried;
            break;
          }
        }
      }
      seq.tracks[k].entries[t] = e;
    }
    enclosed_prev = std::move(enclosed_now);
  }

  for (const auto& tr : seq.tracks) {
    if (!tr.entries.empty() && tr.entries.front()->state != Visibility::Visible) {
      throw InfeasibleScenario("object " + std::to_string(tr.object_id) + " is not visible in the first frame");
    }
  }
  return seq;
}

namespace {

using Rng = std::mt19937_64;

int uniform_int(Rng& rng, int lo, int hi) {  // inclusive
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

struct Bounds {
  int min_row, min_col, max_row, max_col;  // allowed top-left range for a given object size
};

Bounds bounds_for(const ScenarioConfig& c, int margin, int w, int h) {
  return Bounds{margin, margin, c.height - margin - h, c.width - margin - w};
}

bool fits(const Bounds& b) { return b.max_row >= b.min_row && b.max_col >= b.min_col; }

Cell random_cell(Rng& rng, const Bounds& b) {
  return Cell{uniform_int(rng, b.min_row, b.max_row), uniform_int(rng, b.min_col, b.max_col)};
}

const std::array<Cell, 8> kDirections = {Cell{0, 1},  Cell{0, -1}, Cell{1, 0},  Cell{-1, 0},
                                         Cell{1, 1},  Cell{1, -1}, Cell{-1, 1}, Cell{-1, -1}};

MotionModel pick_motion(Rng& rng, const ScenarioConfig& c) {
  const double total = c.weight_constant + c.weight_turning + c.weight_stop_and_go;
  const double u = uniform_real(rng, 0.0, total);
  if (u < c.weight_constant) return MotionModel::ConstantVelocity;
  if (u < c.weight_constant + c.weight_turning) return MotionModel::Turning;
  return MotionModel::StopAndGo;
}

// Moves one axis with reflection at the bounds.
void advance_axis(int& pos, int& vel, int lo, int hi) {
  int next = pos + vel;
  if (next < lo || next > hi) {
    vel = -vel;
    next = pos + vel;
    if (next < lo || next > hi) next = pos;
  }
  pos = next;
}

std::vector<Cell> target_motion(Rng& rng, const ScenarioConfig& c, const Bounds& b, Cell start) {
  const int T = c.length;
  const auto model = pick_motion(rng, c);
  Cell dir = kDirections[static_cast<std::size_t>(uniform_int(rng, 0, 7))];
  int vr = dir.row * c.speed;
  int vc = dir.col * c.speed;
  const int turn_at = uniform_int(rng, 1, std::max(1, T - 2));
  const int turn_sign = uniform_int(rng, 0, 1) ? 1 : -1;
  std::vector<bool> moving(static_cast<std::size_t>(T), true);
  if (model == MotionModel::StopAndGo) {
    const int stop_start = uniform_int(rng, 1, std::max(1, T - 2));
    const int stop_len = uniform_int(rng, 2, 4);
    for (int t = stop_start; t < std::min(T, stop_start + stop_len); ++t) moving[static_cast<std::size_t>(t)] = false;
  }
  std::vector<Cell> path;
  path.reserve(static_cast<std::size_t>(T));
  Cell p = start;
  path.push_back(p);
  for (int t = 1; t < T; ++t) {
    if (model == MotionModel::Turning && t == turn_at) {
      // 90 degree rotation of the velocity
      const int nr = turn_sign * vc;
      const int nc = -turn_sign * vr;
      vr = nr;
      vc = nc;
    }
    if (moving[static_cast<std::size_t>(t)]) {
      advance_axis(p.row, vr, b.min_row, b.max_row);
      advance_axis(p.col, vc, b.min_col, b.max_col);
    }
    path.push_back(p);
  }
  return path;
}

// Cover-and-carry script: the container walks onto a static target, holds,
// carries it, holds, then lifts off and stays clear.
bool containment_script(Rng& rng, const ScenarioConfig& c, int margin, ObjectPath& target, ObjectPath& container) {
  const int T = c.length;
  const int ts = c.target_size;
  const int cs = c.container_size;
  if (cs < ts) return false;
  const Bounds cb = bounds_for(c, margin, cs, cs);
  const Bounds tb = bounds_for(c, margin, ts, ts);
  if (!fits(cb) || !fits(tb)) return false;

  const int step = std::max(1, c.speed);
  const Cell dir = kDirections[static_cast<std::size_t>(uniform_int(rng, 0, 7))];
  const int carry = c.carry_distance + uniform_int(rng, 0, 2);
  const int carry_frames = (carry + step - 1) / step;

  Cell t0 = random_cell(rng, tb);
  const int off_col = (cs - ts) / 2;
  const int off_row = cs - ts;  // bottom edges aligned
  Cell cover{t0.row - off_row, t0.col - off_col};
  if (cover.row < cb.min_row || cover.col < cb.min_col || cover.row > cb.max_row || cover.col > cb.max_col) return false;
  // Container position after the carry must stay in bounds.
  Cell carried{cover.row + dir.row * carry_frames * step, cover.col + dir.col * carry_frames * step};
  if (carried.row < cb.min_row || carried.col < cb.min_col || carried.row > cb.max_row || carried.col > cb.max_col) {
    return false;
  }

  Cell start = random_cell(rng, cb);
  const int approach = std::max(std::abs(start.row - cover.row), std::abs(start.col - cover.col));
  const int approach_frames = (approach + step - 1) / step;
  if (approach_frames < 2) return false;

  const std::array<Cell, 4> lifts = {Cell{-1, 0}, Cell{0, 1}, Cell{0, -1}, Cell{1, 0}};
  const Cell lift = lifts[static_cast<std::size_t>(uniform_int(rng, 0, 3))];
  const int lift_frames = (cs + step - 1) / step;
  Cell lifted{carried.row + lift.row * lift_frames * step, carried.col + lift.col * lift_frames * step};
  if (lifted.row < cb.min_row || lifted.col < cb.min_col || lifted.row > cb.max_row || lifted.col > cb.max_col) {
    return false;
  }

  const int needed = approach_frames + 1 + carry_frames + 1 + lift_frames + 1;
  if (needed > T) return false;
  const int slack = T - needed;
  const int delay = uniform_int(rng, 0, slack);

  target.top_left.clear();
  container.top_left.clear();
  Cell cp = start;
  Cell tp = t0;
  auto push = [&] {
    container.top_left.push_back(cp);
    target.top_left.push_back(tp);
  };
  auto move_toward = [&](Cell& p, Cell goal) {
    p.row += std::clamp(goal.row - p.row, -step, step);
    p.col += std::clamp(goal.col - p.col, -step, step);
  };
  push();
  for (int t = 1; t < T; ++t) {
    const int phase = t - delay;
    if (phase <= 0) {
      // waiting at start
    } else if (phase <= approach_frames) {
      move_toward(cp, cover);
    } else if (phase == approach_frames + 1) {
      // hold over the target
    } else if (phase <= approach_frames + 1 + carry_frames) {
      const Cell before = cp;
      move_toward(cp, carried);
      tp.row += cp.row - before.row;
      tp.col += cp.col - before.col;
    } else if (phase == approach_frames + 2 + carry_frames) {
      // hold after carrying
    } else {
      move_toward(cp, lifted);
    }
    push();
  }
  return true;
}

std::vector<Cell> camera_offsets(Rng& rng, const ScenarioConfig& c) {
  std::vector<Cell> out(static_cast<std::size_t>(c.length), Cell{0, 0});
  if (c.camera_drift == 0) return out;
  const int limit = 2 * c.camera_drift;
  Cell off{0, 0};
  for (int t = 1; t < c.length; ++t) {
    off.row = std::clamp(off.row + uniform_int(rng, -c.camera_drift, c.camera_drift), -limit, limit);
    off.col = std::clamp(off.col + uniform_int(rng, -c.camera_drift, c.camera_drift), -limit, limit);
    out[static_cast<std::size_t>(t)] = off;
  }
  return out;
}

bool has_bounded_episode(const ObjectTrack& tr) {
  const auto& e = tr.entries;
  for (std::size_t t = 1; t + 1 < e.size(); ++t) {
    if (e[t]->state != Visibility::Visible && e[t - 1]->state == Visibility::Visible) {
      std::size_t u = t;
      while (u < e.size() && e[u]->state != Visibility::Visible) ++u;
      if (u < e.size()) return true;
    }
  }
  return false;
}

bool has_hidden_frame(const ObjectTrack& tr) {
  return std::any_of(tr.entries.begin(), tr.entries.end(),
                     [](const auto& e) { return e && e->state != Visibility::Visible; });
}

}  // namespace

SceneSequence generate_sequence(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  const int margin = 2 * config.camera_drift;
  if (!fits(bounds_for(config, margin, config.target_size, config.target_size)) ||
      (config.occluders > 0 && !fits(bounds_for(config, margin, config.occluder_width, config.occluder_height))) ||
      (config.containers > 0 && !fits(bounds_for(config, margin, config.container_size, config.container_size)))) {
    throw InfeasibleScenario("objects do not fit in a " + std::to_string(config.height) + "x" +
                             std::to_string(config.width) + " grid with camera margin " + std::to_string(margin));
  }

  Rng rng(seed);
  const int T = config.length;
  constexpr int kAttempts = 2000;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    std::vector<ObjectPath> paths;
    const int n_targets = uniform_int(rng, config.min_targets, config.max_targets);
    const bool contain = config.containers > 0 && n_targets > 0 &&
                         std::bernoulli_distribution(config.containment_prob)(rng);

    for (int k = 0; k < n_targets; ++k) {
      ObjectPath p;
      p.shape = ShapeClass::Target;
      p.width = p.height = config.target_size;
      p.intensity = uniform_real(rng, 0.5, 1.0);
      const Bounds b = bounds_for(config, margin, p.width, p.height);
      p.top_left = target_motion(rng, config, b, random_cell(rng, b));
      paths.push_back(std::move(p));
    }
    for (int k = 0; k < config.containers; ++k) {
      ObjectPath p;
      p.shape = ShapeClass::Container;
      p.width = p.height = config.container_size;
      p.intensity = uniform_real(rng, 0.5, 1.0);
      const Bounds b = bounds_for(config, margin, p.width, p.height);
      p.top_left.assign(static_cast<std::size_t>(T), random_cell(rng, b));
      paths.push_back(std::move(p));
    }
    if (contain) {
      auto& target = paths[0];
      auto& container = paths[static_cast<std::size_t>(n_targets)];
      if (!containment_script(rng, config, margin, target, container)) continue;
    }
    for (int k = 0; k < config.occluders; ++k) {
      ObjectPath p;
      p.shape = ShapeClass::Occluder;
      p.width = config.occluder_width;
      p.height = config.occluder_height;
      p.intensity = uniform_real(rng, 0.5, 1.0);
      const Bounds b = bounds_for(config, margin, p.width, p.height);
      p.top_left.assign(static_cast<std::size_t>(T), random_cell(rng, b));
      paths.push_back(std::move(p));
    }

    const auto offsets = camera_offsets(rng, config);
    for (auto& p : paths)
      for (std::size_t t = 0; t < p.top_left.size(); ++t) {
        p.top_left[t].row += offsets[t].row;
        p.top_left[t].col += offsets[t].col;
      }

    SceneSequence seq;
    try {
      seq = compose_scene(config, seed, paths);
    } catch (const InfeasibleScenario&) {
      continue;
    }
    if (n_targets > 0 && (contain || (config.occluders > 0 && T >= 8))) {
      const auto& primary = seq.tracks[0];
      if (!has_hidden_frame(primary)) continue;
      if (config.require_reappearance && !has_bounded_episode(primary)) continue;
    }
    return seq;
  }
  throw InfeasibleScenario("no feasible scene found after " + std::to_string(kAttempts) + " attempts (seed " +
                           std::to_string(seed) + ")");
}

SceneSequence redact_for_training(const SceneSequence& seq) {
  SceneSequence out = seq;
  for (auto& tr : out.tracks)
    for (auto& e : tr.entries)
      if (e && e->state != Visibility::Visible) e.reset();
  return out;
}

bool has_redacted_entry(const SceneSequence& seq) {
  for (const auto& tr : seq.tracks)
    for (const auto& e : tr.entries)
      if (!e) return true;
  return false;
}

std::array<std::size_t, 4> state_counts(const SceneSequence& seq) {
  std::array<std::size_t, 4> counts{};
  for (const auto& tr : seq.tracks)
    for (const auto& e : tr.entries)
      if (e) ++counts[static_cast<std::size_t>(e->state)];
  return counts;
}

}  // namespace ramwalk::world
