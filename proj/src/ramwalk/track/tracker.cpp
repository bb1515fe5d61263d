#include "ramwalk/track/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ramwalk/track/boxes.hpp"
#include "ramwalk/util/config.hpp"

namespace ramwalk::track {

void TrackerConfig::validate() const {
  if (!(conf_det > 0.0 && conf_det < 1.0)) throw std::invalid_argument("tracker: conf_det must lie in (0, 1)");
  if (!(conf_th >= 0.0 && conf_th <= 1.0)) throw std::invalid_argument("tracker: conf_th must lie in [0, 1]");
  if (max_age < 1) throw std::invalid_argument("tracker: max_age must be >= 1");
  if (!(kappa > 0.0)) throw std::invalid_argument("tracker: kappa must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("tracker: tau must be positive");
  if (!(radius_frac > 0.0)) throw std::invalid_argument("tracker: radius_frac must be positive");
}

TrackerConfig tracker_from_config(const util::KeyValueConfig& cfg, const std::string& section) {
  TrackerConfig c;
  c.conf_det = cfg.get_double(section, "conf_det", c.conf_det);
  c.conf_th = cfg.get_double(section, "conf_th", c.conf_th);
  c.max_age = static_cast<int>(cfg.get_int(section, "max_age", c.max_age));
  c.kappa = cfg.get_double(section, "kappa", c.kappa);
  c.local_attention = cfg.get_bool(section, "local_attention", c.local_attention);
  c.radius_frac = cfg.get_double(section, "radius_frac", c.radius_frac);
  c.tau = cfg.get_double(section, "tau", c.tau);
  const auto mode = cfg.get_string(section, "walker", "learned");
  if (mode == "learned") {
    c.mode = WalkerMode::Learned;
  } else if (mode == "frozen") {
    c.mode = WalkerMode::Frozen;
  } else {
    throw util::ConfigError("tracker: walker must be 'learned' or 'frozen', got '" + mode + "'");
  }
  c.validate();
  return c;
}

std::vector<Detection> detect_visible(const Tensor& heatmap, const Tensor& sizes, double conf_det,
                                      const model::GridGeometry& geom) {
  const int H = geom.memory_h, W = geom.memory_w;
  if (heatmap.shape() != diff::Shape{std::size_t(H), std::size_t(W)}) {
    throw diff::ShapeError("detect_visible: heatmap " + diff::shape_str(heatmap.shape()) + " does not match the grid");
  }
  const auto plane = static_cast<std::size_t>(H * W);
  std::vector<Detection> out;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const auto idx = static_cast<std::size_t>(r * W + c);
      const double v = heatmap[idx];
      if (v < conf_det) continue;
      bool peak = true;
      for (int dr = -1; dr <= 1 && peak; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= H || cc >= W || (dr == 0 && dc == 0)) continue;
          if (heatmap[static_cast<std::size_t>(rr * W + cc)] > v) {
            peak = false;
            break;
          }
        }
      if (!peak) continue;
      Detection d;
      d.cell = idx;
      const auto center = geom.memory_center(idx);
      d.row = center[0];
      d.col = center[1];
      d.confidence = v;
      const double w = std::max(1.0, sizes[idx]);
      const double h = std::max(1.0, sizes[plane + idx]);
      d.box = world::box_around(d.col + 0.5, d.row + 0.5, w, h);
      out.push_back(d);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    return a.confidence > b.confidence;
  });
  return out;
}

double Track::gate(double kappa) const { return kappa * std::sqrt(last_visible.w * last_visible.h); }

namespace {

double distance(double r0, double c0, double r1, double c1) { return std::hypot(r0 - r1, c0 - c1); }

void adopt_detection(Track& t, const Detection& d) {
  t.moving = std::max(std::abs(d.row - t.row), std::abs(d.col - t.col)) >= 1.0;
  t.row = d.row;
  t.col = d.col;
  t.box = d.box;
  t.last_visible = d.box;
  t.confidence = d.confidence;
  t.age = 0;
  t.visible = true;
  t.walker.reset();
}

}  // namespace

Association associate(const std::vector<const Track*>& tracks, const std::vector<Detection>& detections,
                      double kappa) {
  Association out;
  std::vector<bool> taken(tracks.size(), false);
  for (std::size_t d = 0; d < detections.size(); ++d) {
    std::size_t best = tracks.size();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < tracks.size(); ++k) {
      if (taken[k]) continue;
      const double dist = distance(detections[d].row, detections[d].col, tracks[k]->row, tracks[k]->col);
      if (dist <= tracks[k]->gate(kappa) && dist < best_dist) {
        best = k;
        best_dist = dist;
      }
    }
    if (best == tracks.size()) {
      out.unmatched_detections.push_back(d);
    } else {
      taken[best] = true;
      out.matches.push_back({best, d});
    }
  }
  for (std::size_t k = 0; k < tracks.size(); ++k)
    if (!taken[k]) out.unmatched_tracks.push_back(k);
  return out;
}

StepOutcome occluded_step(Track& track, const walk::TransitionMatrix& a, const std::vector<Detection>& detections,
                          std::vector<bool>& claimed, const TrackerConfig& cfg, const model::GridGeometry& geom) {
  if (!track.walker) {
    track.entry_cell = geom.walker_index(track.row, track.col);
    track.walker = walk::one_hot_walker(geom.walker_cells(), track.entry_cell);
    track.was_moving = track.moving;
    track.is_static = true;
  }
  track.walker = walk::walker_step(*track.walker, a).detached();
  const auto [conf, ind] = walk::walker_argmax(*track.walker);
  track.confidence = conf;
  track.hypothesis = ind;
  if (conf < cfg.conf_th) return StepOutcome::TerminatedConfidence;
  const int r = static_cast<int>(ind) / geom.walker_w;
  const int c = static_cast<int>(ind) % geom.walker_w;
  if (r == 0 || c == 0 || r == geom.walker_h - 1 || c == geom.walker_w - 1) return StepOutcome::TerminatedBoundary;

  const auto center = geom.walker_center(ind);
  std::size_t best = detections.size();
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (claimed[d]) continue;
    const double dist = distance(center[0], center[1], detections[d].row, detections[d].col);
    if (dist <= track.gate(cfg.kappa) && dist < best_dist) {
      best = d;
      best_dist = dist;
    }
  }
  if (best < detections.size()) {
    claimed[best] = true;
    adopt_detection(track, detections[best]);
    return StepOutcome::Rematched;
  }
  track.row = center[0];
  track.col = center[1];
  track.visible = false;
  track.age += 1;
  if (ind != track.entry_cell) track.is_static = false;
  return StepOutcome::Hypothesized;
}

void prune(std::vector<Track>& tracks, int max_age) {
  std::erase_if(tracks, [&](const Track& t) { return t.age > max_age; });
}

TrackingSession::TrackingSession(const model::ModelParams& params, TrackerConfig cfg)
    : params_(params), bound_(model::bind_constant(params)), cfg_(cfg), geom_(params.config) {
  cfg_.validate();
  if (cfg_.local_attention) {
    index_ = std::make_shared<const diff::RowIndex>(
        walk::l1_neighbors(geom_.walker_h, geom_.walker_w, cfg_.radius_frac * geom_.walker_h));
  }
  memory_ = model::initial_memory(params.config);
}

walk::TransitionMatrix TrackingSession::transition(const Tensor& embeddings_prev, const Tensor& embeddings) const {
  if (cfg_.mode == WalkerMode::Frozen) return walk::identity_transition(geom_.walker_cells());
  if (cfg_.local_attention) return walk::affinity_local(embeddings_prev, embeddings, cfg_.tau, index_);
  return walk::affinity_global(embeddings_prev, embeddings, cfg_.tau);
}

std::vector<TrackRecord> TrackingSession::step(const Tensor& frame) {
  const int t = frame_++;
  const auto out = model::step_frame(frame, memory_, bound_, params_.config);
  memory_ = out.memory;
  detections_ = detect_visible(out.centers, out.sizes, cfg_.conf_det, geom_);

  std::vector<bool> claimed(detections_.size(), false);
  std::vector<std::size_t> visible_idx;
  std::vector<const Track*> visible_tracks;
  for (std::size_t k = 0; k < tracks_.size(); ++k) {
    if (!tracks_[k].walker) {
      visible_idx.push_back(k);
      visible_tracks.push_back(&tracks_[k]);
    }
  }
  const auto assoc = associate(visible_tracks, detections_, cfg_.kappa);
  std::vector<bool> matched(tracks_.size(), false);
  for (const auto& m : assoc.matches) {
    adopt_detection(tracks_[visible_idx[m.track]], detections_[m.detection]);
    matched[visible_idx[m.track]] = true;
    claimed[m.detection] = true;
  }

  std::vector<bool> terminated(tracks_.size(), false);
  if (!tracks_.empty() && std::find(matched.begin(), matched.end(), false) != matched.end()) {
    std::optional<walk::TransitionMatrix> a;
    if (embeddings_prev_) a = transition(*embeddings_prev_, out.embeddings);
    for (std::size_t k = 0; k < tracks_.size(); ++k) {
      if (matched[k]) continue;
      if (!a) {
        terminated[k] = true;
        continue;
      }
      const auto outcome = occluded_step(tracks_[k], *a, detections_, claimed, cfg_, geom_);
      terminated[k] = outcome == StepOutcome::TerminatedConfidence || outcome == StepOutcome::TerminatedBoundary;
    }
  }
  embeddings_prev_ = out.embeddings;

  std::vector<Track> kept;
  for (std::size_t k = 0; k < tracks_.size(); ++k)
    if (!terminated[k]) kept.push_back(std::move(tracks_[k]));
  tracks_ = std::move(kept);
  for (std::size_t d = 0; d < detections_.size(); ++d) {
    if (claimed[d] || detections_[d].confidence < cfg_.conf_det) continue;
    Track nt;
    nt.id = next_id_++;
    adopt_detection(nt, detections_[d]);
    nt.moving = false;
    tracks_.push_back(std::move(nt));
  }
  prune(tracks_, cfg_.max_age);

  std::vector<Box> visible_boxes;
  for (const auto& d : detections_) visible_boxes.push_back(d.box);
  std::vector<TrackRecord> records;
  for (auto& tr : tracks_) {
    BoxContext ctx;
    ctx.visible = tr.visible;
    ctx.detection = tr.box;
    ctx.center_x = tr.col + 0.5;
    ctx.center_y = tr.row + 0.5;
    ctx.last_visible = tr.last_visible;
    ctx.was_moving = tr.was_moving;
    ctx.is_static = tr.is_static;
    ctx.others = visible_boxes;
    tr.box = predict_box(ctx);
    TrackRecord rec;
    rec.frame = t;
    rec.id = tr.id;
    rec.box = tr.box;
    rec.confidence = tr.confidence;
    rec.visible = tr.visible;
    rec.center_x = tr.col + 0.5;
    rec.center_y = tr.row + 0.5;
    records.push_back(rec);
  }
  return records;
}

std::vector<TrackRecord> track_sequence(const model::ModelParams& params, const world::SceneSequence& seq,
                                        const TrackerConfig& cfg) {
  TrackingSession session(params, cfg);
  std::vector<TrackRecord> all;
  for (const auto& f : seq.frames) {
    auto recs = session.step(f);
    all.insert(all.end(), recs.begin(), recs.end());
  }
  return all;
}

}  // namespace ramwalk::track
