#include "ramwalk/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include <fmt/format.h>

namespace ramwalk::metrics {

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

EvalReport& EvalReport::operator+=(const EvalReport& o) {
  for (std::size_t s = 0; s < states.size(); ++s) {
    states[s].frames += o.states[s].frames;
    states[s].iou_sum += o.states[s].iou_sum;
    states[s].hits += o.states[s].hits;
  }
  episodes += o.episodes;
  recovered += o.recovered;
  id_switches += o.id_switches;
  sequences += o.sequences;
  return *this;
}

namespace {

bool is_target(const world::ObjectTrack& tr) { return tr.shape == world::ShapeClass::Target; }

void check_frames(const std::vector<track::TrackRecord>& predictions, const world::SceneSequence& gt) {
  for (const auto& r : predictions) {
    if (r.frame < 0 || static_cast<std::size_t>(r.frame) >= gt.length()) {
      throw EvalError("evaluate: prediction at frame " + std::to_string(r.frame) + " but the sequence has " +
                      std::to_string(gt.length()) + " frames");
    }
  }
}

std::vector<std::vector<const track::TrackRecord*>> by_frame(const std::vector<track::TrackRecord>& predictions,
                                                             std::size_t frames) {
  std::vector<std::vector<const track::TrackRecord*>> out(frames);
  for (const auto& r : predictions) out[static_cast<std::size_t>(r.frame)].push_back(&r);
  return out;
}

double center_distance(const track::TrackRecord& r, const Box& b) {
  return std::hypot(r.center_x - b.center_x(), r.center_y - b.center_y());
}

}  // namespace

std::vector<std::optional<int>> assign_predictions(const std::vector<track::TrackRecord>& predictions,
                                                   const world::SceneSequence& gt) {
  check_frames(predictions, gt);
  const auto frames = by_frame(predictions, gt.length());
  // (distance, gt index, prediction id)
  std::vector<std::tuple<double, std::size_t, int>> pairs;
  for (std::size_t k = 0; k < gt.tracks.size(); ++k) {
    const auto& tr = gt.tracks[k];
    if (!is_target(tr)) continue;
    std::map<int, double> first;
    for (std::size_t t = 0; t < gt.length(); ++t) {
      const auto& e = tr.entries[t];
      if (!e || e->state != world::Visibility::Visible) continue;
      for (const auto* r : frames[t])
        if (r->visible && !first.count(r->id)) first[r->id] = center_distance(*r, e->box);
    }
    for (const auto& [id, d] : first) pairs.emplace_back(d, k, id);
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<std::optional<int>> out(gt.tracks.size());
  std::vector<int> used;
  for (const auto& [d, k, id] : pairs) {
    if (out[k] || std::find(used.begin(), used.end(), id) != used.end()) continue;
    out[k] = id;
    used.push_back(id);
  }
  return out;
}

std::vector<std::vector<std::optional<int>>> frame_matches(const std::vector<track::TrackRecord>& predictions,
                                                           const world::SceneSequence& gt) {
  check_frames(predictions, gt);
  const auto frames = by_frame(predictions, gt.length());
  std::vector<std::vector<std::optional<int>>> out(gt.tracks.size(),
                                                   std::vector<std::optional<int>>(gt.length()));
  for (std::size_t t = 0; t < gt.length(); ++t) {
    std::vector<bool> claimed(frames[t].size(), false);
    for (std::size_t k = 0; k < gt.tracks.size(); ++k) {
      const auto& tr = gt.tracks[k];
      if (!is_target(tr) || !tr.entries[t]) continue;
      const Box& b = tr.entries[t]->box;
      const double gate = std::sqrt(b.w * b.h);
      std::size_t best = frames[t].size();
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < frames[t].size(); ++p) {
        if (claimed[p]) continue;
        const double d = center_distance(*frames[t][p], b);
        if (d <= gate && d < best_d) {
          best = p;
          best_d = d;
        }
      }
      if (best < frames[t].size()) {
        claimed[best] = true;
        out[k][t] = frames[t][best]->id;
      }
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> occlusion_episodes(const world::ObjectTrack& track) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const auto& e = track.entries;
  auto visible = [&](std::size_t t) { return e[t] && e[t]->state == world::Visibility::Visible; };
  for (std::size_t t = 1; t < e.size(); ++t) {
    if (visible(t) || !visible(t - 1)) continue;
    std::size_t u = t;
    while (u < e.size() && !visible(u)) ++u;
    if (u < e.size()) out.emplace_back(t, u);
    t = u;
  }
  return out;
}

EvalReport evaluate(const std::vector<track::TrackRecord>& predictions, const world::SceneSequence& gt) {
  check_frames(predictions, gt);
  EvalReport report;
  report.sequences = 1;
  const auto assigned = assign_predictions(predictions, gt);
  const auto frames = by_frame(predictions, gt.length());
  const auto matches = frame_matches(predictions, gt);

  for (std::size_t k = 0; k < gt.tracks.size(); ++k) {
    const auto& tr = gt.tracks[k];
    if (!is_target(tr)) continue;
    for (std::size_t t = 0; t < gt.length(); ++t) {
      const auto& e = tr.entries[t];
      if (!e) continue;
      double v = 0.0;
      if (assigned[k]) {
        for (const auto* r : frames[t])
          if (r->id == *assigned[k]) v = iou(r->box, e->box);
      }
      auto& s = report.states[static_cast<std::size_t>(e->state)];
      s.frames += 1;
      s.iou_sum += v;
      if (v >= kHitThreshold) s.hits += 1;
    }
    for (const auto& [start, end] : occlusion_episodes(tr)) {
      report.episodes += 1;
      const auto& before = matches[k][start - 1];
      const auto& after = matches[k][end];
      if (before && after && *before == *after) report.recovered += 1;
    }
    std::optional<int> last;
    for (std::size_t t = 0; t < gt.length(); ++t) {
      const auto& id = matches[k][t];
      if (!id) continue;
      if (last && *last != *id) report.id_switches += 1;
      last = id;
    }
  }
  return report;
}

std::string format_report(const EvalReport& r) {
  std::string out = fmt::format("{:<10} {:>8} {:>10} {:>10}\n", "state", "frames", "mean_iou", "map@0.1");
  for (auto v : world::kAllStates) {
    const auto& s = r.state(v);
    out += fmt::format("{:<10} {:>8} {:>10.4f} {:>10.4f}\n", world::to_string(v), s.frames, s.mean_iou(),
                       s.accuracy());
  }
  out += fmt::format("sequences {}\nepisodes {} recovered {} recovery_rate {:.4f}\nid_switches {}\n", r.sequences,
                     r.episodes, r.recovered, r.recovery_rate(), r.id_switches);
  return out;
}

std::string to_json_line(const EvalReport& r, std::size_t sequence, std::uint64_t seed) {
  std::string out = fmt::format(R"({{"sequence":{},"seed":{})", sequence, seed);
  for (auto v : world::kAllStates) {
    const auto& s = r.state(v);
    out += fmt::format(R"(,"{0}_frames":{1},"{0}_iou":{2:.6f},"{0}_map":{3:.6f})", world::to_string(v), s.frames,
                       s.mean_iou(), s.accuracy());
  }
  out += fmt::format(R"(,"episodes":{},"recovered":{},"id_switches":{}}})", r.episodes, r.recovered, r.id_switches);
  return out;
}

}  // namespace ramwalk::metrics
