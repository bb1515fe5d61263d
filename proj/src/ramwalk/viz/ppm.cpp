#include "ramwalk/viz/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ramwalk::viz {

namespace {

constexpr Color kTargetColor = {230, 90, 60};
constexpr Color kOccluderColor = {150, 150, 150};
constexpr Color kContainerColor = {70, 110, 220};
constexpr Color kHeatColor = {255, 230, 0};
constexpr Color kGtColor = {40, 220, 90};
constexpr Color kVisibleColor = {255, 255, 255};
constexpr Color kHypothesisColor = {230, 40, 230};

std::uint8_t blend(std::uint8_t a, std::uint8_t b, double w) {
  return static_cast<std::uint8_t>(std::lround(a * (1.0 - w) + b * w));
}

}  // namespace

Color Image::at(int x, int y) const {
  const auto i = static_cast<std::size_t>((y * width + x) * 3);
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

void Image::set(int x, int y, Color c) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const auto i = static_cast<std::size_t>((y * width + x) * 3);
  rgb[i] = c[0];
  rgb[i + 1] = c[1];
  rgb[i + 2] = c[2];
}

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  return out;
}

Image render_scene(const diff::Tensor& frame, int scale) {
  if (frame.rank() != 3 || frame.dim(0) != world::kFrameChannels) {
    throw diff::ShapeError("render_scene: expected a [4,H,W] frame, got " + diff::shape_str(frame.shape()));
  }
  if (scale < 1) throw std::invalid_argument("render_scene: scale must be >= 1");
  const int H = static_cast<int>(frame.dim(1)), W = static_cast<int>(frame.dim(2));
  const auto plane = static_cast<std::size_t>(H * W);
  Image img(W * scale, H * scale);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const auto i = static_cast<std::size_t>(r * W + c);
      Color color{0, 0, 0};
      const std::array<Color, 3> palette = {kTargetColor, kOccluderColor, kContainerColor};
      for (std::size_t k = 0; k < 3; ++k) {
        if (frame[k * plane + i] > 0.5) {
          const double shade = 0.4 + 0.6 * frame[3 * plane + i];
          for (std::size_t ch = 0; ch < 3; ++ch) color[ch] = static_cast<std::uint8_t>(std::lround(palette[k][ch] * shade));
        }
      }
      for (int y = 0; y < scale; ++y)
        for (int x = 0; x < scale; ++x) img.set(c * scale + x, r * scale + y, color);
    }
  }
  return img;
}

std::vector<double> belief_map(const std::vector<track::Track>& tracks, const model::GridGeometry& geom) {
  std::vector<double> belief(geom.walker_cells(), 0.0);
  for (const auto& t : tracks) {
    if (!t.walker || t.visible) continue;
    const auto d = t.walker->data();
    for (std::size_t i = 0; i < belief.size(); ++i) belief[i] = std::max(belief[i], d[i]);
  }
  return belief;
}

std::size_t overlay_belief(Image& image, const std::vector<double>& belief, const model::GridGeometry& geom,
                           int scale, double threshold) {
  const double peak = belief.empty() ? 0.0 : *std::max_element(belief.begin(), belief.end());
  const int cell = static_cast<int>(geom.walker_scale()) * scale;
  std::size_t drawn = 0;
  for (std::size_t i = 0; i < belief.size(); ++i) {
    if (!(belief[i] > threshold)) continue;
    ++drawn;
    const double w = 0.25 + 0.6 * belief[i] / peak;
    const int r = static_cast<int>(i) / geom.walker_w;
    const int c = static_cast<int>(i) % geom.walker_w;
    for (int y = r * cell; y < (r + 1) * cell && y < image.height; ++y)
      for (int x = c * cell; x < (c + 1) * cell && x < image.width; ++x) {
        const Color old = image.at(x, y);
        image.set(x, y, {blend(old[0], kHeatColor[0], w), blend(old[1], kHeatColor[1], w), blend(old[2], kHeatColor[2], w)});
      }
  }
  return drawn;
}

void draw_box(Image& image, const world::Box& box, int scale, Color color) {
  const int x0 = static_cast<int>(std::lround(box.x * scale));
  const int y0 = static_cast<int>(std::lround(box.y * scale));
  const int x1 = static_cast<int>(std::lround((box.x + box.w) * scale)) - 1;
  const int y1 = static_cast<int>(std::lround((box.y + box.h) * scale)) - 1;
  for (int x = x0; x <= x1; ++x) {
    image.set(x, y0, color);
    image.set(x, y1, color);
  }
  for (int y = y0; y <= y1; ++y) {
    image.set(x0, y, color);
    image.set(x1, y, color);
  }
}

void draw_marker(Image& image, double center_x, double center_y, int scale, Color color) {
  const int cx = static_cast<int>(std::lround(center_x * scale));
  const int cy = static_cast<int>(std::lround(center_y * scale));
  const int arm = std::max(2, scale / 3);
  for (int d = -arm; d <= arm; ++d) {
    image.set(cx + d, cy, color);
    image.set(cx, cy + d, color);
  }
}

std::vector<FrameImage> visualize_sequence(const model::ModelParams& params, const world::SceneSequence& seq,
                                           const track::TrackerConfig& tracker, const VizConfig& cfg) {
  if (params.config.in_channels != static_cast<int>(world::kFrameChannels) ||
      params.config.height != seq.config.height || params.config.width != seq.config.width) {
    throw diff::ShapeError("visualize: checkpoint channel plan does not match the dataset frames");
  }
  track::TrackingSession session(params, tracker);
  std::vector<FrameImage> out;
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const auto records = session.step(seq.frames[t]);
    FrameImage fi;
    fi.frame = static_cast<int>(t);
    fi.image = render_scene(seq.frames[t], cfg.scale);
    fi.overlay_cells = overlay_belief(fi.image, belief_map(session.tracks(), session.geometry()), session.geometry(),
                                      cfg.scale, cfg.display_threshold);
    for (const auto& tr : seq.tracks)
      if (tr.shape == world::ShapeClass::Target && tr.entries[t]) draw_box(fi.image, tr.entries[t]->box, cfg.scale, kGtColor);
    for (const auto& r : records) {
      draw_box(fi.image, r.box, cfg.scale, r.visible ? kVisibleColor : kHypothesisColor);
      if (!r.visible) draw_marker(fi.image, r.center_x, r.center_y, cfg.scale, kHypothesisColor);
    }
    out.push_back(std::move(fi));
  }
  return out;
}

}  // namespace ramwalk::viz
