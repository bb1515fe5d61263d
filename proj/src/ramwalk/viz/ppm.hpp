#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ramwalk/model/model.hpp"
#include "ramwalk/track/tracker.hpp"
#include "ramwalk/world/world.hpp"

namespace ramwalk::viz {

using Color = std::array<std::uint8_t, 3>;

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w * h * 3), 0) {}
  Color at(int x, int y) const;
  void set(int x, int y, Color c);
};

// Binary portable pixmap (P6).
std::vector<std::uint8_t> encode_ppm(const Image& image);

struct VizConfig {
  int scale = 16;                   // output pixels per scene pixel
  double display_threshold = 0.01;  // walker probability below which no overlay is drawn
};

// Scene frame [C, H, W] upscaled by `scale`, one color per shape class.
Image render_scene(const diff::Tensor& frame, int scale);

// Per walker cell, the largest probability over the occluded tracks' walkers
// (zero when no track is occluded).
std::vector<double> belief_map(const std::vector<track::Track>& tracks, const model::GridGeometry& geom);

// Blends a heat color into every pixel whose walker cell has belief above the
// threshold; returns the number of cells drawn.
std::size_t overlay_belief(Image& image, const std::vector<double>& belief, const model::GridGeometry& geom,
                           int scale, double threshold);

void draw_box(Image& image, const world::Box& box, int scale, Color color);
void draw_marker(Image& image, double center_x, double center_y, int scale, Color color);

struct FrameImage {
  int frame = 0;
  Image image;
  std::size_t overlay_cells = 0;
};

// Tracks the sequence and renders every frame with the belief overlay, GT
// boxes of target objects, predicted boxes, and argmax markers.
std::vector<FrameImage> visualize_sequence(const model::ModelParams& params, const world::SceneSequence& seq,
                                           const track::TrackerConfig& tracker, const VizConfig& cfg);

}  // namespace ramwalk::viz
