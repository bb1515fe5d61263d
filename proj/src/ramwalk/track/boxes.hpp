#pragma once

#include <vector>

#include "ramwalk/world/world.hpp"

namespace ramwalk::track {

using world::Box;

// Snaps the center under the nearest visible box (Euclidean center distance,
// lowest index on ties): same column as that box, bottom edges aligned. The
// result has the size of `last_visible`. Without visible boxes the last box is
// re-centered on `center_x, center_y`.
Box refine_box(double center_x, double center_y, const Box& last_visible, const std::vector<Box>& visible);

struct BoxContext {
  bool visible = false;
  Box detection;          // when visible
  double center_x = 0;    // hypothesized center when not visible
  double center_y = 0;
  Box last_visible;
  bool was_moving = false;
  bool is_static = true;
  std::vector<Box> others;  // visible boxes in the current frame
};

// Box for one frame of a track: the detection when visible; otherwise the
// last visible box re-centered on the hypothesis (moving before occlusion),
// kept verbatim (static), or refined (static, now moving).
Box predict_box(const BoxContext& ctx);

}  // namespace ramwalk::track
