#include "ramwalk/track/boxes.hpp"

#include <cmath>
#include <limits>

namespace ramwalk::track {

Box refine_box(double center_x, double center_y, const Box& last_visible, const std::vector<Box>& visible) {
  if (visible.empty()) return world::box_around(center_x, center_y, last_visible.w, last_visible.h);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < visible.size(); ++i) {
    const double d = std::hypot(visible[i].center_x() - center_x, visible[i].center_y() - center_y);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  const Box& c = visible[best];
  const double x = c.center_x();
  const double y = c.center_y() + c.h / 2.0 - last_visible.h / 2.0;
  return world::box_around(x, y, last_visible.w, last_visible.h);
}

Box predict_box(const BoxContext& ctx) {
  if (ctx.visible) return ctx.detection;
  if (ctx.was_moving) return world::box_around(ctx.center_x, ctx.center_y, ctx.last_visible.w, ctx.last_visible.h);
  if (ctx.is_static) return ctx.last_visible;
  return refine_box(ctx.center_x, ctx.center_y, ctx.last_visible, ctx.others);
}

}  // namespace ramwalk::track
