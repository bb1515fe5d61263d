#include "ramwalk/world/render.hpp"

#include <algorithm>
#include <numeric>

namespace ramwalk::world {

std::vector<int> paint_owners(int height, int width, const std::vector<ObjectPath>& paths, std::size_t frame) {
  std::vector<std::size_t> order(paths.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return depth_of(paths[a].shape) < depth_of(paths[b].shape);
  });
  std::vector<int> owners(static_cast<std::size_t>(height * width), kNoOwner);
  for (auto k : order) {
    const auto& p = paths[k];
    const Cell tl = p.top_left[frame];
    for (int r = std::max(0, tl.row); r < std::min(height, tl.row + p.height); ++r)
      for (int c = std::max(0, tl.col); c < std::min(width, tl.col + p.width); ++c)
        owners[static_cast<std::size_t>(r * width + c)] = static_cast<int>(k);
  }
  return owners;
}

double covered_fraction(const std::vector<int>& owners, int width, const std::vector<ObjectPath>& paths,
                        std::size_t k, std::size_t frame) {
  const auto& p = paths[k];
  const Cell tl = p.top_left[frame];
  const int height = static_cast<int>(owners.size()) / width;
  int area = 0;
  int covered = 0;
  for (int r = std::max(0, tl.row); r < std::min(height, tl.row + p.height); ++r)
    for (int c = std::max(0, tl.col); c < std::min(width, tl.col + p.width); ++c) {
      ++area;
      if (owners[static_cast<std::size_t>(r * width + c)] != static_cast<int>(k)) ++covered;
    }
  return area == 0 ? 1.0 : static_cast<double>(covered) / area;
}

diff::Tensor render_frame(int height, int width, const std::vector<ObjectPath>& paths, const std::vector<int>& owners) {
  const auto plane = static_cast<std::size_t>(height * width);
  std::vector<double> values(kFrameChannels * plane, 0.0);
  for (std::size_t i = 0; i < plane; ++i) {
    const int o = owners[i];
    if (o == kNoOwner) continue;
    const auto& p = paths[static_cast<std::size_t>(o)];
    values[static_cast<std::size_t>(p.shape) * plane + i] = 1.0;
    values[3 * plane + i] = p.intensity;
  }
  return diff::Tensor({kFrameChannels, static_cast<std::size_t>(height), static_cast<std::size_t>(width)},
                      std::move(values));
}

}  // namespace ramwalk::world
