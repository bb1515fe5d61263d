#pragma once

#include <cstddef>
#include <vector>

#include "ramwalk/diff/tensor.hpp"
#include "ramwalk/world/world.hpp"

namespace ramwalk::world {

inline constexpr int kNoOwner = -1;

// Painter's algorithm: objects sorted by (depth, index) and drawn far to near.
// Returns, per pixel (row-major), the index of the object drawn last or kNoOwner.
std::vector<int> paint_owners(int height, int width, const std::vector<ObjectPath>& paths, std::size_t frame);

// Fraction of object k's box whose pixels are owned by another object.
double covered_fraction(const std::vector<int>& owners, int width, const std::vector<ObjectPath>& paths,
                        std::size_t k, std::size_t frame);

// [kFrameChannels, H, W]: one-hot class channel of the owning object plus its intensity.
diff::Tensor render_frame(int height, int width, const std::vector<ObjectPath>& paths, const std::vector<int>& owners);

}  // namespace ramwalk::world
