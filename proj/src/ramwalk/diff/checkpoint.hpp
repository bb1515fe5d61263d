#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ramwalk/diff/tensor.hpp"

namespace ramwalk::diff {

struct NamedTensor {
  std::string name;
  Tensor value;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary layout, little-endian:
//   "RAMWCKPT" | u32 version | u32 count
//   count x { u32 name_len | name | u32 rank | rank x u64 dim }
//   payload: every tensor's f64 values, in manifest order
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint_file(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint_file(const std::string& path);

// Fails with a message listing missing and unexpected names, or mismatched
// shapes, when `loaded` does not have exactly the manifest of `expected`.
void check_manifest(const std::vector<NamedTensor>& expected, const std::vector<NamedTensor>& loaded);

}  // namespace ramwalk::diff
