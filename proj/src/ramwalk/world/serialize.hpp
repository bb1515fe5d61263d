#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ramwalk/world/world.hpp"

namespace ramwalk::world {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class Truncated : public FormatError {
 public:
  using FormatError::FormatError;
};

inline constexpr std::uint32_t kSequenceVersion = 1;
inline constexpr std::uint32_t kDatasetVersion = 1;

// Sequence layout (little-endian):
//   "RWSQ" | u32 version | u64 seed | scenario fields | u32 T | u32 C | u32 H | u32 W
//   T x C*H*W f64 frame values
//   u32 track count, per track: i32 id | u8 shape | T x (u8 state, 0xFF = redacted,
//   followed when present by i32 row | i32 col | f64 x | f64 y | f64 w | f64 h)
std::vector<std::uint8_t> serialize(const SceneSequence& seq);
SceneSequence deserialize(const std::vector<std::uint8_t>& bytes);

// Dataset container: "RAMWDSET" | u32 version | u32 count | count x (u64 size | sequence bytes).
std::vector<std::uint8_t> serialize_dataset(const std::vector<SceneSequence>& seqs);
std::vector<SceneSequence> deserialize_dataset(const std::vector<std::uint8_t>& bytes);

void save_dataset(const std::string& path, const std::vector<SceneSequence>& seqs);
std::vector<SceneSequence> load_dataset(const std::string& path);

}  // namespace ramwalk::world
