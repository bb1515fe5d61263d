#include "ramwalk/diff/checkpoint.hpp"

#include <algorithm>
#include <set>

#include "ramwalk/util/bytes.hpp"

namespace ramwalk::diff {

namespace {
constexpr char kMagic[8] = {'R', 'A', 'M', 'W', 'C', 'K', 'P', 'T'};
}

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& tensors) {
  util::ByteWriter w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) w.u64(d);
  }
  for (const auto& t : tensors) w.f64s(t.value.data().data(), t.value.numel());
  return std::move(w.bytes());
}

std::vector<NamedTensor> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  util::ByteReader r(bytes);
  char magic[8];
  try {
    r.raw(magic, sizeof magic);
  } catch (const util::TruncatedInput&) {
    throw CheckpointError("checkpoint: file too short for header");
  }
  if (!std::equal(magic, magic + 8, kMagic)) throw CheckpointError("checkpoint: bad magic, not a checkpoint file");
  try {
    const auto version = r.u32();
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    const auto count = r.u32();
    std::vector<std::pair<std::string, Shape>> manifest;
    for (std::uint32_t i = 0; i < count; ++i) {
      auto name = r.str();
      const auto rank = r.u32();
      if (rank > 8) throw CheckpointError("checkpoint: implausible rank for " + name);
      Shape shape(rank);
      for (auto& d : shape) d = r.u64();
      manifest.emplace_back(std::move(name), std::move(shape));
    }
    std::vector<NamedTensor> out;
    out.reserve(manifest.size());
    for (auto& [name, shape] : manifest) {
      std::vector<double> values(shape_numel(shape));
      r.f64s(values.data(), values.size());
      out.push_back({name, Tensor(shape, std::move(values))});
    }
    if (r.remaining() != 0) throw CheckpointError("checkpoint: trailing bytes after payload");
    return out;
  } catch (const util::TruncatedInput& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint_file(const std::string& path, const std::vector<NamedTensor>& tensors) {
  util::write_file_atomic(path, encode_checkpoint(tensors));
}

std::vector<NamedTensor> load_checkpoint_file(const std::string& path) {
  return decode_checkpoint(util::read_file(path));
}

void check_manifest(const std::vector<NamedTensor>& expected, const std::vector<NamedTensor>& loaded) {
  std::set<std::string> want, have;
  for (const auto& t : expected) want.insert(t.name);
  for (const auto& t : loaded) have.insert(t.name);
  std::string missing, extra, shapes;
  for (const auto& n : want)
    if (!have.count(n)) missing += (missing.empty() ? "" : ", ") + n;
  for (const auto& n : have)
    if (!want.count(n)) extra += (extra.empty() ? "" : ", ") + n;
  for (const auto& e : expected)
    for (const auto& l : loaded)
      if (e.name == l.name && e.value.shape() != l.value.shape())
        shapes += (shapes.empty() ? "" : ", ") + e.name + " " + shape_str(l.value.shape()) + " (expected " +
                  shape_str(e.value.shape()) + ")";
  if (missing.empty() && extra.empty() && shapes.empty()) return;
  std::string msg = "checkpoint manifest mismatch:";
  if (!missing.empty()) msg += " missing [" + missing + "]";
  if (!extra.empty()) msg += " extra [" + extra + "]";
  if (!shapes.empty()) msg += " shape [" + shapes + "]";
  throw CheckpointError(msg);
}

}  // namespace ramwalk::diff
