#include "ramwalk/world/serialize.hpp"

#include <algorithm>

#include "ramwalk/util/bytes.hpp"

namespace ramwalk::world {

namespace {

constexpr char kSeqMagic[4] = {'R', 'W', 'S', 'Q'};
constexpr char kDatasetMagic[8] = {'R', 'A', 'M', 'W', 'D', 'S', 'E', 'T'};
constexpr std::uint8_t kRedacted = 0xFF;

void write_config(util::ByteWriter& w, const ScenarioConfig& c) {
  for (int v : {c.height, c.width, c.length, c.min_targets, c.max_targets, c.occluders, c.containers, c.target_size,
                c.occluder_width, c.occluder_height, c.container_size, c.speed, c.camera_drift, c.carry_distance}) {
    w.i32(v);
  }
  for (double v : {c.weight_constant, c.weight_turning, c.weight_stop_and_go, c.containment_prob, c.coverage_threshold})
    w.f64(v);
  w.u8(c.require_reappearance ? 1 : 0);
}

ScenarioConfig read_config(util::ByteReader& r) {
  ScenarioConfig c;
  for (int* v : {&c.height, &c.width, &c.length, &c.min_targets, &c.max_targets, &c.occluders, &c.containers,
                 &c.target_size, &c.occluder_width, &c.occluder_height, &c.container_size, &c.speed, &c.camera_drift,
                 &c.carry_distance}) {
    *v = r.i32();
  }
  for (double* v : {&c.weight_constant, &c.weight_turning, &c.weight_stop_and_go, &c.containment_prob,
                    &c.coverage_threshold}) {
    *v = r.f64();
  }
  c.require_reappearance = r.u8() != 0;
  return c;
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const util::TruncatedInput& e) {
    throw Truncated(e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> serialize(const SceneSequence& seq) {
  util::ByteWriter w;
  w.raw(kSeqMagic, sizeof kSeqMagic);
  w.u32(kSequenceVersion);
  w.u64(seq.seed);
  write_config(w, seq.config);
  const auto T = seq.frames.size();
  const std::size_t C = T ? seq.frames[0].dim(0) : kFrameChannels;
  const std::size_t H = T ? seq.frames[0].dim(1) : static_cast<std::size_t>(seq.config.height);
  const std::size_t W = T ? seq.frames[0].dim(2) : static_cast<std::size_t>(seq.config.width);
  w.u32(static_cast<std::uint32_t>(T));
  w.u32(static_cast<std::uint32_t>(C));
  w.u32(static_cast<std::uint32_t>(H));
  w.u32(static_cast<std::uint32_t>(W));
  for (const auto& f : seq.frames) {
    if (f.shape() != diff::Shape{C, H, W}) throw FormatError("serialize: frames have inconsistent shapes");
    w.f64s(f.data().data(), f.numel());
  }
  w.u32(static_cast<std::uint32_t>(seq.tracks.size()));
  for (const auto& tr : seq.tracks) {
    if (tr.entries.size() != T) throw FormatError("serialize: track length differs from frame count");
    w.i32(tr.object_id);
    w.u8(static_cast<std::uint8_t>(tr.shape));
    for (const auto& e : tr.entries) {
      if (!e) {
        w.u8(kRedacted);
        continue;
      }
      w.u8(static_cast<std::uint8_t>(e->state));
      w.i32(e->center.row);
      w.i32(e->center.col);
      w.f64(e->box.x);
      w.f64(e->box.y);
      w.f64(e->box.w);
      w.f64(e->box.h);
    }
  }
  return std::move(w.bytes());
}

SceneSequence deserialize(const std::vector<std::uint8_t>& bytes) {
  return guarded([&] {
    util::ByteReader r(bytes);
    char magic[4];
    r.raw(magic, sizeof magic);
    if (!std::equal(magic, magic + 4, kSeqMagic)) throw VersionMismatch("sequence: bad magic, not a sequence record");
    const auto version = r.u32();
    if (version != kSequenceVersion) {
      throw VersionMismatch("sequence: unsupported version " + std::to_string(version) + " (expected " +
                            std::to_string(kSequenceVersion) + ")");
    }
    SceneSequence seq;
    seq.seed = r.u64();
    seq.config = read_config(r);
    const std::size_t T = r.u32(), C = r.u32(), H = r.u32(), W = r.u32();
    if (C * H * W > (std::size_t{1} << 28)) throw FormatError("sequence: implausible frame size");
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> values(C * H * W);
      r.f64s(values.data(), values.size());
      seq.frames.emplace_back(diff::Shape{C, H, W}, std::move(values));
    }
    const auto n = r.u32();
    for (std::uint32_t k = 0; k < n; ++k) {
      ObjectTrack tr;
      tr.object_id = r.i32();
      const auto shape = r.u8();
      if (shape > 2) throw FormatError("sequence: unknown shape class " + std::to_string(shape));
      tr.shape = static_cast<ShapeClass>(shape);
      tr.entries.resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        const auto state = r.u8();
        if (state == kRedacted) continue;
        if (state > 3) throw FormatError("sequence: unknown visibility state " + std::to_string(state));
        TrackEntry e;
        e.state = static_cast<Visibility>(state);
        e.center.row = r.i32();
        e.center.col = r.i32();
        e.box.x = r.f64();
        e.box.y = r.f64();
        e.box.w = r.f64();
        e.box.h = r.f64();
        tr.entries[t] = e;
      }
      seq.tracks.push_back(std::move(tr));
    }
    if (r.remaining() != 0) throw FormatError("sequence: trailing bytes");
    return seq;
  });
}

std::vector<std::uint8_t> serialize_dataset(const std::vector<SceneSequence>& seqs) {
  util::ByteWriter w;
  w.raw(kDatasetMagic, sizeof kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(seqs.size()));
  for (const auto& s : seqs) {
    const auto bytes = serialize(s);
    w.u64(bytes.size());
    w.raw(bytes.data(), bytes.size());
  }
  return std::move(w.bytes());
}

std::vector<SceneSequence> deserialize_dataset(const std::vector<std::uint8_t>& bytes) {
  return guarded([&] {
    util::ByteReader r(bytes);
    char magic[8];
    r.raw(magic, sizeof magic);
    if (!std::equal(magic, magic + 8, kDatasetMagic)) throw VersionMismatch("dataset: bad magic, not a dataset file");
    const auto version = r.u32();
    if (version != kDatasetVersion) {
      throw VersionMismatch("dataset: unsupported version " + std::to_string(version) + " (expected " +
                            std::to_string(kDatasetVersion) + ")");
    }
    const auto n = r.u32();
    std::vector<SceneSequence> out;
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto size = r.u64();
      if (size > r.remaining()) throw Truncated("dataset: sequence " + std::to_string(i) + " is truncated");
      std::vector<std::uint8_t> chunk(size);
      r.raw(chunk.data(), chunk.size());
      out.push_back(deserialize(chunk));
    }
    if (r.remaining() != 0) throw FormatError("dataset: trailing bytes");
    return out;
  });
}

void save_dataset(const std::string& path, const std::vector<SceneSequence>& seqs) {
  util::write_file_atomic(path, serialize_dataset(seqs));
}

std::vector<SceneSequence> load_dataset(const std::string& path) { return deserialize_dataset(util::read_file(path)); }

}  // namespace ramwalk::world
