#include "ramwalk/track/track_io.hpp"

#include <sstream>

#include <fmt/format.h>

#include "ramwalk/util/bytes.hpp"

namespace ramwalk::track {

std::string format_tracks(const std::vector<TrackRecord>& records) {
  std::string out = "# frame id x y w h confidence visibility center_x center_y\n";
  for (const auto& r : records) {
    out += fmt::format("{} {} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {} {:.6f} {:.6f}\n", r.frame, r.id, r.box.x, r.box.y,
                       r.box.w, r.box.h, r.confidence, r.visible ? "visible" : "hypothesized", r.center_x, r.center_y);
  }
  return out;
}

std::vector<TrackRecord> parse_tracks(const std::string& text) {
  std::vector<TrackRecord> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    TrackRecord r;
    std::string vis;
    if (!(fields >> r.frame >> r.id >> r.box.x >> r.box.y >> r.box.w >> r.box.h >> r.confidence >> vis >> r.center_x >>
          r.center_y)) {
      throw TrackFormatError("track file line " + std::to_string(line_no) + ": expected 10 fields");
    }
    if (vis == "visible") {
      r.visible = true;
    } else if (vis == "hypothesized") {
      r.visible = false;
    } else {
      throw TrackFormatError("track file line " + std::to_string(line_no) + ": unknown visibility '" + vis + "'");
    }
    std::string extra;
    if (fields >> extra) throw TrackFormatError("track file line " + std::to_string(line_no) + ": trailing fields");
    out.push_back(r);
  }
  return out;
}

void write_tracks(const std::string& path, const std::vector<TrackRecord>& records) {
  util::write_text_atomic(path, format_tracks(records));
}

std::vector<TrackRecord> read_tracks(const std::string& path) {
  const auto bytes = util::read_file(path);
  return parse_tracks(std::string(bytes.begin(), bytes.end()));
}

}  // namespace ramwalk::track
