#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ramwalk/track/tracker.hpp"

namespace ramwalk::track {

class TrackFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Plain-text track file. Lines starting with '#' are comments; every other
// line is one record:
//
//   frame id x y w h confidence visible|hypothesized center_x center_y
//
// Box and center coordinates are pixels; numbers use fixed six-digit precision.
std::string format_tracks(const std::vector<TrackRecord>& records);
std::vector<TrackRecord> parse_tracks(const std::string& text);

void write_tracks(const std::string& path, const std::vector<TrackRecord>& records);
std::vector<TrackRecord> read_tracks(const std::string& path);

}  // namespace ramwalk::track
