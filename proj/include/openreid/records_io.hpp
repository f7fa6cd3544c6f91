#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "openreid/track_engine.hpp"

namespace openreid {

// Detection and track files are JSON lines, one record per line:
//   {"video_id":..,"frame":..,"x":..,"y":..,"w":..,"h":..,"score":..}
// Track files append "track_id".

std::string detection_to_line(const Detection& d);
std::string tracked_to_line(const TrackedDetection& t);
Detection detection_from_line(const std::string& line);
TrackedDetection tracked_from_line(const std::string& line);

std::vector<Detection> read_detections(const std::filesystem::path& path);
std::vector<TrackedDetection> read_tracks(const std::filesystem::path& path);
void write_detections(const std::filesystem::path& path, const std::vector<Detection>& detections);
void write_tracks(const std::filesystem::path& path, const std::vector<TrackedDetection>& tracks);

/// Reads every non-empty line of a text file. Throws IoError if unreadable.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Writes `text` verbatim. Throws IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace openreid
