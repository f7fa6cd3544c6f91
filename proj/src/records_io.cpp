#include "openreid/records_io.hpp"

#include <fstream>

#include <json.hpp>

#include "openreid/error.hpp"

namespace openreid {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json detection_json(const Detection& d) {
    ordered_json j;
    j["video_id"] = d.video_id;
    j["frame"] = d.frame;
    j["x"] = d.bbox.x;
    j["y"] = d.bbox.y;
    j["w"] = d.bbox.w;
    j["h"] = d.bbox.h;
    j["score"] = d.score;
    return j;
}

Detection parse_detection(const nlohmann::json& j) {
    Detection d;
    d.video_id = j.at("video_id").get<std::string>();
    d.frame = j.at("frame").get<std::int64_t>();
    d.bbox = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(), j.at("h").get<double>()};
    d.score = j.at("score").get<double>();
    return d;
}

template <typename Parse>
auto parse_line(const std::string& line, Parse parse) {
    try {
        return parse(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed record line: " + std::string(e.what()));
    }
}

template <typename T, typename Parse>
std::vector<T> read_records(const std::filesystem::path& path, Parse parse) {
    std::vector<T> out;
    std::size_t line_no = 0;
    for (const auto& line : read_lines(path)) {
        ++line_no;
        try {
            out.push_back(parse(line));
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

std::string detection_to_line(const Detection& d) { return detection_json(d).dump(); }

std::string tracked_to_line(const TrackedDetection& t) {
    auto j = detection_json(t.detection);
    j["track_id"] = t.track_id;
    return j.dump();
}

Detection detection_from_line(const std::string& line) { return parse_line(line, parse_detection); }

TrackedDetection tracked_from_line(const std::string& line) {
    return parse_line(line, [](const nlohmann::json& j) {
        return TrackedDetection{parse_detection(j), j.at("track_id").get<std::int64_t>()};
    });
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
    return read_records<Detection>(path, detection_from_line);
}

std::vector<TrackedDetection> read_tracks(const std::filesystem::path& path) {
    return read_records<TrackedDetection>(path, tracked_from_line);
}

void write_detections(const std::filesystem::path& path, const std::vector<Detection>& detections) {
    std::string text;
    for (const auto& d : detections) text += detection_to_line(d) + '\n';
    write_text(path, text);
}

void write_tracks(const std::filesystem::path& path, const std::vector<TrackedDetection>& tracks) {
    std::string text;
    for (const auto& t : tracks) text += tracked_to_line(t) + '\n';
    write_text(path, text);
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(std::move(line));
    }
    return lines;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace openreid
