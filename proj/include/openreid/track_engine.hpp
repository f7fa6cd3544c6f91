#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "openreid/assignment.hpp"

namespace openreid {

/// Axis-aligned box, top-left corner plus size, in pixels.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// Intersection over union. Both boxes need positive width and height.
double iou(const BBox& a, const BBox& b);

struct Detection {
    std::string video_id;
    std::int64_t frame = 0;
    BBox bbox;
    double score = 0.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// A detection with the track it was assigned to.
struct TrackedDetection {
    Detection detection;
    std::int64_t track_id = 0;

    friend bool operator==(const TrackedDetection&, const TrackedDetection&) = default;
};

/// Noise scales of the constant-velocity box filter. Standard deviations are
/// proportional to the box height, as in SORT-family trackers.
struct KalmanNoise {
    double position_weight = 1.0 / 20.0;
    double velocity_weight = 1.0 / 160.0;
};

/// Eight-dimensional constant-velocity Kalman filter over
/// (center x, center y, aspect w/h, height) and their velocities.
class KalmanBoxFilter {
public:
    using State = Eigen::Matrix<double, 8, 1>;
    using Covariance = Eigen::Matrix<double, 8, 8>;
    using Measurement = Eigen::Matrix<double, 4, 1>;

    explicit KalmanBoxFilter(const BBox& box, KalmanNoise noise = {});

    /// Advances one frame.
    void predict();

    /// Folds in an observed box.
    void update(const BBox& box);

    BBox box() const;
    const State& mean() const noexcept { return mean_; }
    const Covariance& covariance() const noexcept { return cov_; }
    State& mean() noexcept { return mean_; }

    static Measurement to_measurement(const BBox& box);
    static BBox to_box(const Measurement& z);

private:
    KalmanNoise noise_;
    State mean_;
    Covariance cov_;
};

enum class TrackState { Tentative, Active, Lost, Removed };

const char* to_string(TrackState s);

struct Track {
    std::size_t slot = 0;        ///< internal creation index, stable for the life of the tracker
    std::int64_t track_id = 0;   ///< public id, 0 until the track first becomes Active
    TrackState state = TrackState::Tentative;
    std::vector<Detection> history;
    KalmanBoxFilter motion;
    std::int64_t age = 0;
    std::int64_t hits = 0;
    std::int64_t frames_since_update = 0;
};

struct TrackerConfig {
    double tau_high = 0.6;
    double tau_low = 0.1;
    double iou_high = 0.2;       ///< stage 1: Active+Lost tracks vs high-score detections
    double iou_low = 0.5;        ///< stage 2: remaining Active tracks vs low-score detections
    double iou_tentative = 0.3;  ///< Tentative tracks vs leftover high-score detections
    std::int64_t min_hits = 3;
    std::int64_t max_lost = 30;
    KalmanNoise noise;

    /// Throws ValidationError on inconsistent thresholds.
    void validate() const;
};

struct AssociationResult {
    std::vector<std::pair<std::size_t, std::size_t>> matches;  ///< (track, detection), sorted by track
    std::vector<std::size_t> unmatched_tracks;
    std::vector<std::size_t> unmatched_detections;
};

/// Optimal matching on cost 1 - IoU where pairs with IoU below `min_iou` are
/// not allowed. Among matchings with the largest number of allowed pairs the
/// one with the smallest summed cost is returned.
AssociationResult associate(std::span<const BBox> tracks, std::span<const BBox> detections, double min_iou);

/// Two-stage (high then low confidence) multi-object tracker for one video.
class Tracker {
public:
    explicit Tracker(TrackerConfig config = {});

    /// Processes every detection of one frame. Frames must strictly increase
    /// between calls; skipped frames count as frames without detections.
    void step(std::int64_t frame, std::span<const Detection> detections);

    const std::vector<Track>& tracks() const noexcept { return tracks_; }
    const TrackerConfig& config() const noexcept { return config_; }

    /// Detections of every track that reached Active, ordered by (frame, track_id).
    std::vector<TrackedDetection> emitted() const;

private:
    void advance_one_frame();

    TrackerConfig config_;
    std::vector<Track> tracks_;
    std::optional<std::int64_t> last_frame_;
    std::int64_t next_id_ = 1;
};

/// Tracks every video of a detection stream independently. Videos are
/// processed in ascending video_id order; within a video detections must come
/// in non-decreasing frame order.
std::vector<TrackedDetection> run_tracker(std::span<const Detection> stream, const TrackerConfig& config);

}  // namespace openreid
