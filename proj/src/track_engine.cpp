#include "openreid/track_engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Cholesky>

#include "openreid/error.hpp"

namespace openreid {

double iou(const BBox& a, const BBox& b) {
    if (!(a.w > 0 && a.h > 0 && b.w > 0 && b.h > 0)) {
        throw ValidationError("iou: boxes need positive width and height");
    }
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    if (inter <= 0.0) return 0.0;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Kalman filter

namespace {

using Mat84 = Eigen::Matrix<double, 8, 4>;
using Mat48 = Eigen::Matrix<double, 4, 8>;
using Mat44 = Eigen::Matrix<double, 4, 4>;

KalmanBoxFilter::Covariance transition() {
    KalmanBoxFilter::Covariance f = KalmanBoxFilter::Covariance::Identity();
    for (int i = 0; i < 4; ++i) f(i, i + 4) = 1.0;
    return f;
}

Mat48 observation() {
    Mat48 h = Mat48::Zero();
    for (int i = 0; i < 4; ++i) h(i, i) = 1.0;
    return h;
}

}  // namespace

KalmanBoxFilter::Measurement KalmanBoxFilter::to_measurement(const BBox& box) {
    Measurement z;
    z << box.x + box.w / 2.0, box.y + box.h / 2.0, box.w / box.h, box.h;
    return z;
}

BBox KalmanBoxFilter::to_box(const Measurement& z) {
    const double h = z(3);
    const double w = z(2) * h;
    return {z(0) - w / 2.0, z(1) - h / 2.0, w, h};
}

KalmanBoxFilter::KalmanBoxFilter(const BBox& box, KalmanNoise noise) : noise_(noise) {
    const Measurement z = to_measurement(box);
    mean_.setZero();
    mean_.head<4>() = z;
    const double h = z(3);
    const double p = 2.0 * noise_.position_weight * h;
    const double v = 10.0 * noise_.velocity_weight * h;
    State std_dev;
    std_dev << p, p, 1e-2, p, v, v, 1e-5, v;
    cov_ = std_dev.array().square().matrix().asDiagonal();
}

void KalmanBoxFilter::predict() {
    const double h = mean_(3);
    const double p = noise_.position_weight * h;
    const double v = noise_.velocity_weight * h;
    State std_dev;
    std_dev << p, p, 1e-2, p, v, v, 1e-5, v;
    const Covariance q = std_dev.array().square().matrix().asDiagonal();
    static const Covariance f = transition();
    mean_ = f * mean_;
    cov_ = f * cov_ * f.transpose() + q;
}

void KalmanBoxFilter::update(const BBox& box) {
    const Measurement z = to_measurement(box);
    static const Mat48 hm = observation();
    const double h = mean_(3);
    const double p = noise_.position_weight * h;
    Measurement std_dev;
    std_dev << p, p, 1e-1, p;
    const Mat44 r = std_dev.array().square().matrix().asDiagonal();
    const Mat44 s = hm * cov_ * hm.transpose() + r;
    const Mat84 pht = cov_ * hm.transpose();
    // K = P H^T S^-1, solved through the Cholesky factor of S.
    const Mat84 gain = s.llt().solve(pht.transpose()).transpose();
    mean_ += gain * (z - hm * mean_);
    cov_ -= gain * s * gain.transpose();
}

BBox KalmanBoxFilter::box() const { return to_box(mean_.head<4>()); }

const char* to_string(TrackState s) {
    switch (s) {
        case TrackState::Tentative: return "tentative";
        case TrackState::Active: return "active";
        case TrackState::Lost: return "lost";
        case TrackState::Removed: return "removed";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Association

void TrackerConfig::validate() const {
    if (!(tau_high > 0.0 && tau_high <= 1.0)) throw ValidationError("tau_high must lie in (0,1]");
    if (!(tau_low > 0.0 && tau_low <= tau_high)) throw ValidationError("tau_low must lie in (0, tau_high]");
    for (double t : {iou_high, iou_low, iou_tentative}) {
        if (!(t > 0.0 && t <= 1.0)) throw ValidationError("IoU thresholds must lie in (0,1]");
    }
    if (min_hits < 1) throw ValidationError("min_hits must be at least 1");
    if (max_lost < 1) throw ValidationError("max_lost must be at least 1");
    if (!(noise.position_weight > 0.0 && noise.velocity_weight > 0.0)) {
        throw ValidationError("Kalman noise weights must be positive");
    }
}

AssociationResult associate(std::span<const BBox> tracks, std::span<const BBox> detections, double min_iou) {
    AssociationResult result;
    const std::size_t n = tracks.size();
    const std::size_t m = detections.size();
    std::vector<char> det_used(m, 0);

    if (n > 0 && m > 0) {
        // Disallowed pairs cost more than any complete set of allowed pairs, so
        // the optimum first maximises the number of allowed pairs.
        const double forbidden = static_cast<double>(std::min(n, m)) + 1.0;
        CostMatrix cost(n, m);
        std::vector<char> allowed(n * m, 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const double overlap = iou(tracks[i], detections[j]);
                const bool ok = overlap >= min_iou;
                allowed[i * m + j] = ok;
                cost(i, j) = ok ? 1.0 - overlap : forbidden;
            }
        }
        const auto assigned = solve_assignment(cost);
        for (std::size_t i = 0; i < n; ++i) {
            if (assigned[i] && allowed[i * m + *assigned[i]]) {
                result.matches.emplace_back(i, *assigned[i]);
                det_used[*assigned[i]] = 1;
            } else {
                result.unmatched_tracks.push_back(i);
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) result.unmatched_tracks.push_back(i);
    }
    for (std::size_t j = 0; j < m; ++j) {
        if (!det_used[j]) result.unmatched_detections.push_back(j);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Tracker

namespace {

void validate_detection(const Detection& d) {
    if (!(d.bbox.w > 0.0 && d.bbox.h > 0.0) || !std::isfinite(d.bbox.x) || !std::isfinite(d.bbox.y) ||
        !std::isfinite(d.bbox.w) || !std::isfinite(d.bbox.h)) {
        throw ValidationError("detection in video '" + d.video_id + "' frame " + std::to_string(d.frame) +
                              " has an invalid box");
    }
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
        throw ValidationError("detection in video '" + d.video_id + "' frame " + std::to_string(d.frame) +
                              " has a score outside [0,1]");
    }
}

}  // namespace

Tracker::Tracker(TrackerConfig config) : config_(config) { config_.validate(); }

void Tracker::step(std::int64_t frame, std::span<const Detection> detections) {
    if (frame < 0) throw ValidationError("frame numbers must be non-negative");
    if (last_frame_ && frame <= *last_frame_) {
        throw ValidationError("out-of-order frame " + std::to_string(frame) + " after " + std::to_string(*last_frame_));
    }
    for (const auto& d : detections) {
        validate_detection(d);
        if (d.frame != frame) throw ValidationError("detection frame does not match the frame being stepped");
    }
    if (last_frame_) {
        for (std::int64_t skipped = *last_frame_ + 1; skipped < frame; ++skipped) {
            last_frame_ = skipped;
            advance_one_frame();
            // Nothing to associate; run the bookkeeping of an empty frame.
            for (auto& t : tracks_) {
                if (t.state == TrackState::Tentative) t.state = TrackState::Removed;
                if (t.state == TrackState::Active) t.state = TrackState::Lost;
                if (t.state == TrackState::Lost && t.frames_since_update >= config_.max_lost) {
                    t.state = TrackState::Removed;
                }
            }
        }
    }
    last_frame_ = frame;
    advance_one_frame();

    auto update = [&](Track& t, const Detection& d) {
        t.motion.update(d.bbox);
        t.history.push_back(d);
        ++t.hits;
        t.frames_since_update = 0;
        if (t.state == TrackState::Lost) t.state = TrackState::Active;
        if (t.state == TrackState::Tentative && t.hits >= config_.min_hits) {
            t.state = TrackState::Active;
            t.track_id = next_id_++;
        }
    };

    std::vector<std::size_t> high, low;
    for (std::size_t j = 0; j < detections.size(); ++j) {
        const double s = detections[j].score;
        if (s >= config_.tau_high) {
            high.push_back(j);
        } else if (s >= config_.tau_low) {
            low.push_back(j);
        }
    }

    auto boxes_of_tracks = [&](const std::vector<std::size_t>& ids) {
        std::vector<BBox> out;
        out.reserve(ids.size());
        for (std::size_t i : ids) out.push_back(tracks_[i].motion.box());
        return out;
    };
    auto boxes_of_dets = [&](const std::vector<std::size_t>& ids) {
        std::vector<BBox> out;
        out.reserve(ids.size());
        for (std::size_t j : ids) out.push_back(detections[j].bbox);
        return out;
    };

    // Stage 1: Active and Lost tracks against confident detections.
    std::vector<std::size_t> pool, tentative;
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        const auto s = tracks_[i].state;
        if (s == TrackState::Active || s == TrackState::Lost) pool.push_back(i);
        if (s == TrackState::Tentative) tentative.push_back(i);
    }
    const auto first = associate(boxes_of_tracks(pool), boxes_of_dets(high), config_.iou_high);
    for (auto [ti, dj] : first.matches) update(tracks_[pool[ti]], detections[high[dj]]);

    // Stage 2: tracks that were Active but found no confident match try the
    // low-score detections.
    std::vector<std::size_t> remaining;
    for (std::size_t ti : first.unmatched_tracks) {
        if (tracks_[pool[ti]].state == TrackState::Active) remaining.push_back(pool[ti]);
    }
    const auto second = associate(boxes_of_tracks(remaining), boxes_of_dets(low), config_.iou_low);
    for (auto [ti, dj] : second.matches) update(tracks_[remaining[ti]], detections[low[dj]]);
    for (std::size_t ti : second.unmatched_tracks) tracks_[remaining[ti]].state = TrackState::Lost;

    // Tentative tracks only continue on confident detections; one miss ends them.
    std::vector<std::size_t> leftover;
    for (std::size_t dj : first.unmatched_detections) leftover.push_back(high[dj]);
    const auto third = associate(boxes_of_tracks(tentative), boxes_of_dets(leftover), config_.iou_tentative);
    for (auto [ti, dj] : third.matches) update(tracks_[tentative[ti]], detections[leftover[dj]]);
    for (std::size_t ti : third.unmatched_tracks) tracks_[tentative[ti]].state = TrackState::Removed;

    for (auto& t : tracks_) {
        if (t.state == TrackState::Lost && t.frames_since_update >= config_.max_lost) t.state = TrackState::Removed;
    }

    for (std::size_t dj : third.unmatched_detections) {
        const Detection& d = detections[leftover[dj]];
        Track t{tracks_.size(), 0, TrackState::Tentative, {d}, KalmanBoxFilter(d.bbox, config_.noise), 0, 1, 0};
        if (t.hits >= config_.min_hits) {
            t.state = TrackState::Active;
            t.track_id = next_id_++;
        }
        tracks_.push_back(std::move(t));
    }
}

void Tracker::advance_one_frame() {
    for (auto& t : tracks_) {
        if (t.state == TrackState::Removed) continue;
        // A lost box keeps drifting with its velocity but stops growing or shrinking.
        if (t.state == TrackState::Lost) t.motion.mean()(7) = 0.0;
        t.motion.predict();
        ++t.age;
        ++t.frames_since_update;
    }
}

std::vector<TrackedDetection> Tracker::emitted() const {
    std::vector<TrackedDetection> out;
    for (const auto& t : tracks_) {
        if (t.track_id == 0) continue;
        for (const auto& d : t.history) out.push_back({d, t.track_id});
    }
    std::sort(out.begin(), out.end(), [](const TrackedDetection& a, const TrackedDetection& b) {
        if (a.detection.frame != b.detection.frame) return a.detection.frame < b.detection.frame;
        return a.track_id < b.track_id;
    });
    return out;
}

std::vector<TrackedDetection> run_tracker(std::span<const Detection> stream, const TrackerConfig& config) {
    config.validate();
    std::map<std::string, std::vector<const Detection*>> videos;
    for (const auto& d : stream) {
        auto& list = videos[d.video_id];
        if (!list.empty() && d.frame < list.back()->frame) {
            throw ValidationError("video '" + d.video_id + "': frame " + std::to_string(d.frame) + " follows frame " +
                                  std::to_string(list.back()->frame));
        }
        list.push_back(&d);
    }

    std::vector<TrackedDetection> out;
    std::vector<Detection> frame_dets;
    for (const auto& [video, dets] : videos) {
        Tracker tracker(config);
        std::size_t i = 0;
        while (i < dets.size()) {
            const std::int64_t frame = dets[i]->frame;
            frame_dets.clear();
            while (i < dets.size() && dets[i]->frame == frame) frame_dets.push_back(*dets[i++]);
            tracker.step(frame, frame_dets);
        }
        auto tracked = tracker.emitted();
        out.insert(out.end(), std::make_move_iterator(tracked.begin()), std::make_move_iterator(tracked.end()));
    }
    return out;
}

}  // namespace openreid
