#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "openreid/embedding_store.hpp"
#include "openreid/mining_filter.hpp"
#include "openreid/track_engine.hpp"

/// Deterministic desk-scale fixtures: detection streams, mined corpora and
/// labelled embedding stores shaped like the evaluation benchmarks.
namespace openreid::synth {

// --- detection streams ------------------------------------------------------

/// One face drifting right by 2 px/frame at a constant score.
std::vector<Detection> single_object(std::size_t frames = 10, double score = 0.9,
                                     const std::string& video_id = "synth/single");

/// Like single_object, but frames [dip_start, dip_start + dip_length) carry `dip_score`.
std::vector<Detection> confidence_dip(std::size_t frames = 10, std::size_t dip_start = 4, std::size_t dip_length = 2,
                                      double score = 0.9, double dip_score = 0.3,
                                      const std::string& video_id = "synth/dip");

/// A single detection in a single frame.
std::vector<Detection> isolated(double score = 0.9, const std::string& video_id = "synth/isolated");

struct StreamParams {
    std::size_t videos = 3;
    std::size_t frames = 60;
    std::size_t objects = 3;          ///< per video, kept apart so their boxes never overlap
    double dip_probability = 0.1;     ///< chance a visible face scores in the low band
    double miss_probability = 0.05;   ///< chance a face is not detected at all
    double false_positive_rate = 0.05;  ///< expected isolated clutter boxes per frame
    std::uint64_t seed = 0;
};

/// Random multi-video stream, ordered by (video, frame).
std::vector<Detection> random_stream(const StreamParams& params);

// --- mined corpora ----------------------------------------------------------

struct CorpusShape {
    std::string source = "panaf";
    std::size_t videos = 205;
    std::size_t detections = 30000;
    std::size_t faces_per_frame = 2;
};

struct SynthCorpus {
    std::vector<TrackedDetection> tracks;
    std::vector<CorpusStats> expected;  ///< raw-side counts implied by the shapes, sorted by source
};

/// Tracked detections spread evenly over the videos of each shape, with
/// uniform confidences. Expected counts are computed from the shape alone.
SynthCorpus corpus(std::span<const CorpusShape> shapes, std::uint64_t seed);

// --- embedding stores -------------------------------------------------------

struct ClusterNoise {
    double track = 2.5;  ///< per-track offset from the identity centre
    double frame = 0.5;  ///< per-frame jitter around the track centre
};

/// Every identity gets `tracks_per_identity[i]` tracks of `frames_per_track` frames.
EmbeddingStore track_embeddings(std::span<const std::size_t> tracks_per_identity, std::size_t frames_per_track,
                                std::size_t dimension, ClusterNoise noise, std::uint64_t seed);

/// Every identity gets `images_per_identity[i]` images and no track ids.
EmbeddingStore portrait_embeddings(std::span<const std::size_t> images_per_identity, std::size_t dimension,
                                   double noise, std::uint64_t seed);

/// Image counts of a 376-identity, 2853-image portrait benchmark whose
/// within-identity pairs total 15205 (no identity below 4 images).
std::vector<std::size_t> petface_class_sizes();

/// 9 identities x 42 tracks x 10 frames.
EmbeddingStore bossou9_like(std::size_t dimension = 64, std::uint64_t seed = 0, ClusterNoise noise = {});

EmbeddingStore petface_like(std::size_t dimension = 64, std::uint64_t seed = 0, double noise = 1.7);

}  // namespace openreid::synth
