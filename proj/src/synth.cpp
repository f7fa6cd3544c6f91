#include "openreid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "openreid/error.hpp"
#include "openreid/random.hpp"

namespace openreid::synth {

namespace {

std::string numbered(const char* prefix, std::size_t n, int width) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, n);
    return buf;
}

std::vector<float> gaussian(Rng& rng, std::size_t d, double scale) {
    std::vector<float> v(d);
    for (auto& x : v) x = static_cast<float>(scale * rng.normal());
    return v;
}

std::vector<float> jitter(Rng& rng, const std::vector<float>& centre, double scale) {
    std::vector<float> v(centre.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(centre[i] + scale * rng.normal());
    return v;
}

}  // namespace

std::vector<Detection> single_object(std::size_t frames, double score, const std::string& video_id) {
    std::vector<Detection> out;
    for (std::size_t f = 0; f < frames; ++f) {
        out.push_back({video_id, static_cast<std::int64_t>(f), {100.0 + 2.0 * f, 80.0, 40.0, 50.0}, score});
    }
    return out;
}

std::vector<Detection> confidence_dip(std::size_t frames, std::size_t dip_start, std::size_t dip_length, double score,
                                      double dip_score, const std::string& video_id) {
    auto out = single_object(frames, score, video_id);
    for (std::size_t f = dip_start; f < std::min(frames, dip_start + dip_length); ++f) out[f].score = dip_score;
    return out;
}

std::vector<Detection> isolated(double score, const std::string& video_id) {
    return {{video_id, 0, {200.0, 120.0, 40.0, 50.0}, score}};
}

std::vector<Detection> random_stream(const StreamParams& params) {
    Rng rng(params.seed);
    std::vector<Detection> out;
    for (std::size_t v = 0; v < params.videos; ++v) {
        const std::string video = numbered("synth/rv", v, 3);
        struct Object {
            double x, y, vx, vy, w, h;
        };
        std::vector<Object> objects;
        for (std::size_t o = 0; o < params.objects; ++o) {
            // Each object lives in its own 400 px wide lane.
            objects.push_back({400.0 * o + rng.uniform(50, 100), rng.uniform(50, 300), rng.uniform(-1.5, 1.5),
                               rng.uniform(-1.0, 1.0), rng.uniform(30, 60), rng.uniform(40, 70)});
        }
        for (std::size_t f = 0; f < params.frames; ++f) {
            for (auto& o : objects) {
                o.x += o.vx + 0.3 * rng.normal();
                o.y += o.vy + 0.3 * rng.normal();
                if (rng.uniform() < params.miss_probability) continue;
                const double score = rng.uniform() < params.dip_probability ? rng.uniform(0.15, 0.55)
                                                                            : rng.uniform(0.65, 0.99);
                out.push_back({video, static_cast<std::int64_t>(f), {o.x, o.y, o.w, o.h}, score});
            }
            if (rng.uniform() < params.false_positive_rate) {
                // Clutter below the object lanes.
                out.push_back({video, static_cast<std::int64_t>(f),
                               {rng.uniform(0, 400.0 * params.objects), rng.uniform(600, 900), 30, 30},
                               rng.uniform(0.6, 0.9)});
            }
        }
    }
    return out;
}

SynthCorpus corpus(std::span<const CorpusShape> shapes, std::uint64_t seed) {
    Rng rng(seed);
    SynthCorpus out;
    std::map<std::string, CorpusStats> expected;
    for (const auto& shape : shapes) {
        if (shape.videos == 0 || shape.faces_per_frame == 0) {
            throw ValidationError("corpus shape needs at least one video and one face per frame");
        }
        auto& stats = expected[shape.source];
        stats.source = shape.source;
        for (std::size_t v = 0; v < shape.videos; ++v) {
            const std::size_t count = shape.detections / shape.videos + (v < shape.detections % shape.videos ? 1 : 0);
            if (count == 0) continue;
            const std::string video = shape.source + "/" + numbered("v", v, 5);
            ++stats.videos;
            stats.frames += (count + shape.faces_per_frame - 1) / shape.faces_per_frame;
            stats.raw_detections += count;
            for (std::size_t i = 0; i < count; ++i) {
                const auto frame = static_cast<std::int64_t>(i / shape.faces_per_frame);
                const auto slot = static_cast<std::int64_t>(i % shape.faces_per_frame);
                const Detection d{video, frame, {100.0 + 150.0 * slot + frame, 60.0, 40.0, 48.0}, rng.uniform()};
                out.tracks.push_back({d, slot + 1});
            }
        }
    }
    for (auto& [source, stats] : expected) out.expected.push_back(stats);
    return out;
}

EmbeddingStore track_embeddings(std::span<const std::size_t> tracks_per_identity, std::size_t frames_per_track,
                                std::size_t dimension, ClusterNoise noise, std::uint64_t seed) {
    Rng rng(seed);
    const double unit = 1.0 / std::sqrt(static_cast<double>(dimension));
    std::vector<EmbeddingRecord> records;
    for (std::size_t i = 0; i < tracks_per_identity.size(); ++i) {
        const std::string identity = numbered("id", i, 3);
        const auto centre = normalize(gaussian(rng, dimension, 1.0));
        for (std::size_t t = 0; t < tracks_per_identity[i]; ++t) {
            const std::string track = identity + numbered("-t", t, 3);
            const auto track_centre = jitter(rng, centre, noise.track * unit);
            for (std::size_t f = 0; f < frames_per_track; ++f) {
                RecordMeta meta{track + numbered("-f", f, 3), track, identity, "synth", 1.0};
                records.push_back({std::move(meta), jitter(rng, track_centre, noise.frame * unit)});
            }
        }
    }
    if (records.empty()) return EmbeddingStore::empty(dimension);
    return EmbeddingStore::from_records(std::move(records));
}

EmbeddingStore portrait_embeddings(std::span<const std::size_t> images_per_identity, std::size_t dimension,
                                   double noise, std::uint64_t seed) {
    Rng rng(seed);
    const double unit = 1.0 / std::sqrt(static_cast<double>(dimension));
    std::vector<EmbeddingRecord> records;
    for (std::size_t i = 0; i < images_per_identity.size(); ++i) {
        const std::string identity = numbered("id", i, 3);
        const auto centre = normalize(gaussian(rng, dimension, 1.0));
        for (std::size_t k = 0; k < images_per_identity[i]; ++k) {
            RecordMeta meta{identity + numbered("-p", k, 3), std::nullopt, identity, "synth", 1.0};
            records.push_back({std::move(meta), jitter(rng, centre, noise * unit)});
        }
    }
    if (records.empty()) return EmbeddingStore::empty(dimension);
    return EmbeddingStore::from_records(std::move(records));
}

std::vector<std::size_t> petface_class_sizes() {
    // (images per identity, number of identities)
    static constexpr std::pair<std::size_t, std::size_t> histogram[] = {
        {4, 206}, {5, 16}, {6, 14}, {7, 15}, {8, 13}, {9, 17}, {10, 11}, {11, 8}, {12, 7},
        {13, 10}, {14, 8}, {15, 9}, {16, 11}, {17, 8}, {18, 2}, {19, 3}, {20, 2}, {21, 1},
        {22, 3},  {23, 3}, {24, 1}, {25, 3}, {26, 1}, {27, 1}, {29, 1}, {30, 1}, {32, 1},
    };
    std::vector<std::size_t> sizes;
    for (auto [images, count] : histogram) sizes.insert(sizes.end(), count, images);
    // Interleave large and small classes so identity order carries no size trend.
    Rng rng(376);
    rng.shuffle(std::span(sizes));
    return sizes;
}

EmbeddingStore bossou9_like(std::size_t dimension, std::uint64_t seed, ClusterNoise noise) {
    const std::vector<std::size_t> tracks(9, 42);
    return track_embeddings(tracks, 10, dimension, noise, seed);
}

EmbeddingStore petface_like(std::size_t dimension, std::uint64_t seed, double noise) {
    return portrait_embeddings(petface_class_sizes(), dimension, noise, seed);
}

}  // namespace openreid::synth
