#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "openreid/track_engine.hpp"

namespace openreid {

/// One mined face crop as seen by the corpus filter.
struct CorpusRecord {
    std::string image_id;
    std::string video_id;
    std::int64_t frame = 0;
    std::int64_t track_id = 0;
    std::string source;
    double confidence = 0.0;

    friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

struct CorpusStats {
    std::string source;
    std::size_t videos = 0;
    std::size_t frames = 0;  ///< distinct (video, frame) pairs holding at least one detection
    std::size_t raw_detections = 0;
    std::size_t filtered_detections = 0;

    friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

/// Corpus tag of a video: the part of video_id before the first '/', or
/// "default" when there is none.
std::string source_of(const std::string& video_id);

/// Image id of a tracked crop: `<video_id>:<frame, 6+ digits>:t<track_id>`.
std::string image_id_of(const TrackedDetection& t);

std::vector<CorpusRecord> corpus_from_tracks(std::span<const TrackedDetection> tracks);

/// ceil(fraction * n) and floor(fraction * n), with products within 1e-9 of
/// an integer snapped to it so that e.g. 0.2 * 30000 is exactly 6000.
std::size_t ceil_count(double fraction, std::size_t n);
std::size_t floor_count(double fraction, std::size_t n);

/// Keeps the ceil(keep_fraction * n) most confident records (ties broken by
/// image_id), then a uniform sample of floor(subsample_fraction * m) of those.
/// Output is ordered by image_id.
std::vector<CorpusRecord> filter_corpus(std::span<const CorpusRecord> records, double keep_fraction,
                                        double subsample_fraction, std::uint64_t seed);

struct FilterFractions {
    double keep = 1.0;
    double subsample = 1.0;
};

/// Source-specific fractions with a fallback for unlisted sources.
struct FilterPolicy {
    FilterFractions fallback;
    std::map<std::string, FilterFractions> per_source;

    const FilterFractions& fractions_for(const std::string& source) const;
};

/// filter_corpus applied to each source separately. The seed of each source is
/// derived from `seed` and the source name, so adding a source leaves the
/// others untouched. Output is ordered by image_id.
std::vector<CorpusRecord> filter_by_source(std::span<const CorpusRecord> records, const FilterPolicy& policy,
                                           std::uint64_t seed);

/// Per-source counts of the raw corpus and of the retained subset, sorted by source.
std::vector<CorpusStats> corpus_stats(std::span<const CorpusRecord> raw, std::span<const CorpusRecord> filtered);

}  // namespace openreid
