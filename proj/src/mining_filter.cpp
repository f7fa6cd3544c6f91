#include "openreid/mining_filter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <string_view>
#include <unordered_set>

#include "openreid/error.hpp"
#include "openreid/random.hpp"

namespace openreid {

namespace {

void check_fraction(double f, const char* name) {
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError(std::string(name) + " must lie in (0,1]");
}

bool by_image_id(const CorpusRecord& a, const CorpusRecord& b) { return a.image_id < b.image_id; }

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

double snapped(double fraction, std::size_t n) {
    const double p = fraction * static_cast<double>(n);
    const double r = std::round(p);
    return std::abs(p - r) <= 1e-9 * std::max(1.0, p) ? r : p;
}

}  // namespace

std::string source_of(const std::string& video_id) {
    const auto slash = video_id.find('/');
    if (slash == std::string::npos || slash == 0) return "default";
    return video_id.substr(0, slash);
}

std::string image_id_of(const TrackedDetection& t) {
    char frame[32];
    std::snprintf(frame, sizeof frame, "%06lld", static_cast<long long>(t.detection.frame));
    return t.detection.video_id + ":" + frame + ":t" + std::to_string(t.track_id);
}

std::vector<CorpusRecord> corpus_from_tracks(std::span<const TrackedDetection> tracks) {
    std::vector<CorpusRecord> out;
    out.reserve(tracks.size());
    for (const auto& t : tracks) {
        out.push_back({image_id_of(t), t.detection.video_id, t.detection.frame, t.track_id,
                       source_of(t.detection.video_id), t.detection.score});
    }
    return out;
}

std::size_t ceil_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::ceil(snapped(fraction, n)));
}

std::size_t floor_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::floor(snapped(fraction, n)));
}

std::vector<CorpusRecord> filter_corpus(std::span<const CorpusRecord> records, double keep_fraction,
                                        double subsample_fraction, std::uint64_t seed) {
    check_fraction(keep_fraction, "keep_fraction");
    check_fraction(subsample_fraction, "subsample_fraction");
    if (records.empty()) return {};

    std::vector<const CorpusRecord*> ranked;
    ranked.reserve(records.size());
    std::unordered_set<std::string_view> seen;
    for (const auto& r : records) {
        if (!seen.insert(r.image_id).second) throw ValidationError("duplicate image_id '" + r.image_id + "'");
        if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
            throw ValidationError("record '" + r.image_id + "' has confidence outside [0,1]");
        }
        ranked.push_back(&r);
    }
    std::sort(ranked.begin(), ranked.end(), [](const CorpusRecord* a, const CorpusRecord* b) {
        if (a->confidence != b->confidence) return a->confidence > b->confidence;
        return a->image_id < b->image_id;
    });

    const std::size_t kept = ceil_count(keep_fraction, ranked.size());
    ranked.resize(kept);
    const std::size_t sampled = floor_count(subsample_fraction, kept);

    Rng rng(seed);
    rng.sample_front(std::span<const CorpusRecord*>(ranked), sampled);

    std::vector<CorpusRecord> out;
    out.reserve(sampled);
    for (std::size_t i = 0; i < sampled; ++i) out.push_back(*ranked[i]);
    std::sort(out.begin(), out.end(), by_image_id);
    return out;
}

const FilterFractions& FilterPolicy::fractions_for(const std::string& source) const {
    auto it = per_source.find(source);
    return it == per_source.end() ? fallback : it->second;
}

std::vector<CorpusRecord> filter_by_source(std::span<const CorpusRecord> records, const FilterPolicy& policy,
                                           std::uint64_t seed) {
    std::map<std::string, std::vector<CorpusRecord>> groups;
    for (const auto& r : records) groups[r.source].push_back(r);

    std::vector<CorpusRecord> out;
    for (const auto& [source, group] : groups) {
        const auto& f = policy.fractions_for(source);
        auto kept = filter_corpus(group, f.keep, f.subsample, derive_seed(seed, fnv1a(source)));
        out.insert(out.end(), std::make_move_iterator(kept.begin()), std::make_move_iterator(kept.end()));
    }
    std::sort(out.begin(), out.end(), by_image_id);
    return out;
}

std::vector<CorpusStats> corpus_stats(std::span<const CorpusRecord> raw, std::span<const CorpusRecord> filtered) {
    struct Tally {
        std::set<std::string> videos;
        std::set<std::pair<std::string, std::int64_t>> frames;
        std::size_t raw = 0;
        std::size_t filtered = 0;
    };
    std::map<std::string, Tally> by_source;
    for (const auto& r : raw) {
        auto& t = by_source[r.source];
        t.videos.insert(r.video_id);
        t.frames.emplace(r.video_id, r.frame);
        ++t.raw;
    }
    for (const auto& r : filtered) ++by_source[r.source].filtered;

    std::vector<CorpusStats> out;
    for (const auto& [source, t] : by_source) {
        if (t.filtered > t.raw) {
            throw ValidationError("source '" + source + "': filtered corpus is larger than the raw corpus");
        }
        out.push_back({source, t.videos.size(), t.frames.size(), t.raw, t.filtered});
    }
    return out;
}

}  // namespace openreid
