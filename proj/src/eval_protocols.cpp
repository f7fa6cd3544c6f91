#include "openreid/eval_protocols.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include "openreid/error.hpp"
#include "openreid/knn_index.hpp"
#include "openreid/parallel.hpp"
#include "openreid/random.hpp"

namespace openreid {

namespace {

using TrackRows = std::map<std::string, std::vector<std::size_t>>;

/// identity -> track_id -> rows, with rows of each track sorted by image_id.
std::map<std::string, TrackRows> group_tracks(std::span<const RecordMeta> records) {
    std::map<std::string, TrackRows> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!r.identity) continue;
        if (!r.track_id) {
            throw ValidationError("record '" + r.image_id + "' of identity '" + *r.identity +
                                  "' has no track_id (required in track mode)");
        }
        out[*r.identity][*r.track_id].push_back(i);
    }
    for (auto& [identity, tracks] : out) {
        for (auto& [track, rows] : tracks) {
            std::sort(rows.begin(), rows.end(),
                      [&](std::size_t a, std::size_t b) { return records[a].image_id < records[b].image_id; });
        }
    }
    return out;
}

/// identity -> rows sorted by image_id.
std::map<std::string, std::vector<std::size_t>> group_identities(std::span<const RecordMeta> records) {
    std::map<std::string, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].identity) out[*records[i].identity].push_back(i);
    }
    for (auto& [identity, rows] : out) {
        std::sort(rows.begin(), rows.end(),
                  [&](std::size_t a, std::size_t b) { return records[a].image_id < records[b].image_id; });
    }
    return out;
}

std::vector<std::size_t> sample_rows(Rng& rng, std::vector<std::size_t> rows, std::size_t count) {
    rng.sample_front(std::span<std::size_t>(rows), count);
    rows.resize(count);
    return rows;
}

std::uint64_t choose2(std::uint64_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

void check_k_values(std::span<const std::size_t> k_values) {
    if (k_values.empty()) throw ValidationError("k_values must not be empty");
    std::set<std::size_t> seen;
    for (std::size_t k : k_values) {
        if (k == 0) throw ValidationError("every k must be at least 1");
        if (!seen.insert(k).second) throw ValidationError("k_values contains duplicates");
    }
}

}  // namespace

SplitMode parse_split_mode(const std::string& name) {
    if (name == "track") return SplitMode::Track;
    if (name == "portrait") return SplitMode::Portrait;
    throw ValidationError("unknown split mode '" + name + "' (expected 'track' or 'portrait')");
}

const char* to_string(SplitMode mode) { return mode == SplitMode::Track ? "track" : "portrait"; }

// ---------------------------------------------------------------------------
// Re-identification

ReIDSplit build_reid_split(std::span<const RecordMeta> records, SplitMode mode, const SplitParams& params,
                           std::uint64_t seed) {
    ReIDSplit split;
    split.seed = seed;
    Rng rng(seed);

    if (mode == SplitMode::Track) {
        if (params.gallery_tracks == 0 || params.query_tracks == 0 || params.frames_per_track == 0) {
            throw ValidationError("gallery_tracks, query_tracks and frames_per_track must be positive");
        }
        const std::size_t needed = params.gallery_tracks + params.query_tracks;
        for (const auto& [identity, tracks] : group_tracks(records)) {
            std::vector<const std::vector<std::size_t>*> eligible;
            for (const auto& [track, rows] : tracks) {
                if (rows.size() >= params.frames_per_track) eligible.push_back(&rows);
            }
            if (eligible.size() < needed) {
                throw ValidationError("identity '" + identity + "' has " + std::to_string(eligible.size()) +
                                      " tracks with at least " + std::to_string(params.frames_per_track) +
                                      " frames; " + std::to_string(needed) + " required");
            }
            rng.shuffle(std::span(eligible));
            for (std::size_t t = 0; t < needed; ++t) {
                auto frames = sample_rows(rng, *eligible[t], params.frames_per_track);
                auto& side = t < params.gallery_tracks ? split.gallery : split.queries;
                side.insert(side.end(), frames.begin(), frames.end());
            }
        }
    } else {
        if (params.min_portraits < 2) throw ValidationError("min_portraits must be at least 2");
        for (const auto& [identity, rows] : group_identities(records)) {
            if (rows.size() < params.min_portraits) {
                throw ValidationError("identity '" + identity + "' has " + std::to_string(rows.size()) +
                                      " images; at least " + std::to_string(params.min_portraits) + " required");
            }
            const std::size_t held_out = rng.below(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                (i == held_out ? split.queries : split.gallery).push_back(rows[i]);
            }
        }
    }
    if (split.queries.empty()) throw ValidationError("no labelled records to split");

    std::sort(split.gallery.begin(), split.gallery.end());
    std::sort(split.queries.begin(), split.queries.end());
    return split;
}

void check_split(std::span<const RecordMeta> records, const ReIDSplit& split, SplitMode mode) {
    std::unordered_set<std::string> gallery_ids, gallery_tracks, gallery_identities;
    for (std::size_t r : split.gallery) {
        const auto& m = records[r];
        if (!gallery_ids.insert(m.image_id).second) throw ValidationError("image '" + m.image_id + "' repeated in gallery");
        if (m.identity) gallery_identities.insert(*m.identity);
        if (m.track_id) gallery_tracks.insert(m.identity.value_or("") + '\x1f' + *m.track_id);
    }
    for (std::size_t r : split.queries) {
        const auto& m = records[r];
        if (gallery_ids.count(m.image_id)) throw ValidationError("image '" + m.image_id + "' on both sides of the split");
        if (mode == SplitMode::Track && m.track_id &&
            gallery_tracks.count(m.identity.value_or("") + '\x1f' + *m.track_id)) {
            throw ValidationError("track '" + *m.track_id + "' contributes to both gallery and queries");
        }
        if (!m.identity || !gallery_identities.count(*m.identity)) {
            throw ValidationError("query '" + m.image_id + "' has no identity present in the gallery");
        }
    }
}

std::vector<double> eval_reid(const ReIDSplit& split, const EmbeddingStore& store,
                              std::span<const std::size_t> k_values) {
    check_k_values(k_values);
    if (split.queries.empty()) throw ValidationError("split has no queries");
    const auto index = GalleryIndex::from_store(store, split.gallery);
    const std::size_t k_max = *std::max_element(k_values.begin(), k_values.end());
    const std::size_t nk = k_values.size();

    // correct[q * nk + ki]; each worker writes only its own rows.
    std::vector<char> correct(split.queries.size() * nk, 0);
    parallel_for(split.queries.size(), [&](std::size_t q) {
        const std::size_t row = split.queries[q];
        const auto& truth = store.meta(row).identity;
        if (!truth) throw ValidationError("query '" + store.meta(row).image_id + "' has no identity");
        const auto ranked = index.search_topk(store.row(row), k_max);
        for (std::size_t ki = 0; ki < nk; ++ki) {
            const std::size_t k = std::min(k_values[ki], ranked.size());
            const auto vote = weighted_vote(std::span(ranked).first(k));
            correct[q * nk + ki] = vote.score > 0.0 && vote.identity == *truth;
        }
    });

    std::map<std::string, std::pair<std::vector<std::size_t>, std::size_t>> per_identity;  // hits per k, count
    for (std::size_t q = 0; q < split.queries.size(); ++q) {
        auto& [hits, count] = per_identity[*store.meta(split.queries[q]).identity];
        hits.resize(nk, 0);
        ++count;
        for (std::size_t ki = 0; ki < nk; ++ki) hits[ki] += correct[q * nk + ki];
    }
    std::vector<double> accuracy(nk, 0.0);
    for (const auto& [identity, tally] : per_identity) {
        for (std::size_t ki = 0; ki < nk; ++ki) {
            accuracy[ki] += static_cast<double>(tally.first[ki]) / static_cast<double>(tally.second);
        }
    }
    for (auto& a : accuracy) a /= static_cast<double>(per_identity.size());
    return accuracy;
}

std::size_t select_best_k(std::span<const double> accuracy, std::span<const std::size_t> k_values) {
    if (accuracy.size() != k_values.size() || accuracy.empty()) {
        throw ValidationError("select_best_k: accuracy and k_values must be aligned and non-empty");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < accuracy.size(); ++i) {
        if (accuracy[i] > accuracy[best] || (accuracy[i] == accuracy[best] && k_values[i] < k_values[best])) best = i;
    }
    return best;
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) return {};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / n)};
}

ReidReport run_reid_protocol(const EmbeddingStore& store, SplitMode mode, const SplitParams& params,
                             std::span<const std::size_t> k_values, std::uint64_t seed, std::size_t repetitions) {
    check_k_values(k_values);
    if (repetitions == 0) throw ValidationError("repetitions must be at least 1");

    ReidReport report;
    report.mode = mode;
    report.k_values.assign(k_values.begin(), k_values.end());
    report.repetitions = repetitions;
    report.seed = seed;

    const auto& meta = store.metadata();
    const auto selection = build_reid_split(meta, mode, params, derive_seed(seed, repetitions));
    check_split(meta, selection, mode);
    report.selection_accuracy = eval_reid(selection, store, k_values);
    const std::size_t best = select_best_k(report.selection_accuracy, k_values);
    report.chosen_k = k_values[best];

    std::vector<std::vector<double>> by_k(k_values.size());
    for (std::size_t r = 0; r < repetitions; ++r) {
        const auto split = build_reid_split(meta, mode, params, derive_seed(seed, r));
        check_split(meta, split, mode);
        if (r == 0) {
            report.gallery_size = split.gallery.size();
            report.query_size = split.queries.size();
            std::set<std::string> ids;
            for (std::size_t q : split.queries) ids.insert(*meta[q].identity);
            report.identities = ids.size();
        }
        const auto acc = eval_reid(split, store, k_values);
        for (std::size_t ki = 0; ki < k_values.size(); ++ki) by_k[ki].push_back(acc[ki]);
    }
    for (const auto& values : by_k) report.per_k.push_back(mean_std(values));
    report.accuracy = report.per_k[best];
    return report;
}

// ---------------------------------------------------------------------------
// Verification

std::size_t VerificationPairSet::positive_count() const {
    return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.same; }));
}

VerificationPairSet build_verification_pairs(std::span<const RecordMeta> records, SplitMode mode,
                                             std::optional<std::size_t> min_tracks, std::uint64_t seed) {
    Rng rng(seed);
    std::map<std::string, std::vector<std::size_t>> chosen;  // identity -> selected rows

    if (mode == SplitMode::Track) {
        const auto grouped = group_tracks(records);
        std::size_t t = std::numeric_limits<std::size_t>::max();
        for (const auto& [identity, tracks] : grouped) t = std::min(t, tracks.size());
        if (min_tracks) {
            for (const auto& [identity, tracks] : grouped) {
                if (tracks.size() < *min_tracks) {
                    throw ValidationError("identity '" + identity + "' has " + std::to_string(tracks.size()) +
                                          " tracks; " + std::to_string(*min_tracks) + " required");
                }
            }
            t = *min_tracks;
        }
        for (const auto& [identity, tracks] : grouped) {
            std::vector<const std::vector<std::size_t>*> all;
            for (const auto& [track, rows] : tracks) all.push_back(&rows);
            rng.sample_front(std::span(all), t);
            auto& rows = chosen[identity];
            for (std::size_t i = 0; i < t; ++i) rows.push_back((*all[i])[rng.below(all[i]->size())]);
            std::sort(rows.begin(), rows.end());
        }
    } else {
        for (auto& [identity, rows] : group_identities(records)) {
            std::sort(rows.begin(), rows.end());
            chosen[identity] = std::move(rows);
        }
    }
    if (chosen.size() < 2) throw ValidationError("verification needs at least two identities");

    VerificationPairSet set;
    set.negative_set_seed = derive_seed(seed, 1);
    for (const auto& [identity, rows] : chosen) {
        set.images.insert(set.images.end(), rows.begin(), rows.end());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = i + 1; j < rows.size(); ++j) set.pairs.push_back({rows[i], rows[j], true});
        }
    }
    std::sort(set.images.begin(), set.images.end());
    std::sort(set.pairs.begin(), set.pairs.end(),
              [](const auto& x, const auto& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
    const std::size_t positives = set.pairs.size();
    if (positives == 0) throw ValidationError("no within-identity pairs; every identity needs two images");

    auto negatives = sample_negative_pairs(records, set.images, positives, derive_seed(set.negative_set_seed, 0));
    set.pairs.insert(set.pairs.end(), negatives.begin(), negatives.end());
    return set;
}

std::vector<VerificationPair> sample_negative_pairs(std::span<const RecordMeta> records,
                                                    std::span<const std::size_t> images, std::size_t count,
                                                    std::uint64_t seed) {
    const std::size_t n = images.size();
    std::map<std::string, std::uint64_t> sizes;
    for (std::size_t r : images) {
        if (r >= records.size() || !records[r].identity) throw ValidationError("pair image without identity");
        ++sizes[*records[r].identity];
    }
    std::uint64_t same = 0;
    for (const auto& [identity, c] : sizes) same += choose2(c);
    const std::uint64_t cross = choose2(n) - same;
    if (count > cross) {
        throw ValidationError("cannot draw " + std::to_string(count) + " negative pairs; only " +
                              std::to_string(cross) + " cross-identity pairs exist");
    }

    auto identity = [&](std::size_t pos) -> const std::string& { return *records[images[pos]].identity; };
    std::vector<std::pair<std::size_t, std::size_t>> picked;  // positions into images
    picked.reserve(count);
    Rng rng(seed);

    if (2 * count > cross) {
        std::vector<std::pair<std::size_t, std::size_t>> all;
        all.reserve(cross);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (identity(i) != identity(j)) all.emplace_back(i, j);
            }
        }
        rng.sample_front(std::span(all), count);
        picked.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
    } else {
        std::unordered_set<std::uint64_t> seen;
        while (picked.size() < count) {
            std::size_t i = rng.below(n);
            std::size_t j = rng.below(n);
            if (i == j || identity(i) == identity(j)) continue;
            if (i > j) std::swap(i, j);
            if (seen.insert(static_cast<std::uint64_t>(i) * n + j).second) picked.emplace_back(i, j);
        }
    }

    std::vector<VerificationPair> out;
    out.reserve(count);
    for (auto [i, j] : picked) {
        const std::size_t a = images[i], b = images[j];
        out.push_back({std::min(a, b), std::max(a, b), false});
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
    return out;
}

double roc_auc(std::span<const double> positive_scores, std::span<const double> negative_scores) {
    if (positive_scores.empty() || negative_scores.empty()) {
        throw ValidationError("roc_auc needs at least one positive and one negative");
    }
    std::vector<std::pair<double, bool>> all;
    all.reserve(positive_scores.size() + negative_scores.size());
    for (double s : positive_scores) all.emplace_back(s, true);
    for (double s : negative_scores) all.emplace_back(s, false);
    for (const auto& [s, pos] : all) {
        if (!std::isfinite(s)) throw ValidationError("roc_auc: scores must be finite");
    }
    std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

    // Twice the Mann-Whitney U, kept integral: a positive beats every negative
    // strictly below it (2 each) and ties with those at its own score (1 each).
    std::uint64_t twice_u = 0;
    std::uint64_t negatives_below = 0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        std::uint64_t p = 0, q = 0;
        while (j < all.size() && all[j].first == all[i].first) {
            (all[j].second ? p : q) += 1;
            ++j;
        }
        twice_u += p * (2 * negatives_below + q);
        negatives_below += q;
        i = j;
    }
    const double pairs = static_cast<double>(positive_scores.size()) * static_cast<double>(negative_scores.size());
    return static_cast<double>(twice_u) / (2.0 * pairs);
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw ValidationError("roc_auc: scores and labels differ in length");
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? pos : neg).push_back(scores[i]);
    return roc_auc(pos, neg);
}

VerificationReport eval_verification(const VerificationPairSet& pairs, const EmbeddingStore& store,
                                     std::size_t n_negative_sets) {
    if (n_negative_sets == 0) throw ValidationError("n_negative_sets must be at least 1");
    if (!store.normalized()) throw ValidationError("verification requires a normalized embedding store");
    for (std::size_t r : pairs.images) {
        if (r >= store.size()) throw ValidationError("pair set refers to rows outside the store");
    }

    std::vector<double> positive_scores;
    for (const auto& p : pairs.pairs) {
        if (p.same) positive_scores.push_back(store.cosine(p.a, p.b));
    }

    VerificationReport report;
    report.images = pairs.images.size();
    report.positives = positive_scores.size();
    report.negatives_per_set = positive_scores.size();
    report.auc_per_set.resize(n_negative_sets);

    const auto& meta = store.metadata();
    parallel_for(n_negative_sets, [&](std::size_t j) {
        const auto negatives =
            sample_negative_pairs(meta, pairs.images, report.positives, derive_seed(pairs.negative_set_seed, j));
        std::vector<double> negative_scores;
        negative_scores.reserve(negatives.size());
        for (const auto& p : negatives) negative_scores.push_back(store.cosine(p.a, p.b));
        report.auc_per_set[j] = roc_auc(positive_scores, negative_scores);
    });
    report.auc = mean_std(report.auc_per_set);
    return report;
}

}  // namespace openreid
