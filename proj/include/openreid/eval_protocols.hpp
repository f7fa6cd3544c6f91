#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "openreid/embedding_store.hpp"

namespace openreid {

/// How gallery and query images are drawn.
///  - Track: whole tracks go to one side; a fixed number of frames per track.
///  - Portrait: one held-out image per identity, the rest form the gallery.
enum class SplitMode { Track, Portrait };

SplitMode parse_split_mode(const std::string& name);
const char* to_string(SplitMode mode);

struct SplitParams {
    std::size_t gallery_tracks = 35;
    std::size_t query_tracks = 7;
    std::size_t frames_per_track = 10;
    std::size_t min_portraits = 4;
};

/// Gallery and query rows of a store (indices into its metadata).
struct ReIDSplit {
    std::vector<std::size_t> gallery;
    std::vector<std::size_t> queries;
    std::uint64_t seed = 0;
};

/// Samples one split. Records without an identity are ignored. Raises
/// ValidationError naming the first identity (in sorted order) that cannot
/// satisfy the mode's requirements.
ReIDSplit build_reid_split(std::span<const RecordMeta> records, SplitMode mode, const SplitParams& params,
                           std::uint64_t seed);

/// Throws if the split breaks image or track disjointness, or if a query
/// identity is absent from the gallery.
void check_split(std::span<const RecordMeta> records, const ReIDSplit& split, SplitMode mode);

/// Class-averaged weighted-vote accuracy of the split for every k in
/// `k_values` (result aligned with k_values). A query counts as correct when
/// the vote picks its identity with a positive score.
std::vector<double> eval_reid(const ReIDSplit& split, const EmbeddingStore& store,
                              std::span<const std::size_t> k_values);

/// Index of the best k: highest accuracy, ties to the smaller k.
std::size_t select_best_k(std::span<const double> accuracy, std::span<const std::size_t> k_values);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  ///< population standard deviation
};

MeanStd mean_std(std::span<const double> values);

struct ReidReport {
    SplitMode mode = SplitMode::Track;
    std::vector<std::size_t> k_values;
    std::size_t repetitions = 0;
    std::uint64_t seed = 0;
    std::size_t gallery_size = 0;
    std::size_t query_size = 0;
    std::size_t identities = 0;
    std::vector<double> selection_accuracy;   ///< per k, on the held-out selection split
    std::vector<MeanStd> per_k;               ///< per k, over the reported repetitions
    std::size_t chosen_k = 0;
    MeanStd accuracy;                         ///< at chosen_k, over the reported repetitions
};

/// Full re-identification protocol. Repetition r uses split seed
/// derive_seed(seed, r); the selection split uses derive_seed(seed, repetitions)
/// and never enters the reported numbers.
ReidReport run_reid_protocol(const EmbeddingStore& store, SplitMode mode, const SplitParams& params,
                             std::span<const std::size_t> k_values, std::uint64_t seed, std::size_t repetitions);

struct VerificationPair {
    std::size_t a = 0;  ///< store row, a < b
    std::size_t b = 0;
    bool same = false;

    friend bool operator==(const VerificationPair&, const VerificationPair&) = default;
};

/// Selected images plus all positive pairs and one balanced negative set.
struct VerificationPairSet {
    std::vector<std::size_t> images;
    std::vector<VerificationPair> pairs;  ///< positives first, then negatives
    std::uint64_t negative_set_seed = 0;

    std::size_t positive_count() const;
};

/// Track mode: every identity is cut down to the same number of tracks (the
/// smallest track count, or `min_tracks` when given) and one frame is taken per
/// track. Portrait mode: every labelled image is used. Positives are all
/// within-identity pairs; negatives are a uniform sample, without replacement,
/// of cross-identity pairs of the same size.
VerificationPairSet build_verification_pairs(std::span<const RecordMeta> records, SplitMode mode,
                                             std::optional<std::size_t> min_tracks, std::uint64_t seed);

/// Uniform sample of `count` distinct cross-identity pairs among `images`.
std::vector<VerificationPair> sample_negative_pairs(std::span<const RecordMeta> records,
                                                    std::span<const std::size_t> images, std::size_t count,
                                                    std::uint64_t seed);

/// Mann-Whitney AUC: probability that a positive outscores a negative, ties
/// counted half. Throws if either side is empty.
double roc_auc(std::span<const double> positive_scores, std::span<const double> negative_scores);

/// Same, from a score list and aligned boolean labels.
double roc_auc(std::span<const double> scores, const std::vector<bool>& labels);

struct VerificationReport {
    std::size_t images = 0;
    std::size_t positives = 0;
    std::size_t negatives_per_set = 0;
    std::vector<double> auc_per_set;
    MeanStd auc;
};

/// Scores pairs by cosine similarity. Negative set j is drawn with seed
/// derive_seed(pairs.negative_set_seed, j); set 0 is the one stored in `pairs`.
VerificationReport eval_verification(const VerificationPairSet& pairs, const EmbeddingStore& store,
                                     std::size_t n_negative_sets);

}  // namespace openreid
