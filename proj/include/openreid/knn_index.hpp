#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "openreid/embedding_store.hpp"

namespace openreid {

struct Neighbor {
    std::size_t row = 0;  ///< gallery row (position inside the index)
    double similarity = 0.0;
    std::string identity;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Outcome of the weighted neighbourhood vote.
struct Identification {
    std::string identity;
    double score = 0.0;  ///< winning vote mass over total vote mass, 0 if no mass
};

/// Exact cosine k-NN over unit-norm gallery rows.
///
/// Rows are copied into a contiguous matrix at build time, so the index is
/// independent of the store it came from and safe to query from many threads.
class GalleryIndex {
public:
    /// Builds from `rows` of a normalized store. Every selected row must carry an
    /// identity label.
    static GalleryIndex from_store(const EmbeddingStore& store, std::span<const std::size_t> rows);

    /// Whole store.
    static GalleryIndex from_store(const EmbeddingStore& store);

    /// Raw constructor; `matrix` is row-major n x dimension, rows must be unit-norm.
    GalleryIndex(std::size_t dimension, std::vector<float> matrix, std::vector<std::string> labels,
                 std::vector<std::size_t> store_rows = {});

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t dimension() const noexcept { return dimension_; }
    std::span<const float> row(std::size_t i) const { return {matrix_.data() + i * dimension_, dimension_}; }
    const std::string& label(std::size_t i) const { return labels_[i]; }
    /// Row of the originating store for gallery row i.
    std::size_t store_row(std::size_t i) const { return store_rows_[i]; }

    /// The min(k, n) most similar rows, by descending similarity then ascending row.
    std::vector<Neighbor> search_topk(std::span<const float> query, std::size_t k) const;

    /// Weighted vote over the top k neighbours.
    Identification classify_weighted_vote(std::span<const float> query, std::size_t k) const;

private:
    std::size_t dimension_;
    std::vector<float> matrix_;
    std::vector<std::string> labels_;
    std::vector<std::size_t> store_rows_;
};

/// Vote weight of a neighbour: similarity clamped at zero.
inline double vote_weight(double similarity) { return similarity > 0.0 ? similarity : 0.0; }

/// Applies the weighted vote to an already ranked neighbour list (best first).
///
/// Label mass is the sum of vote weights. Ties in mass go to the label whose
/// best neighbour is more similar, then to the lexicographically smaller label.
Identification weighted_vote(std::span<const Neighbor> ranked);

}  // namespace openreid
