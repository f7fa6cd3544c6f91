#include "openreid/knn_index.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "openreid/error.hpp"

namespace openreid {

namespace {

constexpr double kUnitTolerance = 1e-5;

}  // namespace

GalleryIndex GalleryIndex::from_store(const EmbeddingStore& store, std::span<const std::size_t> rows) {
    if (!store.normalized()) throw ValidationError("gallery requires a normalized embedding store");
    std::vector<float> matrix;
    std::vector<std::string> labels;
    matrix.reserve(rows.size() * store.dimension());
    labels.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= store.size()) throw ValidationError("gallery row out of range");
        const auto& meta = store.meta(r);
        if (!meta.identity) throw ValidationError("gallery record '" + meta.image_id + "' has no identity");
        auto v = store.row(r);
        matrix.insert(matrix.end(), v.begin(), v.end());
        labels.push_back(*meta.identity);
    }
    return GalleryIndex(store.dimension(), std::move(matrix), std::move(labels),
                        std::vector<std::size_t>(rows.begin(), rows.end()));
}

GalleryIndex GalleryIndex::from_store(const EmbeddingStore& store) {
    std::vector<std::size_t> rows(store.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return from_store(store, rows);
}

GalleryIndex::GalleryIndex(std::size_t dimension, std::vector<float> matrix, std::vector<std::string> labels,
                           std::vector<std::size_t> store_rows)
    : dimension_(dimension), matrix_(std::move(matrix)), labels_(std::move(labels)), store_rows_(std::move(store_rows)) {
    if (dimension_ < 2) throw ValidationError("gallery dimension must be at least 2");
    if (matrix_.size() != labels_.size() * dimension_) {
        throw ValidationError("gallery matrix and labels are not aligned");
    }
    if (store_rows_.empty()) {
        store_rows_.resize(labels_.size());
        std::iota(store_rows_.begin(), store_rows_.end(), std::size_t{0});
    } else if (store_rows_.size() != labels_.size()) {
        throw ValidationError("gallery store rows and labels are not aligned");
    }
    for (std::size_t i = 0; i < size(); ++i) {
        const double norm = std::sqrt(dot(row(i), row(i)));
        if (std::abs(norm - 1.0) > kUnitTolerance) {
            throw ValidationError("gallery row " + std::to_string(i) + " is not unit-norm");
        }
    }
}

std::vector<Neighbor> GalleryIndex::search_topk(std::span<const float> query, std::size_t k) const {
    if (k == 0) throw ValidationError("k must be at least 1");
    if (labels_.empty()) throw ValidationError("search on an empty gallery");
    if (query.size() != dimension_) {
        throw DimensionMismatchError("query dimension " + std::to_string(query.size()) +
                                     " does not match gallery dimension " + std::to_string(dimension_));
    }

    const std::size_t n = size();
    std::vector<double> sims(n);
    for (std::size_t i = 0; i < n; ++i) sims[i] = dot(query, row(i));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto better = [&](std::size_t a, std::size_t b) {
        return sims[a] > sims[b] || (sims[a] == sims[b] && a < b);
    };
    const std::size_t take = std::min(k, n);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);

    std::vector<Neighbor> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.push_back({order[i], sims[order[i]], labels_[order[i]]});
    }
    return out;
}

Identification GalleryIndex::classify_weighted_vote(std::span<const float> query, std::size_t k) const {
    const auto ranked = search_topk(query, k);
    return weighted_vote(ranked);
}

Identification weighted_vote(std::span<const Neighbor> ranked) {
    if (ranked.empty()) throw ValidationError("weighted vote over an empty neighbour list");

    struct Tally {
        double mass = 0.0;
        double best = -2.0;
    };
    std::map<std::string, Tally> tallies;
    double total = 0.0;
    for (const auto& nb : ranked) {
        auto& t = tallies[nb.identity];
        const double w = vote_weight(nb.similarity);
        t.mass += w;
        t.best = std::max(t.best, nb.similarity);
        total += w;
    }

    // std::map iterates labels in ascending order, so strict comparisons keep
    // the lexicographically smallest label on a full tie.
    auto winner = tallies.begin();
    for (auto it = std::next(tallies.begin()); it != tallies.end(); ++it) {
        const auto& c = it->second;
        const auto& w = winner->second;
        if (c.mass > w.mass || (c.mass == w.mass && c.best > w.best)) winner = it;
    }
    return {winner->first, total > 0.0 ? winner->second.mass / total : 0.0};
}

}  // namespace openreid
