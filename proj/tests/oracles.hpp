#pragma once

// Brute-force reference implementations used only by tests. None of these
// call into the library code paths they are compared against.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace oracle {

inline double dot(const float* a, const float* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

struct Hit {
    std::size_t row;
    double sim;
};

/// All n similarities, fully sorted (descending similarity, ascending row), truncated to k.
inline std::vector<Hit> knn_full_sort(const std::vector<float>& gallery, std::size_t d, const float* query,
                                      std::size_t k) {
    const std::size_t n = gallery.size() / d;
    std::vector<Hit> all;
    for (std::size_t i = 0; i < n; ++i) all.push_back({i, dot(&gallery[i * d], query, d)});
    std::stable_sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) { return a.sim > b.sim; });
    all.resize(std::min(k, n));
    return all;
}

/// Weighted vote recomputed from scratch over (label, similarity) pairs in rank order.
inline std::string vote(const std::vector<std::pair<std::string, double>>& ranked, double* score = nullptr) {
    std::map<std::string, double> mass;
    std::map<std::string, double> best;
    double total = 0.0;
    for (const auto& [label, sim] : ranked) {
        const double w = sim > 0 ? sim : 0;
        mass[label] += w;
        total += w;
        if (!best.count(label) || sim > best[label]) best[label] = sim;
    }
    std::string win;
    double win_mass = -1, win_best = -3;
    for (const auto& [label, m] : mass) {
        if (m > win_mass || (m == win_mass && best[label] > win_best)) {
            win = label;
            win_mass = m;
            win_best = best[label];
        }
    }
    if (score) *score = total > 0 ? win_mass / total : 0.0;
    return win;
}

/// Minimum total cost over all injective assignments of the smaller side.
inline double assignment_cost(const std::vector<std::vector<double>>& c) {
    const std::size_t n = c.size();
    const std::size_t m = n ? c[0].size() : 0;
    if (n == 0 || m == 0) return 0.0;
    const bool transpose = n > m;
    const std::size_t small = transpose ? m : n;
    const std::size_t large = transpose ? n : m;
    std::vector<std::size_t> perm(large);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < small; ++i) total += transpose ? c[perm[i]][i] : c[i][perm[i]];
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// AUC by counting every (positive, negative) pair.
inline double auc_pairs(const std::vector<double>& pos, const std::vector<double>& neg) {
    double wins = 0.0;
    for (double p : pos) {
        for (double q : neg) {
            if (p > q) {
                wins += 1.0;
            } else if (p == q) {
                wins += 0.5;
            }
        }
    }
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline double iou(double ax, double ay, double aw, double ah, double bx, double by, double bw, double bh) {
    const double w = std::min(ax + aw, bx + bw) - std::max(ax, bx);
    const double h = std::min(ay + ah, by + bh) - std::max(ay, by);
    if (w <= 0 || h <= 0) return 0.0;
    return w * h / (aw * ah + bw * bh - w * h);
}

}  // namespace oracle
