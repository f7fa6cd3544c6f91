#include "openreid/assignment.hpp"

#include <cmath>
#include <limits>

#include "openreid/error.hpp"

namespace openreid {

namespace {

// Shortest augmenting path formulation for n <= m; `a(i, j)` is 1-based.
// Returns, for each of the n rows, its assigned column (0-based).
template <typename Cost>
std::vector<std::size_t> hungarian(std::size_t n, std::size_t m, Cost a) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    std::vector<char> used(m + 1);

    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<std::size_t> row_to_col(n);
    for (std::size_t j = 1; j <= m; ++j) {
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

}  // namespace

std::vector<std::optional<std::size_t>> solve_assignment(const CostMatrix& cost) {
    const std::size_t rows = cost.rows();
    const std::size_t cols = cost.cols();
    std::vector<std::optional<std::size_t>> out(rows);
    if (rows == 0 || cols == 0) return out;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (!std::isfinite(cost(r, c))) throw ValidationError("assignment costs must be finite");
        }
    }

    if (rows <= cols) {
        const auto assigned = hungarian(rows, cols, [&](std::size_t i, std::size_t j) { return cost(i - 1, j - 1); });
        for (std::size_t r = 0; r < rows; ++r) out[r] = assigned[r];
    } else {
        const auto assigned = hungarian(cols, rows, [&](std::size_t i, std::size_t j) { return cost(j - 1, i - 1); });
        for (std::size_t c = 0; c < cols; ++c) out[assigned[c]] = c;
    }
    return out;
}

}  // namespace openreid
