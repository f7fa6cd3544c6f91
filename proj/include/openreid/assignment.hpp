#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace openreid {

/// Dense row-major cost matrix.
class CostMatrix {
public:
    CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
};

/// Rectangular linear assignment (Hungarian method with potentials).
///
/// Assigns min(rows, cols) pairs so that the summed cost is minimal. Returns
/// the column chosen for every row, or nullopt for rows left out when there
/// are more rows than columns. O(n^2 m) for n = min side.
std::vector<std::optional<std::size_t>> solve_assignment(const CostMatrix& cost);

}  // namespace openreid
