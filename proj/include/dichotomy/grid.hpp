#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dichotomy {

/// Uniform time grid t_i = start + i * step, i = 0..cells.
class Grid {
public:
    Grid(double start, double step, std::size_t cells);

    /// Symmetric window [-half_width, half_width]; the step must divide the
    /// window length.
    static Grid window(double half_width, double step);

    /// Validates that the times are strictly increasing with a uniform step
    /// (relative deviation below 1e-12).
    static Grid from_times(std::span<const double> times);

    double start() const { return start_; }
    double step() const { return step_; }
    double end() const { return time(cells_); }
    std::size_t cells() const { return cells_; }
    std::size_t nodes() const { return cells_ + 1; }
    double time(std::size_t i) const { return start_ + static_cast<double>(i) * step_; }

    /// Index of the node at t, if t lies on the grid (within 1e-9 * step).
    std::optional<std::size_t> node_index(double t) const;
    /// Index of the last node <= t (clamped to the grid).
    std::size_t floor_index(double t) const;

    bool contains(double t) const;

    std::vector<double> times() const;

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    double start_;
    double step_;
    std::size_t cells_;
};

}  // namespace dichotomy
