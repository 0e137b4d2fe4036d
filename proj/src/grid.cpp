#include "dichotomy/grid.hpp"

#include "dichotomy/core.hpp"

#include <cmath>

namespace dichotomy {

Grid::Grid(double start, double step, std::size_t cells) : start_(start), step_(step), cells_(cells)
{
    if (!std::isfinite(start) || !std::isfinite(step) || step <= 0.0)
        throw InvalidInput("grid step must be positive and finite");
    if (cells < 1)
        throw InvalidInput("grid needs at least two nodes");
}

Grid Grid::window(double half_width, double step)
{
    if (!(half_width > 0.0) || !(step > 0.0))
        throw InvalidInput("window half-width and step must be positive");
    const double ratio = 2.0 * half_width / step;
    const double cells = std::round(ratio);
    if (std::abs(ratio - cells) > 1e-9 * std::max(1.0, ratio))
        throw InvalidInput("grid step must divide the window length");
    return Grid(-half_width, step, static_cast<std::size_t>(cells));
}

Grid Grid::from_times(std::span<const double> times)
{
    if (times.size() < 2)
        throw InvalidInput("grid needs at least two nodes");
    const double step = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    if (!(step > 0.0))
        throw InvalidInput("grid times must be strictly increasing");
    // Node positions are compared against the ideal uniform grid; the
    // tolerance is relative to the grid span plus a few ulps of |t|.
    const double span = times.back() - times.front();
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1]))
            throw InvalidInput("grid times must be strictly increasing");
        const double ideal = times.front() + static_cast<double>(i) * step;
        const double tol = 1e-12 * span + 8.0 * std::numeric_limits<double>::epsilon() * std::abs(times[i]);
        if (std::abs(times[i] - ideal) > tol)
            throw InvalidInput("grid times are not uniformly spaced");
    }
    // Prefer a step (within a few ulps) that reproduces every node exactly,
    // so that serialized grids round-trip bit for bit.
    const std::size_t cells = times.size() - 1;
    const auto reproduces = [&](double s) {
        for (std::size_t i = 0; i < times.size(); ++i)
            if (times.front() + static_cast<double>(i) * s != times[i])
                return false;
        return true;
    };
    for (double seed : {step, times[1] - times[0]}) {
        double down = seed;
        double up = seed;
        for (int k = 0; k < 8; ++k) {
            if (reproduces(down))
                return Grid(times.front(), down, cells);
            if (reproduces(up))
                return Grid(times.front(), up, cells);
            down = std::nextafter(down, 0.0);
            up = std::nextafter(up, kInfinity);
        }
    }
    return Grid(times.front(), step, cells);
}

std::optional<std::size_t> Grid::node_index(double t) const
{
    const double x = (t - start_) / step_;
    const double r = std::round(x);
    if (r < 0.0 || r > static_cast<double>(cells_) || std::abs(x - r) > 1e-9)
        return std::nullopt;
    return static_cast<std::size_t>(r);
}

std::size_t Grid::floor_index(double t) const
{
    if (auto idx = node_index(t))
        return *idx;
    const double x = std::floor((t - start_) / step_);
    if (x <= 0.0)
        return 0;
    if (x >= static_cast<double>(cells_))
        return cells_;
    return static_cast<std::size_t>(x);
}

bool Grid::contains(double t) const
{
    const double tol = 1e-9 * step_;
    return t >= start_ - tol && t <= end() + tol;
}

std::vector<double> Grid::times() const
{
    std::vector<double> out(nodes());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = time(i);
    return out;
}

}  // namespace dichotomy
