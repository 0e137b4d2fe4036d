#include "dichotomy/function_space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace dichotomy {

double indicator(double a, double b, double t, Side side)
{
    if (side == Side::Right)
        return (t >= a && t < b) ? 1.0 : 0.0;
    return (t > a && t <= b) ? 1.0 : 0.0;
}

GridFunction::GridFunction(Grid grid, NormFamilyPtr norms, Matrix left, Matrix right)
    : grid_(grid), norms_(std::move(norms)), left_(std::move(left)), right_(std::move(right))
{
    if (!norms_)
        throw InvalidInput("grid function needs a norm family");
    const auto nodes = static_cast<Eigen::Index>(grid_.nodes());
    if (left_.cols() != nodes || right_.cols() != nodes || left_.rows() != right_.rows())
        throw InvalidInput("grid function samples do not match the grid");
    if (right_.rows() != norms_->dimension())
        throw InvalidInput("grid function dimension does not match the norm family");
    if (!left_.allFinite() || !right_.allFinite())
        throw InvalidInput("grid function samples must be finite");
}

GridFunction GridFunction::zeros(Grid grid, NormFamilyPtr norms)
{
    const int n = norms ? norms->dimension() : 1;
    Matrix z = Matrix::Zero(n, static_cast<Eigen::Index>(grid.nodes()));
    return GridFunction(grid, std::move(norms), z, z);
}

GridFunction GridFunction::from_nodes(Grid grid, NormFamilyPtr norms, Matrix values)
{
    Matrix copy = values;
    return GridFunction(grid, std::move(norms), std::move(copy), std::move(values));
}

GridFunction GridFunction::sample(Grid grid, NormFamilyPtr norms, const Sampler& f)
{
    const int n = norms ? norms->dimension() : 1;
    Matrix v(n, static_cast<Eigen::Index>(grid.nodes()));
    for (std::size_t i = 0; i < grid.nodes(); ++i) {
        const Vector x = f(grid.time(i));
        if (x.size() != n)
            throw InvalidInput("sampler returned a vector of the wrong dimension");
        v.col(static_cast<Eigen::Index>(i)) = x;
    }
    return from_nodes(grid, std::move(norms), std::move(v));
}

GridFunction GridFunction::sample_sided(Grid grid, NormFamilyPtr norms, const SidedSampler& f)
{
    const int n = norms ? norms->dimension() : 1;
    const auto nodes = static_cast<Eigen::Index>(grid.nodes());
    Matrix l(n, nodes);
    Matrix r(n, nodes);
    for (std::size_t i = 0; i < grid.nodes(); ++i) {
        const double t = grid.time(i);
        const Vector a = f(t, Side::Left);
        const Vector b = f(t, Side::Right);
        if (a.size() != n || b.size() != n)
            throw InvalidInput("sampler returned a vector of the wrong dimension");
        l.col(static_cast<Eigen::Index>(i)) = a;
        r.col(static_cast<Eigen::Index>(i)) = b;
    }
    return GridFunction(grid, std::move(norms), std::move(l), std::move(r));
}

bool GridFunction::is_continuous() const
{
    return left_ == right_;
}

void GridFunction::require_compatible(const GridFunction& other) const
{
    if (!(grid_ == other.grid_) || dimension() != other.dimension())
        throw InvalidInput("grid functions live on different grids");
}

GridFunction GridFunction::operator+(const GridFunction& other) const
{
    require_compatible(other);
    return GridFunction(grid_, norms_, left_ + other.left_, right_ + other.right_);
}

GridFunction GridFunction::operator-(const GridFunction& other) const
{
    require_compatible(other);
    return GridFunction(grid_, norms_, left_ - other.left_, right_ - other.right_);
}

GridFunction GridFunction::operator*(double s) const
{
    return GridFunction(grid_, norms_, left_ * s, right_ * s);
}

GridFunction GridFunction::transformed(const std::function<Matrix(std::size_t)>& m) const
{
    Matrix l = left_;
    Matrix r = right_;
    for (std::size_t i = 0; i < grid_.nodes(); ++i) {
        const Matrix mi = m(i);
        const auto c = static_cast<Eigen::Index>(i);
        l.col(c) = mi * left_.col(c);
        r.col(c) = mi * right_.col(c);
    }
    return GridFunction(grid_, norms_, std::move(l), std::move(r));
}

double lp_norm(const GridFunction& f, Exponent p)
{
    const auto& g = f.grid();
    const auto& norms = f.norms();
    if (p.is_infinite()) {
        double m = 0.0;
        for (std::size_t i = 0; i < g.nodes(); ++i) {
            const double t = g.time(i);
            m = std::max({m, norms(t, f.left(i)), norms(t, f.right(i))});
        }
        return m;
    }
    const double pv = p.value();
    double sum = 0.0;
    for (std::size_t i = 0; i < g.cells(); ++i) {
        const double a = norms(g.time(i), f.right(i));
        const double b = norms(g.time(i + 1), f.left(i + 1));
        sum += 0.5 * g.step() * (std::pow(a, pv) + std::pow(b, pv));
    }
    return std::pow(sum, 1.0 / pv);
}

double y1_norm(const GridFunction& f, Exponent p)
{
    return std::max(lp_norm(f, p), lp_norm(f, Exponent::infinity()));
}

double mild_residual(const GridFunction& x, const GridFunction& y, const CellPropagators& cells)
{
    if (!(x.grid() == y.grid()) || !(x.grid() == cells.grid()))
        throw InvalidInput("mild_residual: grid mismatch");
    if (x.dimension() != y.dimension() || x.dimension() != cells.dimension())
        throw InvalidInput("mild_residual: dimension mismatch");
    const auto& g = x.grid();
    const double h = g.step();
    double worst = 0.0;
    for (std::size_t i = 0; i < g.cells(); ++i) {
        const Matrix& step = cells.step(i);
        const Vector quad = 0.5 * h * (step * y.right(i) + y.left(i + 1));
        const Vector defect = x.left(i + 1) - step * x.right(i) - quad;
        worst = std::max(worst, x.norms()(g.time(i + 1), defect));
    }
    return worst;
}

double mild_residual(const GridFunction& x, const GridFunction& y, const EvolutionFamily& family)
{
    if (!(x.grid() == y.grid()))
        throw InvalidInput("mild_residual: grid mismatch");
    return mild_residual(x, y, CellPropagators(family, x.grid()));
}

double max_consecutive_jump(const GridFunction& x)
{
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < x.grid().nodes(); ++i)
        worst = std::max(worst, (x.left(i + 1) - x.right(i)).norm());
    return worst;
}

double continuity_bound(const GridFunction& x, const GridFunction& y, const CellPropagators& cells,
                        double delta)
{
    double step_dev = 0.0;
    double step_norm = 1.0;
    const int n = cells.dimension();
    for (std::size_t i = 0; i < cells.grid().cells(); ++i) {
        step_dev = std::max(step_dev, spectral_norm(cells.step(i) - Matrix::Identity(n, n)));
        step_norm = std::max(step_norm, spectral_norm(cells.step(i)));
    }
    double max_x = 0.0;
    double max_y = 0.0;
    for (std::size_t i = 0; i < x.grid().nodes(); ++i) {
        max_x = std::max({max_x, x.left(i).norm(), x.right(i).norm()});
        max_y = std::max({max_y, y.left(i).norm(), y.right(i).norm()});
    }
    return delta + step_dev * max_x + x.grid().step() * step_norm * max_y;
}

namespace {

void write_row(std::ostream& out, double t, const Vector& v)
{
    out << t;
    for (Eigen::Index j = 0; j < v.size(); ++j)
        out << ',' << v(j);
}

std::vector<double> parse_row(const std::string& line)
{
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto first = cell.find_first_not_of(" \t\r");
        const auto last = cell.find_last_not_of(" \t\r");
        if (first == std::string::npos)
            throw InvalidInput("CSV: empty cell");
        const std::string trimmed = cell.substr(first, last - first + 1);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
        if (ec != std::errc() || ptr != trimmed.data() + trimmed.size())
            throw InvalidInput("CSV: cannot parse '" + trimmed + "'");
        row.push_back(v);
    }
    return row;
}

}  // namespace

void write_csv(std::ostream& out, const GridFunction& f)
{
    const auto old_flags = out.flags();
    const auto old_precision = out.precision();
    out << "t";
    for (int j = 1; j <= f.dimension(); ++j)
        out << ",x" << j;
    out << '\n';
    out << std::setprecision(17);
    const auto& g = f.grid();
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        const double t = g.time(i);
        if (f.left(i) != f.right(i)) {
            write_row(out, t, f.left(i));
            out << '\n';
        }
        write_row(out, t, f.right(i));
        out << '\n';
    }
    out.flags(old_flags);
    out.precision(old_precision);
}

void write_csv(const std::filesystem::path& path, const GridFunction& f)
{
    std::ofstream out(path);
    if (!out)
        throw InvalidInput("cannot open " + path.string() + " for writing");
    write_csv(out, f);
}

GridFunction read_csv(std::istream& in, NormFamilyPtr norms)
{
    if (!norms)
        throw InvalidInput("read_csv needs a norm family");
    std::string line;
    if (!std::getline(in, line))
        throw InvalidInput("CSV: missing header");
    const int n = norms->dimension();

    std::vector<double> times;
    std::vector<Vector> lefts;
    std::vector<Vector> rights;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto row = parse_row(line);
        if (static_cast<int>(row.size()) != n + 1)
            throw InvalidInput("CSV: row has the wrong number of columns");
        Vector v = Eigen::Map<const Vector>(row.data() + 1, n);
        if (!times.empty() && row[0] == times.back()) {
            // Second row at a jump node carries the right limit.
            rights.back() = v;
            continue;
        }
        times.push_back(row[0]);
        lefts.push_back(v);
        rights.push_back(v);
    }
    const Grid grid = Grid::from_times(times);
    Matrix l(n, static_cast<Eigen::Index>(times.size()));
    Matrix r(n, static_cast<Eigen::Index>(times.size()));
    for (std::size_t i = 0; i < times.size(); ++i) {
        l.col(static_cast<Eigen::Index>(i)) = lefts[i];
        r.col(static_cast<Eigen::Index>(i)) = rights[i];
    }
    return GridFunction(grid, std::move(norms), std::move(l), std::move(r));
}

GridFunction read_csv(const std::filesystem::path& path, NormFamilyPtr norms)
{
    std::ifstream in(path);
    if (!in)
        throw InvalidInput("cannot open " + path.string());
    return read_csv(in, std::move(norms));
}

}  // namespace dichotomy
