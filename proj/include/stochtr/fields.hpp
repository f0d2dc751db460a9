#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "stochtr/core.hpp"
#include "stochtr/mollifier.hpp"

namespace stochtr {

/// Uniform grid on [lo, hi] with n nodes per axis (node-centred, h = (hi-lo)/(n-1)).
struct GridSpec {
    int dim = 1;
    Vec2 lo{0.0, 0.0};
    Vec2 hi{1.0, 0.0};
    std::array<int, 2> n{8, 1};

    /// Validates lo < hi and n >= 8 on every active axis.
    static GridSpec make(int dim, const Vec2& lo, const Vec2& hi, const std::array<int, 2>& n);
    /// Grid with spacing exactly h covering [lo, lo + (n-1) h] per axis.
    static GridSpec with_spacing(int dim, const Vec2& lo, double h, const std::array<int, 2>& n);

    double h(int axis) const { return (hi[axis] - lo[axis]) / (n[axis] - 1); }
    double max_h() const { return dim == 1 ? h(0) : std::max(h(0), h(1)); }
    double cell_volume() const { return dim == 1 ? h(0) : h(0) * h(1); }
    std::size_t size() const { return static_cast<std::size_t>(n[0]) * (dim == 1 ? 1 : n[1]); }
    /// Row-major: x varies fastest, rows are y.
    std::size_t index(int i, int j = 0) const { return static_cast<std::size_t>(j) * n[0] + i; }
    Vec2 node(int i, int j = 0) const { return {lo[0] + i * h(0), dim == 1 ? 0.0 : lo[1] + j * h(1)}; }
    Vec2 node_at(std::size_t idx) const {
        return node(static_cast<int>(idx % n[0]), static_cast<int>(idx / n[0]));
    }
    Box domain() const { return Box{dim, lo, hi}; }
};

/// Scalar field sampled on a GridSpec. Values are finite.
class GridFunction {
public:
    GridFunction(GridSpec spec, std::vector<double> values);
    static GridFunction sample(const GridSpec& spec, const std::function<double(const Vec2&)>& f);
    static GridFunction zeros(const GridSpec& spec) { return {spec, std::vector<double>(spec.size(), 0.0)}; }

    const GridSpec& spec() const { return spec_; }
    const std::vector<double>& values() const { return values_; }
    double operator()(int i, int j = 0) const { return values_[spec_.index(i, j)]; }
    double at(std::size_t idx) const { return values_[idx]; }
    double sup_norm() const;

private:
    GridSpec spec_;
    std::vector<double> values_;
};

/// (f * theta_eps) on the interior sub-grid where the stencil fits. Discrete
/// stencil weights are normalised to sum to one, so constants are reproduced
/// exactly. Throws ResolutionError if eps < 2 max(h), DomainError if the
/// interior sub-grid is smaller than 8 nodes per axis.
GridFunction convolve(const GridFunction& f, const Kernel& kernel, double eps);

/// Central differences in the interior, second-order one-sided at the boundary.
std::vector<GridFunction> grad_fd(const GridFunction& f);

/// int_region |f| with each node weighted by its dual cell clipped to the region.
/// Throws DomainError if region is not inside the grid domain.
double norm_l1_region(const GridFunction& f, const Box& region);

/// CSV: "# grid lo=.. hi=.. n=.." then "index,value" per node, 17 significant digits.
void write_csv(std::ostream& os, const GridFunction& f);
GridFunction read_grid_csv(std::istream& is);

}  // namespace stochtr
