#include "stochtr/fields.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "stochtr/parallel.hpp"

namespace stochtr {

GridSpec GridSpec::make(int dim, const Vec2& lo, const Vec2& hi, const std::array<int, 2>& n) {
    if (dim != 1 && dim != 2) throw ConfigError("grid dim must be 1 or 2");
    GridSpec g;
    g.dim = dim;
    g.lo = lo;
    g.hi = hi;
    g.n = n;
    if (dim == 1) {
        g.lo[1] = g.hi[1] = 0.0;
        g.n[1] = 1;
    }
    for (int k = 0; k < dim; ++k) {
        if (!(g.lo[k] < g.hi[k])) throw ConfigError("grid requires lo < hi on every axis");
        if (g.n[k] < 8) throw ConfigError("grid requires at least 8 points per axis");
    }
    return g;
}

GridSpec GridSpec::with_spacing(int dim, const Vec2& lo, double h, const std::array<int, 2>& n) {
    Vec2 hi{lo[0] + (n[0] - 1) * h, dim == 1 ? 0.0 : lo[1] + (n[1] - 1) * h};
    return make(dim, lo, hi, n);
}

GridFunction::GridFunction(GridSpec spec, std::vector<double> values)
    : spec_(spec), values_(std::move(values)) {
    if (values_.size() != spec_.size()) throw ConfigError("grid function size does not match grid");
    for (double v : values_)
        if (!std::isfinite(v)) throw DomainError("grid function values must be finite");
}

GridFunction GridFunction::sample(const GridSpec& spec, const std::function<double(const Vec2&)>& f) {
    std::vector<double> v(spec.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(spec.node_at(i));
    return {spec, std::move(v)};
}

double GridFunction::sup_norm() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

GridFunction convolve(const GridFunction& f, const Kernel& kernel, double eps) {
    const GridSpec& g = f.spec();
    if (kernel.dim() != g.dim) throw ConfigError("kernel and grid dimensions differ");
    if (eps < 2.0 * g.max_h() * (1.0 - 1e-12))
        throw ResolutionError("eps must resolve the kernel support by at least 2 cells");

    std::array<int, 2> m{0, 0};
    for (int k = 0; k < g.dim; ++k) m[k] = static_cast<int>(std::floor(eps / g.h(k)));
    std::array<int, 2> nout{g.n[0] - 2 * m[0], g.dim == 1 ? 1 : g.n[1] - 2 * m[1]};
    for (int k = 0; k < g.dim; ++k)
        if (nout[k] < 8) throw DomainError("convolution evaluation region is not interior to the grid");

    // Stencil weights, normalised to a discrete unit sum.
    const int sx = 2 * m[0] + 1, sy = g.dim == 1 ? 1 : 2 * m[1] + 1;
    std::vector<double> w(static_cast<std::size_t>(sx) * sy);
    double total = 0.0;
    for (int b = 0; b < sy; ++b)
        for (int a = 0; a < sx; ++a) {
            const Vec2 z{(a - m[0]) * g.h(0), g.dim == 1 ? 0.0 : (b - m[1]) * g.h(1)};
            w[static_cast<std::size_t>(b) * sx + a] = kernel.value_eps(z, eps);
            total += w[static_cast<std::size_t>(b) * sx + a];
        }
    for (double& x : w) x /= total;

    GridSpec out = GridSpec::make(g.dim, {g.lo[0] + m[0] * g.h(0), g.dim == 1 ? 0.0 : g.lo[1] + m[1] * g.h(1)},
                                  {g.hi[0] - m[0] * g.h(0), g.dim == 1 ? 0.0 : g.hi[1] - m[1] * g.h(1)}, nout);
    std::vector<double> vals(out.size());
    parallel_for(static_cast<std::size_t>(nout[1]), [&](std::size_t jo) {
        const int j = static_cast<int>(jo);
        for (int i = 0; i < nout[0]; ++i) {
            double s = 0.0;
            // x - y = z, so the input node is (i + m) - (a - m).
            for (int b = 0; b < sy; ++b) {
                const int jj = g.dim == 1 ? 0 : j + 2 * m[1] - b;
                const double* wrow = &w[static_cast<std::size_t>(b) * sx];
                for (int a = 0; a < sx; ++a) s += wrow[a] * f(i + 2 * m[0] - a, jj);
            }
            vals[out.index(i, j)] = s;
        }
    });
    return {out, std::move(vals)};
}

std::vector<GridFunction> grad_fd(const GridFunction& f) {
    const GridSpec& g = f.spec();
    std::vector<GridFunction> out;
    for (int k = 0; k < g.dim; ++k) {
        if (g.n[k] < 3) throw ConfigError("grad_fd needs at least 3 points per axis");
        const double h = g.h(k);
        std::vector<double> d(g.size());
        const int ny = g.dim == 1 ? 1 : g.n[1];
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < g.n[0]; ++i) {
                auto v = [&](int off) { return k == 0 ? f(i + off, j) : f(i, j + off); };
                const int pos = k == 0 ? i : j;
                const int last = g.n[k] - 1;
                double val;
                if (pos == 0)
                    val = (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h);
                else if (pos == last)
                    val = (3.0 * v(0) - 4.0 * v(-1) + v(-2)) / (2.0 * h);
                else
                    val = (v(1) - v(-1)) / (2.0 * h);
                d[g.index(i, j)] = val;
            }
        out.emplace_back(g, std::move(d));
    }
    return out;
}

double norm_l1_region(const GridFunction& f, const Box& region) {
    const GridSpec& g = f.spec();
    if (region.dim != g.dim || !region.inside(g.domain()))
        throw DomainError("L1 region must lie inside the grid domain");
    auto overlap = [&](int k, int i) {
        const double x = g.lo[k] + i * g.h(k);
        const double a = std::max(x - 0.5 * g.h(k), region.lo[k]);
        const double b = std::min(x + 0.5 * g.h(k), region.hi[k]);
        return std::max(0.0, b - a);
    };
    const int ny = g.dim == 1 ? 1 : g.n[1];
    std::vector<double> rows(ny, 0.0);
    for (int j = 0; j < ny; ++j) {
        const double wy = g.dim == 1 ? 1.0 : overlap(1, j);
        if (wy == 0.0) continue;
        std::vector<double> terms(g.n[0]);
        for (int i = 0; i < g.n[0]; ++i) terms[i] = overlap(0, i) * std::abs(f(i, j));
        rows[j] = wy * pairwise_sum(terms);
    }
    return pairwise_sum(rows);
}

void write_csv(std::ostream& os, const GridFunction& f) {
    const GridSpec& g = f.spec();
    os << std::setprecision(17);
    os << "# grid lo=" << g.lo[0];
    if (g.dim == 2) os << ',' << g.lo[1];
    os << " hi=" << g.hi[0];
    if (g.dim == 2) os << ',' << g.hi[1];
    os << " n=" << g.n[0];
    if (g.dim == 2) os << ',' << g.n[1];
    os << '\n';
    for (std::size_t i = 0; i < f.values().size(); ++i) os << i << ',' << f.values()[i] << '\n';
}

GridFunction read_grid_csv(std::istream& is) {
    std::string header;
    if (!std::getline(is, header) || header.rfind("# grid ", 0) != 0)
        throw ConfigError("grid CSV must start with '# grid' header");
    auto field = [&](const std::string& key) {
        const auto p = header.find(key + "=");
        if (p == std::string::npos) throw ConfigError("grid CSV header missing " + key);
        const auto e = header.find(' ', p);
        std::string s = header.substr(p + key.size() + 1, e == std::string::npos ? std::string::npos : e - p - key.size() - 1);
        std::vector<double> out;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
        return out;
    };
    const auto lo = field("lo"), hi = field("hi"), n = field("n");
    const int dim = static_cast<int>(lo.size());
    GridSpec g = GridSpec::make(dim, {lo[0], dim == 2 ? lo[1] : 0.0}, {hi[0], dim == 2 ? hi[1] : 0.0},
                                {static_cast<int>(n[0]), dim == 2 ? static_cast<int>(n[1]) : 1});
    std::vector<double> vals(g.size());
    std::string line;
    std::size_t count = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto c = line.find(',');
        const std::size_t idx = std::stoul(line.substr(0, c));
        if (idx >= vals.size()) throw ConfigError("grid CSV index out of range");
        vals[idx] = std::stod(line.substr(c + 1));
        ++count;
    }
    if (count != vals.size()) throw ConfigError("grid CSV row count does not match header");
    return {g, std::move(vals)};
}

}  // namespace stochtr
