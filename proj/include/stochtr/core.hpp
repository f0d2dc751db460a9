#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace stochtr {

/// Point or vector in R^d, d in {1,2}. For d = 1 only component 0 is used.
using Vec2 = std::array<double, 2>;

/// Row-major 2x2 matrix. For d = 1 only entry (0,0) is used.
using Mat2 = std::array<double, 4>;

inline constexpr double kPi = 3.14159265358979323846;

// Error taxonomy. Each maps to one failure class named by the operation contracts.
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ResolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LookupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Axis-aligned box [lo, hi] in R^dim.
struct Box {
    int dim = 1;
    Vec2 lo{0.0, 0.0};
    Vec2 hi{0.0, 0.0};

    bool contains(const Vec2& p) const {
        for (int k = 0; k < dim; ++k)
            if (p[k] < lo[k] || p[k] > hi[k]) return false;
        return true;
    }
    bool inside(const Box& outer) const {
        for (int k = 0; k < dim; ++k)
            if (lo[k] < outer.lo[k] || hi[k] > outer.hi[k]) return false;
        return true;
    }
    double volume() const {
        double v = 1.0;
        for (int k = 0; k < dim; ++k) v *= hi[k] - lo[k];
        return v;
    }
    Box enlarged(double r) const {
        Box b = *this;
        for (int k = 0; k < dim; ++k) {
            b.lo[k] -= r;
            b.hi[k] += r;
        }
        return b;
    }
};

inline double norm(const Vec2& v, int dim) {
    return dim == 1 ? std::abs(v[0]) : std::hypot(v[0], v[1]);
}

inline double dot(const Vec2& a, const Vec2& b, int dim) {
    return dim == 1 ? a[0] * b[0] : a[0] * b[0] + a[1] * b[1];
}

/// sign with the convention sign(0) = 0.
inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace stochtr
