#pragma once

#include <array>
#include <cstdint>

namespace stochtr {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

/// Stateless Gaussian stream for one path. Block k of the stream is keyed by
/// the base seed and addressed by (step, path_index, tag), so any increment can be
/// regenerated without replaying the ones before it.
class PathStream {
public:
    PathStream(std::uint64_t seed, std::uint64_t path_index, std::uint32_t tag = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          path_lo_(static_cast<std::uint32_t>(path_index)),
          path_hi_(static_cast<std::uint32_t>(path_index >> 32)),
          tag_(tag) {}

    /// Two uniforms in the open interval (0, 1), 53 bits each.
    std::array<double, 2> uniform_pair(std::uint32_t step) const;
    /// Two independent standard normals (Box-Muller on uniform_pair).
    std::array<double, 2> normal_pair(std::uint32_t step) const;

private:
    std::array<std::uint32_t, 2> key_;
    std::uint32_t path_lo_;
    std::uint32_t path_hi_;
    std::uint32_t tag_;
};

}  // namespace stochtr
