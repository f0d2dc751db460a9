#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stochtr/drift.hpp"

namespace stochtr {

/// Branch taken by a deterministic characteristic sitting on the singular line.
struct SelectionRule {
    enum class Tag { up, down, stay, delayed };
    Tag tag = Tag::stay;
    double delay = 0.0;  // delayed only
    double sign = 1.0;   // delayed only: +1 departs up, -1 down

    static SelectionRule up() { return {Tag::up, 0.0, 1.0}; }
    static SelectionRule down() { return {Tag::down, 0.0, -1.0}; }
    static SelectionRule stay() { return {Tag::stay, 0.0, 0.0}; }
    /// Throws ConfigError for s < 0 or sign not +-1.
    static SelectionRule delayed(double s, double sign);
    /// Parses "up", "down", "stay", "delayed:<s>:<+1|-1>".
    static SelectionRule parse(const std::string& text);

    /// Departure time and sign (0 for stay).
    double departure() const { return tag == Tag::delayed ? delay : 0.0; }
    double departure_sign() const;
    std::string name() const;
};

/// Closed-form shear-flow characteristic from (x0, 0) at time t.
Vec2 shear_branches(double x0, double t, const SelectionRule& rule);

enum class Direction { forward, backward };

struct OdePath {
    std::vector<double> times;
    std::vector<Vec2> states;
    bool escaped = false;
    double escape_time = 0.0;
    const Vec2& end() const { return states.back(); }
};

/// RK4 for x' = +-b(x). Within max(dt, 1e-12) of the singular set the drift's
/// exact branch_step is used: off the set the branch follows the current side,
/// on the set the rule decides (forward) or the path rests there (backward,
/// sign(0) = 0). Leaving `box` stops the path and marks it escaped.
OdePath integrate_ode(const DriftSpec& b, const Vec2& x0, double T, double dt, const SelectionRule& rule,
                      Direction dir = Direction::forward, const std::optional<Box>& box = std::nullopt);

/// Brownian increments of one path, generated at a fine level and coarsened by
/// summation so every refinement level sees the same path.
class BrownianPath {
public:
    BrownianPath(std::uint64_t seed, std::uint64_t path_index, int dim, double T, int fine_steps,
                 std::uint32_t tag = 0);
    int dim() const { return dim_; }
    double horizon() const { return T_; }
    int fine_steps() const { return static_cast<int>(fine_.size()); }
    /// Increments over `steps` equal sub-intervals; fine_steps must be a multiple of steps.
    std::vector<Vec2> increments(int steps) const;
    const std::vector<Vec2>& fine() const { return fine_; }

private:
    int dim_;
    double T_;
    std::vector<Vec2> fine_;
};

/// Increment k of path (seed, path_index): N(0, dt) per coordinate.
Vec2 gaussian_increment(std::uint64_t seed, std::uint64_t path_index, std::uint32_t step, int dim, double dt,
                        std::uint32_t tag = 0);

struct SdePath {
    std::vector<double> times;
    std::vector<Vec2> states;
    std::vector<Vec2> increments;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
    bool escaped = false;
    double escape_time = 0.0;
    const Vec2& end() const { return states.back(); }
};

struct SdeOptions {
    double tiebreak = 0.0;              // drift value of sign(0) on the singular set
    std::optional<Box> box;             // escape box
    bool record_states = true;
};

/// Euler-Maruyama X_{k+1} = X_k + c(X_k) dt + dW_k with c = +b (forward) or -b (backward).
SdePath integrate_sde(const DriftSpec& b, Direction dir, const Vec2& x0, double T, double dt, std::uint64_t seed,
                      std::uint64_t path_index, const SdeOptions& opt = {});

/// Euler-Maruyama driven by given increments (equal steps dt).
SdePath integrate_sde_with(const DriftSpec& b, Direction dir, const Vec2& x0, double dt,
                           const std::vector<Vec2>& increments, const SdeOptions& opt = {});

/// Endpoint only, without storing the path. Sets *escaped when the box is left.
Vec2 sde_endpoint(const DriftSpec& b, Direction dir, const Vec2& x0, double T, double dt, std::uint64_t seed,
                  std::uint64_t path_index, double tiebreak, const std::optional<Box>& box, bool* escaped);

struct PathEnsemble {
    std::vector<SdePath> paths;
    std::uint64_t base_seed = 0;
    std::string drift;
    Direction direction = Direction::forward;
};

/// Paths 0..n-1, generated in parallel; path i depends only on (seed, i).
PathEnsemble make_ensemble(const DriftSpec& b, Direction dir, const Vec2& x0, double T, double dt,
                           std::uint64_t seed, std::size_t n_paths, const SdeOptions& opt = {});

/// CSV rows `path_index,t,x[,y]`.
void write_paths_csv(std::ostream& os, const PathEnsemble& e, int dim);

}  // namespace stochtr
