// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace confreach {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// A state fell outside every region of a partition.
struct CoverageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct State {
    double position = 0.0;
    double velocity = 0.0;
};

struct Step {
    int time = 0;
    State state;
    double measurement = 0.0;
    double control = 0.0;

    double abs_error() const noexcept;
};

struct Trajectory {
    std::vector<Step> steps;
    bool terminated_at_goal = false;
};

struct Dataset {
    std::vector<Trajectory> trajectories;
    int horizon = 0;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return trajectories.size(); }
    std::size_t visit_count() const noexcept;
};

// ---------------------------------------------------------------------------
// Interval arithmetic
// ---------------------------------------------------------------------------

// Finite-precision endpoints are accepted by default; Outward widens every
// result by one ulp on each side.
enum class Rounding { Nearest, Outward };

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    constexpr Interval(double l, double h) : lo(l), hi(h) {}
    static constexpr Interval point(double x) { return {x, x}; }

    double width() const noexcept { return hi - lo; }
    double mid() const noexcept { return 0.5 * (lo + hi); }
    bool valid() const noexcept { return lo <= hi; }
    bool contains(double x) const noexcept { return lo <= x && x <= hi; }
    bool contains(const Interval& o) const noexcept { return lo <= o.lo && o.hi <= hi; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

Interval make_interval(double lo, double hi);  // throws InputError when lo > hi or NaN

Interval interval_add(const Interval& a, const Interval& b, Rounding r = Rounding::Nearest);
Interval interval_scale(const Interval& a, double c, Rounding r = Rounding::Nearest);
Interval interval_cos(const Interval& a, Rounding r = Rounding::Nearest);
Interval interval_clamp(const Interval& a, const Interval& bounds);
Interval interval_hull(const Interval& a, const Interval& b);

struct BoxSet {
    Interval position;
    Interval velocity;

    static BoxSet point(const State& s) {
        return {Interval::point(s.position), Interval::point(s.velocity)};
    }
    bool valid() const noexcept { return position.valid() && velocity.valid(); }
    bool contains(const State& s) const noexcept {
        return position.contains(s.position) && velocity.contains(s.velocity);
    }

    friend bool operator==(const BoxSet&, const BoxSet&) = default;
};

bool box_contains(const BoxSet& outer, const BoxSet& inner) noexcept;
BoxSet box_hull(const BoxSet& a, const BoxSet& b) noexcept;

std::string to_string(const Interval& a);

}  // namespace confreach
