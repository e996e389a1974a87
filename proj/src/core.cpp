// SPDX-License-Identifier: Apache-2.0
#include "confreach/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace confreach {

double Step::abs_error() const noexcept { return std::fabs(measurement - state.position); }

std::size_t Dataset::visit_count() const noexcept {
    std::size_t n = 0;
    for (const auto& tr : trajectories) n += tr.steps.size();
    return n;
}

namespace {

Interval widen(Interval a, Rounding r) {
    if (r == Rounding::Outward) {
        a.lo = std::nextafter(a.lo, -kInf);
        a.hi = std::nextafter(a.hi, kInf);
    }
    return a;
}

}  // namespace

Interval make_interval(double lo, double hi) {
    if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
        throw InputError("invalid interval [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return {lo, hi};
}

Interval interval_add(const Interval& a, const Interval& b, Rounding r) {
    return widen({a.lo + b.lo, a.hi + b.hi}, r);
}

Interval interval_scale(const Interval& a, double c, Rounding r) {
    if (c == 0.0) return {0.0, 0.0};
    if (c > 0.0) return widen({c * a.lo, c * a.hi}, r);
    return widen({c * a.hi, c * a.lo}, r);
}

Interval interval_cos(const Interval& a, Rounding r) {
    constexpr double pi = std::numbers::pi;
    if (a.hi - a.lo >= 2.0 * pi) return {-1.0, 1.0};

    const double ca = std::cos(a.lo);
    const double cb = std::cos(a.hi);
    double lo = std::min(ca, cb);
    double hi = std::max(ca, cb);
    // Extrema of cos sit at integer multiples of pi: even -> +1, odd -> -1.
    for (double k = std::ceil(a.lo / pi); k * pi <= a.hi; k += 1.0) {
        if (std::fmod(k, 2.0) == 0.0) {
            hi = 1.0;
        } else {
            lo = -1.0;
        }
    }
    Interval out = widen({lo, hi}, r);
    out.lo = std::max(out.lo, -1.0);
    out.hi = std::min(out.hi, 1.0);
    return out;
}

Interval interval_clamp(const Interval& a, const Interval& bounds) {
    return {std::clamp(a.lo, bounds.lo, bounds.hi), std::clamp(a.hi, bounds.lo, bounds.hi)};
}

Interval interval_hull(const Interval& a, const Interval& b) {
    return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

bool box_contains(const BoxSet& outer, const BoxSet& inner) noexcept {
    return outer.position.contains(inner.position) && outer.velocity.contains(inner.velocity);
}

BoxSet box_hull(const BoxSet& a, const BoxSet& b) noexcept {
    return {interval_hull(a.position, b.position), interval_hull(a.velocity, b.velocity)};
}

std::string to_string(const Interval& a) {
    std::ostringstream os;
    os.precision(17);
    os << '[' << a.lo << ", " << a.hi << ']';
    return os.str();
}

}  // namespace confreach
