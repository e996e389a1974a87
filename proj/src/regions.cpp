// SPDX-License-Identifier: Apache-2.0
#include "confreach/regions.hpp"

#include <algorithm>
#include <cmath>

namespace confreach {

std::string to_string(Dimension d) { return d == Dimension::Position ? "position" : "velocity"; }

Dimension dimension_from_string(const std::string& s) {
    if (s == "position" || s == "p") return Dimension::Position;
    if (s == "velocity" || s == "v") return Dimension::Velocity;
    throw ConfigError("unknown partition dimension '" + s + "'");
}

int Partition::region_index(double x) const noexcept {
    if (!(x >= range.lo && x <= range.hi)) return -1;
    return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
}

Interval Partition::region_interval(std::size_t i) const {
    if (i >= size()) throw InputError("region index " + std::to_string(i) + " out of range");
    return {i == 0 ? range.lo : edges[i - 1], i + 1 == size() ? range.hi : edges[i]};
}

BoxSet Partition::region_box(std::size_t i, const Interval& other) const {
    const Interval r = region_interval(i);
    return dimension == Dimension::Position ? BoxSet{r, other} : BoxSet{other, r};
}

void Partition::validate(double min_width) const {
    if (!range.valid() || !std::isfinite(range.lo) || !std::isfinite(range.hi)) {
        throw InputError("partition: invalid range " + to_string(range));
    }
    double prev = range.lo;
    for (std::size_t i = 0; i <= edges.size(); ++i) {
        const double next = i < edges.size() ? edges[i] : range.hi;
        if (!std::isfinite(next) || !(next > prev) || next - prev < min_width) {
            throw InputError("partition: region " + std::to_string(i) + " is empty or narrower than the minimum width");
        }
        prev = next;
    }
}

Partition uniform_partition(std::size_t m, const Interval& range) {
    if (m < 1) throw InputError("uniform_partition: m must be >= 1");
    Partition p;
    p.range = range;
    for (std::size_t i = 1; i < m; ++i) {
        p.edges.push_back(range.lo + (range.hi - range.lo) * static_cast<double>(i) / static_cast<double>(m));
    }
    return p;
}

}  // namespace confreach
