// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "confreach/core.hpp"

namespace confreach {

enum class Dimension { Position, Velocity };

std::string to_string(Dimension d);
Dimension dimension_from_string(const std::string& s);

// M half-open regions [e_{i-1}, e_i) over `range` along one state
// coordinate; the last region is closed. Only the position axis is used by
// the pipeline.
struct Partition {
    Dimension dimension = Dimension::Position;
    std::vector<double> edges;
    Interval range{-1.2, 0.6};

    std::size_t size() const noexcept { return edges.size() + 1; }
    double coordinate(const State& s) const noexcept {
        return dimension == Dimension::Position ? s.position : s.velocity;
    }

    // -1 when x lies outside the range.
    int region_index(double x) const noexcept;
    int region_of(const State& s) const noexcept { return region_index(coordinate(s)); }

    Interval region_interval(std::size_t i) const;
    // Region i as a box; the other coordinate spans `other`.
    BoxSet region_box(std::size_t i, const Interval& other = {-0.07, 0.07}) const;

    // Throws InputError unless edges are strictly increasing, strictly inside
    // the range and every region is at least min_width wide.
    void validate(double min_width = 0.0) const;

    friend bool operator==(const Partition&, const Partition&) = default;
};

Partition uniform_partition(std::size_t m, const Interval& range = {-1.2, 0.6});

}  // namespace confreach
