// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "confreach/core.hpp"
#include "confreach/regions.hpp"

namespace confreach {

// z_r of the sorted finite scores with r = ceil((N+1) * level); +inf when r > N.
// The ceiling tolerates a relative 1e-12 so that e.g. 20 * 0.95 ranks 19.
double conformal_quantile(std::span<const double> scores, double level);
std::size_t conformal_rank(std::size_t n, double level);

// Flattened (trajectory, step) visits of a dataset, laid out for the kernels.
struct VisitTable {
    Dimension dimension = Dimension::Position;
    std::vector<double> coord;
    std::vector<double> error;
    std::vector<std::int32_t> time;
    std::vector<std::size_t> offsets;  // trajectory j owns [offsets[j], offsets[j+1])
    double coord_min = kInf;
    double coord_max = -kInf;

    static VisitTable build(const Dataset& ds, Dimension dim = Dimension::Position);
    std::size_t trajectories() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::size_t visits() const noexcept { return coord.size(); }

    // Region index of every visit; throws CoverageError when a visit falls outside the partition range.
    std::vector<std::int32_t> regions(const Partition& partition) const;
};

struct ScoreSet {
    std::size_t region_index = 0;
    std::vector<double> scores;  // finite scores followed by the single +inf sentinel

    std::span<const double> finite() const noexcept {
        return {scores.data(), scores.empty() ? 0 : scores.size() - 1};
    }
};

// Per-trajectory maximum error over the steps spent inside `region`;
// trajectories that never enter it contribute nothing.
ScoreSet subtrajectory_scores(const Dataset& ds, const Partition& partition, std::size_t region);
std::vector<ScoreSet> region_scores(const VisitTable& visits, const Partition& partition);

struct EtaFunction {
    Partition partition;
    std::vector<double> bounds;
    double alpha = 0.05;

    // Throws CoverageError when the state lies outside every region.
    double operator()(const State& s) const;
    double bound_for_region(std::size_t i) const { return bounds.at(i); }
};

EtaFunction fit_eta(const Dataset& ds, const Partition& partition, double alpha);
EtaFunction fit_eta(const VisitTable& visits, const Partition& partition, double alpha);
double eta_eval(const EtaFunction& eta, const State& s);

struct TimeBoundFunction {
    std::vector<double> per_step_bounds;  // k = 0..T
    double alpha = 0.05;

    int horizon() const noexcept { return static_cast<int>(per_step_bounds.size()) - 1; }
    double operator()(int k) const;
};

inline constexpr double kNormalizerFloor = 1e-6;

// Normalized-max reweighting: m_t from dataset_alpha, scores max_t err/m_t on
// dataset_conf, eta(t) = quantile * m_t. A step that no alpha-split trajectory
// reaches reuses the previous normalizer.
TimeBoundFunction fit_time_baseline(const Dataset& dataset_alpha, const Dataset& dataset_conf, double alpha,
                                    int horizon);

using BoundFunction = std::variant<EtaFunction, TimeBoundFunction>;

// Fraction of trajectories whose every step satisfies the bound.
double validate_coverage(const EtaFunction& eta, const Dataset& test);
double validate_coverage(const TimeBoundFunction& bound, const Dataset& test);
double validate_coverage(const BoundFunction& bound, const Dataset& test);

// {type: "state"|"time", alpha, partition: [region boxes], edges, range, dimension, bounds}; +inf as null.
std::string bound_to_json(const BoundFunction& bound);
BoundFunction bound_from_json(const std::string& text);

}  // namespace confreach
