// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "confreach/conformal.hpp"
#include "confreach/core.hpp"
#include "confreach/regions.hpp"
#include "confreach/system.hpp"

namespace confreach {

enum class MergeStrategy { NoMerge, OppMerge, GreedyMerge };

std::string to_string(MergeStrategy s);
MergeStrategy merge_strategy_from_string(const std::string& s);

// Stepped: the branch was advanced one step and lives on in its children.
enum class BranchStatus { Active, Merged, Infeasible, Stepped };

inline constexpr int kUnguarded = -1;

struct Branch {
    std::uint64_t id = 0;
    BoxSet box;
    int region = kUnguarded;
    int created_at = 0;
    BranchStatus status = BranchStatus::Active;
    std::uint64_t merged_into = 0;
    std::uint64_t parent = 0;
    bool checkpoint = false;
};

struct VerifySpec {
    Interval initial_set{-0.51, -0.49};
    int subdivisions = 50;
    int horizon = 90;
    BoundFunction bound;
    Controller controller = EnergyController{};
    MountainCarParams params;
    MergeStrategy merge_strategy = MergeStrategy::OppMerge;
    int normalize_period = 5;
    std::size_t greedy_threshold = 8;
    unsigned threads = 0;  // 0: hardware concurrency
    bool audit = false;    // keep every branch for accounting checks

    void validate() const;
};

struct SplitResult {
    std::vector<std::pair<int, BoxSet>> pieces;
    bool out_of_range = false;  // part of the box lies outside the partition range
};

// Closed intersections of the box with every region it touches. A box edge
// sitting exactly on a cut point yields a degenerate piece on the far side,
// since that point belongs to the next region.
SplitResult split_by_regions(const BoxSet& box, const Partition& partition);

struct StepOutcome {
    std::vector<Branch> children;
    bool infeasible = false;
};

// Children carry fresh ids starting at next_id, which is advanced.
StepOutcome step_branch(const Branch& branch, const VerifySpec& spec, int k, std::uint64_t& next_id);

Branch normalize_branch(const Branch& branch);

// Same-step branches; status and merged_into are updated in `branches`, the
// survivors (and any hull branches) are returned.
std::vector<Branch> merge_branches(std::vector<Branch>& branches, MergeStrategy strategy, bool checkpoint,
                                   std::size_t greedy_threshold, std::uint64_t& next_id);

struct TubeStep {
    int k = 0;
    BoxSet hull;
    std::size_t n_branches = 0;
    double pos_width = 0.0;
};

struct ReachTube {
    std::vector<TubeStep> per_step;
    double max_set_size = 0.0;
    std::size_t total_branches = 0;  // sum over steps of live branches
    std::size_t peak_branches = 0;
    std::size_t merged_branches = 0;
    double wall_time_seconds = 0.0;
    MergeStrategy merge_strategy = MergeStrategy::OppMerge;
    bool feasible = true;
    int infeasible_step = -1;
    int infeasible_region = kUnguarded;
    std::uint64_t spec_digest = 0;
    std::vector<Branch> audit_log;
};

std::uint64_t spec_digest(const VerifySpec& spec);

ReachTube compute_reach_tube(const VerifySpec& spec);

// Does every recorded branch end active, merged into a live same-step
// container, infeasible, or stepped with children? Empty string when sound.
std::string audit_branches(const std::vector<Branch>& log);

// Deterministic content only; wall time is reported separately.
std::string reach_metrics_json(const ReachTube& tube);
std::string tube_to_json(const ReachTube& tube);
std::string tube_to_csv(const ReachTube& tube);

struct TubeSummary {
    std::vector<TubeStep> per_step;
    double max_set_size = 0.0;
    std::size_t total_branches = 0;
    std::string strategy;
    bool feasible = true;
    std::string digest;
};
TubeSummary tube_from_json(const std::string& text);

}  // namespace confreach
