// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "confreach/reach.hpp"
#include "support.hpp"

using namespace confreach;
using namespace testing_support;

namespace {

VerifySpec base_spec(BoundFunction bound, int horizon, int subdivisions) {
    VerifySpec s;
    s.bound = std::move(bound);
    s.horizon = horizon;
    s.subdivisions = subdivisions;
    s.controller = default_controller();
    s.threads = 1;
    return s;
}

EtaFunction eta_of(std::vector<double> edges, std::vector<double> bounds) {
    Partition p;
    p.edges = std::move(edges);
    return EtaFunction{p, std::move(bounds), 0.05};
}

bool inside(const BoxSet& outer, const BoxSet& inner, double tol) {
    return inner.position.lo >= outer.position.lo - tol && inner.position.hi <= outer.position.hi + tol &&
           inner.velocity.lo >= outer.velocity.lo - tol && inner.velocity.hi <= outer.velocity.hi + tol;
}

// Closed loop with the measurement error drawn uniformly inside the bound
// that applies at the current state.
std::vector<State> bounded_rollout(const VerifySpec& spec, double p0, Rng& rng) {
    std::vector<State> out{{p0, 0.0}};
    for (int k = 0; k < spec.horizon; ++k) {
        const State s = out.back();
        double e;
        if (const auto* eta = std::get_if<EtaFunction>(&spec.bound)) {
            e = (*eta)(s);
        } else {
            e = std::get<TimeBoundFunction>(spec.bound)(k);
        }
        const double y = s.position + e * rng.uniform(-1.0, 1.0);
        out.push_back(dynamics_step(s, controller_eval(spec.controller, y, s.velocity), spec.params));
    }
    return out;
}

}  // namespace

TEST(SplitByRegions, Examples) {
    const Partition p = uniform_partition(3);  // edges -0.6, 0
    const BoxSet inner{{-0.5, -0.4}, {0.0, 0.01}};
    auto r = split_by_regions(inner, p);
    ASSERT_EQ(r.pieces.size(), 1u);
    EXPECT_EQ(r.pieces[0].first, 1);
    EXPECT_EQ(r.pieces[0].second, inner);

    r = split_by_regions({{-0.7, -0.5}, {0, 0}}, p);
    ASSERT_EQ(r.pieces.size(), 2u);
    EXPECT_EQ(r.pieces[0].second.position.hi, r.pieces[1].second.position.lo);
    EXPECT_EQ(r.pieces[0].second.position.hi, p.edges[0]);

    const BoxSet all{{-1.0, 0.4}, {-0.01, 0.01}};
    r = split_by_regions(all, p);
    ASSERT_EQ(r.pieces.size(), 3u);
    double w = 0;
    for (const auto& [i, b] : r.pieces) w += b.position.width();
    EXPECT_NEAR(w, all.position.width(), 1e-15);
    EXPECT_FALSE(r.out_of_range);

    r = split_by_regions({{0.7, 0.8}, {0, 0}}, p);
    EXPECT_TRUE(r.pieces.empty());
    EXPECT_TRUE(r.out_of_range);
}

TEST(SplitByRegions, CoversBoxWithinRange) {
    Rng rng(21);
    for (int t = 0; t < 2000; ++t) {
        Partition p;
        std::vector<double> e(rng.index(6));
        for (auto& x : e) x = rng.uniform(-1.2, 0.6);
        p.edges = repair_edges(e, p.range, 1e-3);
        const BoxSet box{random_interval(rng, -1.3, 0.6, 0.8), random_interval(rng, -0.07, 0.06, 0.01)};
        const auto r = split_by_regions(box, p);
        for (int s = 0; s < 50; ++s) {
            const State x{sample(rng, box.position), sample(rng, box.velocity)};
            const int idx = p.region_index(x.position);
            if (idx < 0) continue;
            bool found = false;
            for (const auto& [i, b] : r.pieces) found = found || (i == idx && b.contains(x));
            ASSERT_TRUE(found);
        }
        for (std::size_t i = 1; i < r.pieces.size(); ++i) {
            ASSERT_EQ(r.pieces[i - 1].second.position.hi, r.pieces[i].second.position.lo);
        }
    }
}

TEST(StepBranch, MeasurementInflation) {
    // With a linear-in-measurement controller the control range pins the
    // measurement interval: u = tanh(kp (y - c)), monotone in y.
    const double kp = 1.0;
    const MlpController lin({DenseLayer::from_rows({{kp, 0.0}}, {0.0}, Activation::Identity)});
    VerifySpec spec = base_spec(eta_of({}, {0.05}), 1, 1);
    spec.controller = lin;
    Branch b;
    b.id = 1;
    b.box = BoxSet::point({-0.5, 0.0});
    b.region = 0;
    std::uint64_t next = 2;
    const auto out = step_branch(b, spec, 0, next);
    ASSERT_FALSE(out.infeasible);
    ASSERT_EQ(out.children.size(), 1u);
    const auto expect = dynamics_step_interval(b.box, {-0.55, -0.45}, spec.params);
    EXPECT_TRUE(inside(out.children[0].box, expect, 1e-15));
    EXPECT_TRUE(inside(expect, out.children[0].box, 1e-15));
    EXPECT_EQ(out.children[0].parent, 1u);
    EXPECT_EQ(out.children[0].created_at, 1);
    EXPECT_EQ(next, 3u);
}

TEST(StepBranch, ZeroNoisePointMatchesScalarStep) {
    const VerifySpec spec = base_spec(eta_of({}, {0.0}), 1, 1);
    Rng rng(22);
    for (int t = 0; t < 500; ++t) {
        const State s{rng.uniform(-1.1, 0.5), rng.uniform(-0.06, 0.06)};
        Branch b;
        b.box = BoxSet::point(s);
        b.region = 0;
        std::uint64_t next = 1;
        const auto out = step_branch(b, spec, 0, next);
        const State n = dynamics_step(s, controller_eval(spec.controller, s.position, s.velocity), spec.params);
        ASSERT_EQ(out.children.size(), 1u);
        ASSERT_EQ(out.children[0].box, BoxSet::point(n));
    }
}

TEST(StepBranch, InfiniteBoundIsInfeasible) {
    const VerifySpec spec = base_spec(eta_of({-0.3}, {kInf, 0.1}), 1, 1);
    Branch b;
    b.box = {{-0.6, -0.5}, {0, 0}};
    b.region = 0;
    std::uint64_t next = 1;
    EXPECT_TRUE(step_branch(b, spec, 0, next).infeasible);
    b.box = {{0.1, 0.2}, {0, 0}};
    b.region = 1;
    EXPECT_FALSE(step_branch(b, spec, 0, next).infeasible);

    const ReachTube tube = compute_reach_tube(base_spec(eta_of({-0.3}, {kInf, 0.1}), 10, 2));
    EXPECT_FALSE(tube.feasible);
    EXPECT_EQ(tube.infeasible_step, 0);
    EXPECT_EQ(tube.infeasible_region, 0);
    EXPECT_EQ(tube.per_step.size(), 1u);
}

TEST(StepBranch, ChildrenContainSampledSuccessors) {
    Rng rng(23);
    const EtaFunction eta = eta_of({-0.6, -0.2}, {0.08, 0.03, 0.05});
    VerifySpec spec = base_spec(eta, 1, 1);
    for (int t = 0; t < 100; ++t) {
        Branch b;
        b.box = {random_interval(rng, -1.0, 0.3, 0.2), random_interval(rng, -0.05, 0.04, 0.02)};
        const auto split = split_by_regions(b.box, eta.partition);
        for (const auto& [region, piece] : split.pieces) {
            b.box = piece;
            b.region = region;
            std::uint64_t next = 1;
            const auto out = step_branch(b, spec, 0, next);
            ASSERT_FALSE(out.infeasible);
            for (int s = 0; s < 100; ++s) {
                const State x{sample(rng, piece.position), sample(rng, piece.velocity)};
                const double e = eta.bounds[static_cast<std::size_t>(region)];
                const double y = x.position + e * rng.uniform(-1.0, 1.0);
                const State n = dynamics_step(x, controller_eval(spec.controller, y, x.velocity), spec.params);
                bool found = false;
                for (const auto& c : out.children) found = found || c.box.contains(n);
                ASSERT_TRUE(found) << "sample escaped at trial " << t;
            }
        }
    }
}

TEST(NormalizeBranch, IdentityOnBoxAndMarksCheckpoint) {
    Branch b;
    b.box = {{-0.5, -0.4}, {0.0, 0.01}};
    const Branch n = normalize_branch(b);
    EXPECT_EQ(n.box, b.box);
    EXPECT_TRUE(n.checkpoint);
}

TEST(MergeBranches, Examples) {
    auto make = [](std::uint64_t id, BoxSet box, int region = 0) {
        Branch b;
        b.id = id;
        b.box = box;
        b.region = region;
        return b;
    };
    const BoxSet a{{-0.5, -0.4}, {0.0, 0.01}};
    std::uint64_t next = 100;
    std::vector<Branch> bs{make(1, a), make(2, a)};
    EXPECT_EQ(merge_branches(bs, MergeStrategy::NoMerge, true, 8, next).size(), 2u);
    auto out = merge_branches(bs, MergeStrategy::OppMerge, true, 8, next);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].id, 1u);
    EXPECT_EQ(bs[1].status, BranchStatus::Merged);
    EXPECT_EQ(bs[1].merged_into, 1u);

    // not a checkpoint: no scan
    std::vector<Branch> cs{make(1, a), make(2, a)};
    EXPECT_EQ(merge_branches(cs, MergeStrategy::OppMerge, false, 8, next).size(), 2u);

    // containment is only checked within a region
    std::vector<Branch> ds{make(1, a, 0), make(2, a, 1)};
    EXPECT_EQ(merge_branches(ds, MergeStrategy::OppMerge, true, 8, next).size(), 2u);

    // greedy hulls a crowded region
    std::vector<Branch> es;
    for (int i = 0; i < 5; ++i) es.push_back(make(10 + i, {{-0.5 + 0.01 * i, -0.495 + 0.01 * i}, {0, 0}}));
    out = merge_branches(es, MergeStrategy::GreedyMerge, false, 3, next);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].box.position, (Interval{-0.5, -0.455}));
    EXPECT_EQ(out[0].id, 100u);
    EXPECT_EQ(next, 101u);
}

TEST(ReachTube, ZeroHorizonIsInitialSet) {
    const ReachTube tube = compute_reach_tube(base_spec(eta_of({}, {0.05}), 0, 4));
    ASSERT_EQ(tube.per_step.size(), 1u);
    EXPECT_NEAR(tube.max_set_size, 0.02, 1e-15);
    EXPECT_EQ(tube.per_step[0].hull.position, (Interval{-0.51, -0.49}));
}

TEST(ReachTube, ZeroNoisePointTracesSimulation) {
    VerifySpec spec = base_spec(eta_of({-0.6, 0.0}, {0.0, 0.0, 0.0}), 90, 1);
    spec.initial_set = {-0.5, -0.5};
    const ReachTube tube = compute_reach_tube(spec);
    ASSERT_TRUE(tube.feasible);
    State s{-0.5, 0.0};
    for (int k = 0; k <= 90; ++k) {
        ASSERT_EQ(tube.per_step[static_cast<std::size_t>(k)].hull, BoxSet::point(s)) << k;
        s = dynamics_step(s, controller_eval(spec.controller, s.position, s.velocity), spec.params);
    }
    EXPECT_EQ(tube.max_set_size, 0.0);
}

TEST(ReachTube, OppMergeMatchesNoMergeAndGreedyContainsIt) {
    Rng rng(24);
    for (int t = 0; t < 3; ++t) {
        std::vector<double> e(static_cast<std::size_t>(1 + rng.index(3)));
        for (auto& x : e) x = rng.uniform(-0.6, -0.4);
        e[0] = rng.uniform(-0.505, -0.495);  // cuts the initial set
        Partition p;
        p.edges = repair_edges(e, p.range, 0.02);
        std::vector<double> b(p.size());
        for (auto& x : b) x = rng.uniform(0.005, 0.05);
        VerifySpec spec = base_spec(EtaFunction{p, b, 0.05}, 40, 3);
        spec.normalize_period = 1 + static_cast<int>(rng.index(5));
        spec.merge_strategy = MergeStrategy::NoMerge;
        const ReachTube none = compute_reach_tube(spec);
        spec.merge_strategy = MergeStrategy::OppMerge;
        const ReachTube opp = compute_reach_tube(spec);
        spec.merge_strategy = MergeStrategy::GreedyMerge;
        const ReachTube greedy = compute_reach_tube(spec);
        ASSERT_EQ(none.per_step.size(), opp.per_step.size());
        for (std::size_t k = 0; k < none.per_step.size(); ++k) {
            const BoxSet& x = none.per_step[k].hull;
            const BoxSet& y = opp.per_step[k].hull;
            EXPECT_TRUE(inside(x, y, 1e-12) && inside(y, x, 1e-12)) << "k=" << k;
            if (k < greedy.per_step.size()) {
                EXPECT_TRUE(box_contains(greedy.per_step[k].hull, y)) << "k=" << k;
            }
        }
        EXPECT_LE(opp.total_branches, none.total_branches);
        EXPECT_GT(none.total_branches, none.per_step.size() * 3);
        EXPECT_GE(greedy.max_set_size, opp.max_set_size);
    }
}

TEST(ReachTube, MonotoneInflation) {
    Rng rng(25);
    for (int t = 0; t < 3; ++t) {
        const EtaFunction small = eta_of({-0.6, -0.3}, {rng.uniform(0, 0.03), rng.uniform(0, 0.03), rng.uniform(0, 0.03)});
        EtaFunction big = small;
        for (auto& x : big.bounds) x += rng.uniform(0, 0.02);
        const ReachTube a = compute_reach_tube(base_spec(small, 20, 2));
        const ReachTube b = compute_reach_tube(base_spec(big, 20, 2));
        ASSERT_EQ(a.per_step.size(), b.per_step.size());
        for (std::size_t k = 0; k < a.per_step.size(); ++k) {
            EXPECT_TRUE(box_contains(b.per_step[k].hull, a.per_step[k].hull)) << "k=" << k;
        }
    }
}

TEST(ReachTube, SubdivisionRefinementNeverEnlarges) {
    const EtaFunction eta = eta_of({-0.55, -0.4}, {0.02, 0.01, 0.03});
    for (int s : {1, 2, 4}) {
        const ReachTube coarse = compute_reach_tube(base_spec(eta, 20, s));
        const ReachTube fine = compute_reach_tube(base_spec(eta, 20, 2 * s));
        for (std::size_t k = 0; k < coarse.per_step.size(); ++k) {
            EXPECT_TRUE(box_contains(coarse.per_step[k].hull, fine.per_step[k].hull)) << "s=" << s << " k=" << k;
        }
    }
}

TEST(ReachTube, BranchAccountingAudit) {
    for (MergeStrategy m : {MergeStrategy::NoMerge, MergeStrategy::OppMerge, MergeStrategy::GreedyMerge}) {
        VerifySpec spec = base_spec(eta_of({-0.55, -0.45}, {0.02, 0.01, 0.03}), 20, 3);
        spec.merge_strategy = m;
        spec.normalize_period = 2;
        spec.greedy_threshold = 2;
        spec.audit = true;
        const ReachTube tube = compute_reach_tube(spec);
        EXPECT_FALSE(tube.audit_log.empty());
        EXPECT_EQ(audit_branches(tube.audit_log), "") << to_string(m);
    }
    Branch orphan;
    orphan.id = 5;
    orphan.parent = 99;
    EXPECT_NE(audit_branches({orphan}), "");
}

TEST(ReachTube, BoundSatisfyingTrajectoriesAreContained) {
    const EtaFunction eta = eta_of({-0.6, -0.45, -0.3}, {0.06, 0.02, 0.015, 0.04});
    const TimeBoundFunction tb{std::vector<double>(41, 0.03), 0.05};
    for (const BoundFunction& bound : {BoundFunction{eta}, BoundFunction{tb}}) {
        const VerifySpec spec = base_spec(bound, 40, 10);
        const ReachTube tube = compute_reach_tube(spec);
        ASSERT_TRUE(tube.feasible);
        Rng rng(26);
        for (int j = 0; j < 1000; ++j) {
            const auto traj = bounded_rollout(spec, rng.uniform(spec.initial_set.lo, spec.initial_set.hi), rng);
            for (std::size_t k = 0; k < traj.size(); ++k) {
                ASSERT_TRUE(tube.per_step[k].hull.contains(traj[k])) << "j=" << j << " k=" << k;
            }
        }
    }
}

TEST(ReachTube, JsonRoundTripAndDigest) {
    const VerifySpec spec = base_spec(eta_of({-0.5}, {0.02, 0.03}), 10, 2);
    const ReachTube tube = compute_reach_tube(spec);
    const TubeSummary s = tube_from_json(tube_to_json(tube));
    EXPECT_EQ(s.per_step.size(), tube.per_step.size());
    EXPECT_EQ(s.max_set_size, tube.max_set_size);
    EXPECT_EQ(s.total_branches, tube.total_branches);
    EXPECT_EQ(s.strategy, "opp");
    EXPECT_TRUE(s.feasible);
    EXPECT_EQ(tube_to_json(tube), tube_to_json(compute_reach_tube(spec)));
    VerifySpec other = spec;
    other.horizon = 11;
    EXPECT_NE(spec_digest(spec), spec_digest(other));
    EXPECT_EQ(tube_to_csv(tube).substr(0, 5), "k,p_l");
    const auto metrics = nlohmann::json::parse(reach_metrics_json(tube));
    EXPECT_EQ(metrics["per_step_sizes"].size(), tube.per_step.size());
}

TEST(VerifySpec, Validation) {
    VerifySpec s = base_spec(eta_of({}, {0.1}), 10, 1);
    s.subdivisions = 0;
    EXPECT_THROW(s.validate(), ConfigError);
    s = base_spec(TimeBoundFunction{{0.1, 0.1}, 0.05}, 10, 1);
    EXPECT_THROW(s.validate(), ConfigError);
    EXPECT_THROW(merge_strategy_from_string("bogus"), ConfigError);
}
