// SPDX-License-Identifier: Apache-2.0
#include "confreach/reach.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <unordered_map>

#include "confreach/io.hpp"
#include "confreach/parallel.hpp"
#include "confreach/rng.hpp"

namespace confreach {

using nlohmann::json;

std::string to_string(MergeStrategy s) {
    switch (s) {
        case MergeStrategy::NoMerge: return "none";
        case MergeStrategy::OppMerge: return "opp";
        case MergeStrategy::GreedyMerge: return "greedy";
    }
    return "none";
}

MergeStrategy merge_strategy_from_string(const std::string& s) {
    if (s == "none" || s == "no" || s == "NoMerge") return MergeStrategy::NoMerge;
    if (s == "opp" || s == "OppMerge") return MergeStrategy::OppMerge;
    if (s == "greedy" || s == "GreedyMerge") return MergeStrategy::GreedyMerge;
    throw ConfigError("unknown merge strategy '" + s + "'");
}

void VerifySpec::validate() const {
    if (!initial_set.valid() || !std::isfinite(initial_set.lo) || !std::isfinite(initial_set.hi)) {
        throw ConfigError("verify: invalid initial set");
    }
    if (subdivisions < 1) throw ConfigError("verify: subdivisions must be >= 1");
    if (horizon < 0) throw ConfigError("verify: horizon must be >= 0");
    if (normalize_period < 1) throw ConfigError("verify: normalize_period must be >= 1");
    if (greedy_threshold < 1) throw ConfigError("verify: greedy_threshold must be >= 1");
    params.validate();
    if (const auto* tb = std::get_if<TimeBoundFunction>(&bound)) {
        if (tb->horizon() < horizon) throw ConfigError("verify: time bound shorter than the horizon");
    }
}

SplitResult split_by_regions(const BoxSet& box, const Partition& partition) {
    SplitResult out;
    const bool pos = partition.dimension == Dimension::Position;
    const Interval x = pos ? box.position : box.velocity;
    const Interval& range = partition.range;
    out.out_of_range = x.lo < range.lo || x.hi > range.hi;
    const Interval clipped{std::max(x.lo, range.lo), std::min(x.hi, range.hi)};
    if (!clipped.valid()) return out;
    const int first = partition.region_index(clipped.lo);
    const int last = partition.region_index(clipped.hi);
    for (int i = first; i <= last; ++i) {
        const Interval r = partition.region_interval(static_cast<std::size_t>(i));
        const Interval piece{std::max(clipped.lo, r.lo), std::min(clipped.hi, r.hi)};
        BoxSet b = box;
        (pos ? b.position : b.velocity) = piece;
        out.pieces.emplace_back(i, b);
    }
    return out;
}

StepOutcome step_branch(const Branch& branch, const VerifySpec& spec, int k, std::uint64_t& next_id) {
    StepOutcome out;
    double e;
    if (const auto* eta = std::get_if<EtaFunction>(&spec.bound)) {
        if (branch.region < 0 || static_cast<std::size_t>(branch.region) >= eta->bounds.size()) {
            out.infeasible = true;
            return out;
        }
        e = eta->bounds[static_cast<std::size_t>(branch.region)];
    } else {
        e = std::get<TimeBoundFunction>(spec.bound)(k);
    }
    if (!std::isfinite(e)) {
        out.infeasible = true;
        return out;
    }
    const Rounding r = spec.params.rounding;
    const Interval meas = interval_add(branch.box.position, {-e, e}, r);
    const Interval u = controller_eval_interval(spec.controller, meas, branch.box.velocity, r);
    const BoxSet next = dynamics_step_interval(branch.box, u, spec.params);

    auto child = [&](int region, const BoxSet& b) {
        Branch c;
        c.id = next_id++;
        c.box = b;
        c.region = region;
        c.created_at = k + 1;
        c.parent = branch.id;
        return c;
    };
    if (const auto* eta = std::get_if<EtaFunction>(&spec.bound)) {
        const auto split = split_by_regions(next, eta->partition);
        if (split.out_of_range) {
            out.infeasible = true;
            return out;
        }
        for (const auto& [region, b] : split.pieces) out.children.push_back(child(region, b));
    } else {
        out.children.push_back(child(kUnguarded, next));
    }
    return out;
}

Branch normalize_branch(const Branch& branch) {
    Branch b = branch;
    b.checkpoint = true;
    return b;
}

std::vector<Branch> merge_branches(std::vector<Branch>& branches, MergeStrategy strategy, bool checkpoint,
                                   std::size_t greedy_threshold, std::uint64_t& next_id) {
    if (strategy == MergeStrategy::NoMerge) return branches;

    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < branches.size(); ++i) {
        if (branches[i].status == BranchStatus::Active) groups[branches[i].region].push_back(i);
    }
    std::vector<Branch> out;
    out.reserve(branches.size());
    for (auto& [region, members] : groups) {
        std::vector<std::size_t> kept;
        if (checkpoint) {
            std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
                const BoxSet& x = branches[a].box;
                const BoxSet& y = branches[b].box;
                const double sx = x.position.width() + x.velocity.width();
                const double sy = y.position.width() + y.velocity.width();
                if (sx != sy) return sx > sy;
                if (x.position.width() != y.position.width()) return x.position.width() > y.position.width();
                return branches[a].id < branches[b].id;
            });
            for (std::size_t i : members) {
                const BoxSet& b = branches[i].box;
                std::size_t container = members.size();
                for (std::size_t j : kept) {
                    if (box_contains(branches[j].box, b)) {
                        container = j;
                        break;
                    }
                }
                if (container == members.size()) {
                    kept.push_back(i);
                } else {
                    branches[i].status = BranchStatus::Merged;
                    branches[i].merged_into = branches[container].id;
                }
            }
            std::sort(kept.begin(), kept.end());
        } else {
            kept = members;
        }
        if (strategy == MergeStrategy::GreedyMerge && kept.size() > greedy_threshold) {
            Branch h = branches[kept.front()];
            h.id = next_id++;
            h.parent = 0;
            h.status = BranchStatus::Active;
            for (std::size_t i : kept) {
                h.box = box_hull(h.box, branches[i].box);
                branches[i].status = BranchStatus::Merged;
                branches[i].merged_into = h.id;
            }
            branches.push_back(h);
            out.push_back(h);
        } else {
            for (std::size_t i : kept) out.push_back(branches[i]);
        }
    }
    return out;
}

namespace {

struct SubResult {
    std::vector<BoxSet> hull;
    std::vector<std::size_t> counts;
    std::size_t merged = 0;
    bool feasible = true;
    int infeasible_step = -1;
    int infeasible_region = kUnguarded;
    std::vector<Branch> log;
};

BoxSet hull_of(const std::vector<Branch>& bs) {
    if (bs.empty()) throw std::logic_error("reach: empty branch set");
    BoxSet h = bs.front().box;
    for (const auto& b : bs) h = box_hull(h, b.box);
    return h;
}

SubResult run_subinterval(const VerifySpec& spec, std::size_t index) {
    SubResult res;
    const double w = spec.initial_set.hi - spec.initial_set.lo;
    const auto s = static_cast<double>(spec.subdivisions);
    const double lo = spec.initial_set.lo + w * static_cast<double>(index) / s;
    const double hi = index + 1 == static_cast<std::size_t>(spec.subdivisions)
                          ? spec.initial_set.hi
                          : spec.initial_set.lo + w * static_cast<double>(index + 1) / s;
    const BoxSet init{{lo, hi}, {0.0, 0.0}};
    std::uint64_t next_id = (static_cast<std::uint64_t>(index) << 40u) + 1;

    std::vector<Branch> active;
    if (const auto* eta = std::get_if<EtaFunction>(&spec.bound)) {
        const auto split = split_by_regions(init, eta->partition);
        for (const auto& [region, b] : split.pieces) {
            Branch br;
            br.id = next_id++;
            br.box = b;
            br.region = region;
            active.push_back(br);
        }
        if (split.out_of_range || active.empty()) {
            res.feasible = false;
            res.infeasible_step = 0;
            res.hull.push_back(init);
            res.counts.push_back(1);
            return res;
        }
    } else {
        Branch br;
        br.id = next_id++;
        br.box = init;
        active.push_back(br);
    }
    res.hull.push_back(hull_of(active));
    res.counts.push_back(active.size());

    for (int k = 0; k < spec.horizon; ++k) {
        std::vector<Branch> next;
        next.reserve(active.size() * 2);
        for (auto& b : active) {
            auto outcome = step_branch(b, spec, k, next_id);
            if (outcome.infeasible) {
                b.status = BranchStatus::Infeasible;
                if (res.feasible) {
                    res.feasible = false;
                    res.infeasible_step = k;
                    res.infeasible_region = b.region;
                }
            } else {
                b.status = BranchStatus::Stepped;
                for (auto& c : outcome.children) next.push_back(std::move(c));
            }
        }
        if (spec.audit) res.log.insert(res.log.end(), active.begin(), active.end());
        if (!res.feasible) return res;

        const bool checkpoint = (k + 1) % spec.normalize_period == 0;
        if (checkpoint) {
            for (auto& b : next) b = normalize_branch(b);
        }
        const std::size_t before = next.size();
        active = merge_branches(next, spec.merge_strategy, checkpoint, spec.greedy_threshold, next_id);
        res.merged += before - std::min(before, active.size());
        if (spec.audit) {
            for (const auto& b : next) {
                if (b.status == BranchStatus::Merged) res.log.push_back(b);
            }
        }
        res.hull.push_back(hull_of(active));
        res.counts.push_back(active.size());
    }
    if (spec.audit) res.log.insert(res.log.end(), active.begin(), active.end());
    return res;
}

}  // namespace

std::uint64_t spec_digest(const VerifySpec& spec) {
    json j;
    j["initial_set"] = {spec.initial_set.lo, spec.initial_set.hi};
    j["subdivisions"] = spec.subdivisions;
    j["horizon"] = spec.horizon;
    j["bound"] = json::parse(bound_to_json(spec.bound));
    j["controller"] = std::visit(
        [](const auto& c) -> json {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, EnergyController>) {
                return {{"type", "energy"}, {"thrust", c.thrust}};
            } else {
                return json::parse(c.to_json_text());
            }
        },
        spec.controller);
    const auto& p = spec.params;
    j["params"] = {p.power, p.gravity, p.frequency, p.goal_position, p.position_bounds.lo, p.position_bounds.hi,
                   p.velocity_bounds.lo, p.velocity_bounds.hi, p.gym_ordering, p.rounding == Rounding::Outward};
    j["merge"] = to_string(spec.merge_strategy);
    j["normalize_period"] = spec.normalize_period;
    j["greedy_threshold"] = spec.greedy_threshold;
    return fnv1a64(j.dump());
}

ReachTube compute_reach_tube(const VerifySpec& spec) {
    spec.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto n = static_cast<std::size_t>(spec.subdivisions);
    std::vector<SubResult> subs(n);
    parallel_for(n, spec.threads ? spec.threads : default_threads(),
                 [&](std::size_t i) { subs[i] = run_subinterval(spec, i); });

    ReachTube tube;
    tube.merge_strategy = spec.merge_strategy;
    tube.spec_digest = spec_digest(spec);
    std::size_t steps = static_cast<std::size_t>(spec.horizon) + 1;
    for (const auto& s : subs) {
        steps = std::min(steps, s.hull.size());
        if (!s.feasible && (tube.feasible || s.infeasible_step < tube.infeasible_step)) {
            tube.feasible = false;
            tube.infeasible_step = s.infeasible_step;
            tube.infeasible_region = s.infeasible_region;
        }
    }
    for (std::size_t k = 0; k < steps; ++k) {
        TubeStep ts;
        ts.k = static_cast<int>(k);
        ts.hull = subs.front().hull[k];
        for (const auto& s : subs) {
            ts.hull = box_hull(ts.hull, s.hull[k]);
            ts.n_branches += s.counts[k];
        }
        ts.pos_width = ts.hull.position.width();
        tube.max_set_size = std::max(tube.max_set_size, ts.pos_width);
        tube.total_branches += ts.n_branches;
        tube.peak_branches = std::max(tube.peak_branches, ts.n_branches);
        tube.per_step.push_back(ts);
    }
    for (auto& s : subs) {
        tube.merged_branches += s.merged;
        if (spec.audit) tube.audit_log.insert(tube.audit_log.end(), s.log.begin(), s.log.end());
    }
    tube.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return tube;
}

std::string audit_branches(const std::vector<Branch>& log) {
    std::unordered_map<std::uint64_t, const Branch*> by_id;
    for (const auto& b : log) {
        if (!by_id.emplace(b.id, &b).second) return "duplicate branch id " + std::to_string(b.id);
    }
    std::unordered_map<std::uint64_t, std::size_t> children;
    for (const auto& b : log) {
        if (b.parent != 0) {
            const auto it = by_id.find(b.parent);
            if (it == by_id.end()) return "branch " + std::to_string(b.id) + " has an unknown parent";
            if (it->second->status != BranchStatus::Stepped) return "parent of " + std::to_string(b.id) + " was not stepped";
            ++children[b.parent];
        }
        if (b.status == BranchStatus::Merged) {
            const auto it = by_id.find(b.merged_into);
            if (it == by_id.end()) return "branch " + std::to_string(b.id) + " merged into an unknown branch";
            const Branch& c = *it->second;
            if (c.created_at != b.created_at || !box_contains(c.box, b.box)) {
                return "branch " + std::to_string(b.id) + " merged into a branch that does not contain it";
            }
            if (c.status == BranchStatus::Merged && c.merged_into == b.id) return "merge cycle at " + std::to_string(b.id);
        }
    }
    for (const auto& b : log) {
        if (b.status == BranchStatus::Stepped && children[b.id] == 0) {
            return "stepped branch " + std::to_string(b.id) + " left no children";
        }
    }
    return {};
}

namespace {

json box_json(const BoxSet& b) {
    return {{"p", {b.position.lo, b.position.hi}}, {"v", {b.velocity.lo, b.velocity.hi}}};
}

json metrics_json(const ReachTube& tube) {
    json sizes = json::array();
    json counts = json::array();
    for (const auto& s : tube.per_step) {
        sizes.push_back(s.pos_width);
        counts.push_back(s.n_branches);
    }
    return {{"max_set_size", tube.max_set_size},
            {"per_step_sizes", sizes},
            {"branch_counts", counts},
            {"total_branches", tube.total_branches},
            {"peak_branches", tube.peak_branches},
            {"merged_branches", tube.merged_branches},
            {"strategy", to_string(tube.merge_strategy)}};
}

}  // namespace

std::string reach_metrics_json(const ReachTube& tube) { return metrics_json(tube).dump(); }

std::string tube_to_json(const ReachTube& tube) {
    json steps = json::array();
    for (const auto& s : tube.per_step) {
        steps.push_back({{"k", s.k}, {"hull", box_json(s.hull)}, {"n_branches", s.n_branches}, {"pos_width", s.pos_width}});
    }
    json j;
    j["spec_digest"] = digest_hex(tube.spec_digest);
    j["status"] = tube.feasible ? "ok" : "infeasible";
    if (!tube.feasible) j["infeasible"] = {{"step", tube.infeasible_step}, {"region", tube.infeasible_region}};
    j["per_step"] = steps;
    j["metrics"] = metrics_json(tube);
    return j.dump(1) + "\n";
}

std::string tube_to_csv(const ReachTube& tube) {
    std::string out = "k,p_lo,p_hi,v_lo,v_hi,n_branches\n";
    for (const auto& s : tube.per_step) {
        out += std::to_string(s.k) + ',' + format_double(s.hull.position.lo) + ',' + format_double(s.hull.position.hi) +
               ',' + format_double(s.hull.velocity.lo) + ',' + format_double(s.hull.velocity.hi) + ',' +
               std::to_string(s.n_branches) + '\n';
    }
    return out;
}

TubeSummary tube_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        TubeSummary t;
        for (const auto& s : j.at("per_step")) {
            TubeStep ts;
            ts.k = s.at("k").get<int>();
            const auto& h = s.at("hull");
            ts.hull = {{h.at("p").at(0).get<double>(), h.at("p").at(1).get<double>()},
                       {h.at("v").at(0).get<double>(), h.at("v").at(1).get<double>()}};
            ts.n_branches = s.at("n_branches").get<std::size_t>();
            ts.pos_width = s.at("pos_width").get<double>();
            t.per_step.push_back(ts);
        }
        const auto& m = j.at("metrics");
        t.max_set_size = m.at("max_set_size").get<double>();
        t.total_branches = m.at("total_branches").get<std::size_t>();
        t.strategy = m.at("strategy").get<std::string>();
        t.feasible = j.at("status").get<std::string>() == "ok";
        t.digest = j.at("spec_digest").get<std::string>();
        return t;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed tube file: ") + e.what());
    }
}

}  // namespace confreach
