// SPDX-License-Identifier: Apache-2.0
// One line per acceptance criterion; exits nonzero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>

#include "confreach/io.hpp"
#include "confreach/kernels/kernels.hpp"
#include "confreach/pipeline.hpp"
#include "support.hpp"

using namespace confreach;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

// Tolerances and sizes.
constexpr int kQuantileSets = 1000;
constexpr double kCoverageFloor = 0.94;
constexpr std::size_t kHeldOut = 2000;
constexpr double kTubeContainmentFloor = 0.94;
constexpr std::size_t kFreshTrajectories = 1000;
constexpr int kMergeSpecs = 5;
constexpr double kMergeTol = 1e-12;
constexpr int kFuzzSamples = 100000;
constexpr double kEdgeTol = 0.05;
constexpr std::size_t kOptimizerBudget = 600;
constexpr int kIdentityPairs = 100;

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void report(int n, const char* name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d %s: %s (%s; %.1fs)\n", n, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

std::string f4(double x) {
    char b[32];
    std::snprintf(b, sizeof b, "%.4f", x);
    return b;
}

double rank_oracle(const std::vector<double>& s, double level) {
    const auto n = s.size();
    std::size_t k = 0;
    while (static_cast<double>(k) < static_cast<double>(n + 1) * level * (1.0 - 1e-12)) ++k;
    if (k > n) return kInf;
    double best = kInf;
    for (double v : s) {
        std::size_t c = 0;
        for (double w : s) c += w <= v ? 1 : 0;
        if (c >= k) best = std::min(best, v);
    }
    return best;
}

// Shared desk-scale experiment: datasets and bounds from the default config.
struct Desk {
    PipelineConfig cfg;
    Controller ctrl = EnergyController{};
    std::map<std::string, BoundFunction> bounds;
};

Desk& desk() {
    static Desk d = [] {
        Desk x;
        ConfigOverrides ov;
        ov.out_dir = temp_dir("acceptance_desk");
        x.cfg = load_config(fs::path(CONFREACH_SOURCE_DIR) / "configs" / "default.json", ov);
        x.ctrl = x.cfg.make_controller();
        cmd_generate(x.cfg);
        cmd_calibrate(x.cfg);
        for (const auto& name : method_names(x.cfg)) {
            x.bounds.emplace(name, bound_from_json(read_file(x.cfg.out_dir / "bounds" / (name + ".json"))));
        }
        return x;
    }();
    return d;
}

VerifySpec desk_spec(const std::string& method) {
    const Desk& d = desk();
    VerifySpec s;
    s.initial_set = d.cfg.verify.initial_set;
    s.subdivisions = 50;
    s.horizon = d.cfg.horizon;
    s.bound = d.bounds.at(method);
    s.controller = d.ctrl;
    s.params = d.cfg.params;
    s.merge_strategy = d.cfg.verify.merge;
    s.normalize_period = d.cfg.verify.normalize_period;
    s.greedy_threshold = d.cfg.verify.greedy_threshold;
    return s;
}

std::map<std::string, ReachTube>& tubes() {
    static std::map<std::string, ReachTube> t;
    return t;
}

const ReachTube& tube(const std::string& method) {
    auto it = tubes().find(method);
    if (it == tubes().end()) it = tubes().emplace(method, compute_reach_tube(desk_spec(method))).first;
    return it->second;
}

bool hull_equal(const BoxSet& a, const BoxSet& b, double tol) {
    return std::abs(a.position.lo - b.position.lo) <= tol && std::abs(a.position.hi - b.position.hi) <= tol &&
           std::abs(a.velocity.lo - b.velocity.lo) <= tol && std::abs(a.velocity.hi - b.velocity.hi) <= tol;
}

Outcome quantile_oracle() {
    Rng rng(derive_seed(1, "acceptance-quantile"));
    for (int t = 0; t < kQuantileSets; ++t) {
        std::vector<double> s(1 + rng.index(500));
        for (auto& x : s) x = rng.uniform01() < 0.1 ? std::floor(rng.uniform(0, 10)) : rng.uniform(0, 1);
        const double level = rng.uniform(0.001, 0.999);
        if (conformal_quantile(s, level) != rank_oracle(s, level)) {
            return {false, "mismatch at set " + std::to_string(t)};
        }
    }
    return {true, std::to_string(kQuantileSets) + " sets match exactly"};
}

Outcome coverage() {
    const Desk& d = desk();
    const Dataset held = generate_dataset(kHeldOut, d.cfg.data.initial_set, d.ctrl, d.cfg.noise, d.cfg.params,
                                          d.cfg.horizon, derive_seed(d.cfg.seed, "acceptance-heldout"));
    bool ok = true;
    std::string detail;
    for (const std::string name : {"uniform_m1", "uniform_m3", "uniform_m5", "ga_etdl_m3"}) {
        const double c = validate_coverage(d.bounds.at(name), held);
        ok = ok && c >= kCoverageFloor;
        detail += (detail.empty() ? "" : ", ") + name + "=" + f4(c);
    }
    return {ok, detail};
}

Outcome tube_soundness() {
    const Desk& d = desk();
    const Dataset fresh = generate_dataset(kFreshTrajectories, d.cfg.verify.initial_set, d.ctrl, d.cfg.noise,
                                           d.cfg.params, d.cfg.horizon, derive_seed(d.cfg.seed, "acceptance-fresh"));
    bool ok = true;
    std::string detail;
    for (const std::string name : {"ga_etdl_m3", "ga_etdl_m5"}) {
        const ReachTube& t = tube(name);
        if (!t.feasible) {
            ok = false;
            detail += name + " infeasible; ";
            continue;
        }
        const auto& eta = std::get<EtaFunction>(d.bounds.at(name));
        std::size_t inside = 0, satisfying = 0, satisfying_inside = 0;
        for (const auto& tr : fresh.trajectories) {
            bool in = true, sat = true;
            for (const auto& s : tr.steps) {
                in = in && t.per_step[static_cast<std::size_t>(s.time)].hull.contains(s.state);
                sat = sat && s.abs_error() <= eta(s.state);
            }
            inside += in;
            satisfying += sat;
            satisfying_inside += in && sat;
        }
        const double rate = static_cast<double>(inside) / static_cast<double>(fresh.size());
        ok = ok && rate >= kTubeContainmentFloor && satisfying_inside == satisfying;
        detail += name + ": contained " + f4(rate) + ", bound-satisfying " + std::to_string(satisfying_inside) + "/" +
                  std::to_string(satisfying) + "; ";
    }
    detail.resize(detail.size() - 2);
    return {ok, detail};
}

Outcome table_trend() {
    const double ga = tube("ga_etdl_m5").max_set_size;
    const double uni = tube("uniform_m1").max_set_size;
    const double base = tube("baseline").max_set_size;
    const bool feasible = tube("ga_etdl_m5").feasible && tube("uniform_m1").feasible && tube("baseline").feasible;
    return {feasible && ga < uni && ga < base,
            "ga_etdl_m5=" + f4(ga) + " uniform_m1=" + f4(uni) + " baseline=" + f4(base)};
}

Outcome merge_equivalence() {
    Rng rng(derive_seed(5, "acceptance-merge"));
    const Controller ctrl = default_controller();
    std::size_t opp_total = 0, none_total = 0;
    for (int t = 0; t < kMergeSpecs; ++t) {
        std::vector<double> e(1 + rng.index(4));
        for (auto& x : e) x = rng.uniform(-0.65, -0.35);
        e[0] = rng.uniform(-0.505, -0.495);
        Partition p;
        p.edges = repair_edges(e, p.range, 0.01);
        std::vector<double> b(p.size());
        for (auto& x : b) x = rng.uniform(0.005, 0.06);
        VerifySpec spec;
        spec.bound = EtaFunction{p, b, 0.05};
        spec.controller = ctrl;
        spec.horizon = 30 + static_cast<int>(rng.index(21));
        spec.subdivisions = 2 + static_cast<int>(rng.index(4));
        spec.normalize_period = 1 + static_cast<int>(rng.index(5));
        spec.merge_strategy = MergeStrategy::NoMerge;
        const ReachTube none = compute_reach_tube(spec);
        spec.merge_strategy = MergeStrategy::OppMerge;
        const ReachTube opp = compute_reach_tube(spec);
        spec.merge_strategy = MergeStrategy::GreedyMerge;
        const ReachTube greedy = compute_reach_tube(spec);
        if (none.per_step.size() != opp.per_step.size()) return {false, "tube lengths differ at spec " + std::to_string(t)};
        for (std::size_t k = 0; k < none.per_step.size(); ++k) {
            if (!hull_equal(none.per_step[k].hull, opp.per_step[k].hull, kMergeTol)) {
                return {false, "hulls differ at spec " + std::to_string(t) + " step " + std::to_string(k)};
            }
            if (k < greedy.per_step.size() && !box_contains(greedy.per_step[k].hull, opp.per_step[k].hull)) {
                return {false, "greedy hull misses opp hull at spec " + std::to_string(t)};
            }
        }
        if (opp.total_branches > none.total_branches) return {false, "opp used more branches at spec " + std::to_string(t)};
        opp_total += opp.total_branches;
        none_total += none.total_branches;
    }
    return {true, std::to_string(kMergeSpecs) + " specs; branches none=" + std::to_string(none_total) +
                      " opp=" + std::to_string(opp_total)};
}

Outcome interval_fuzz() {
    Rng rng(derive_seed(6, "acceptance-fuzz"));
    std::size_t escapes = 0;
    for (int i = 0; i < kFuzzSamples; ++i) {
        const Interval a = random_interval(rng, -5, 5, 2), b = random_interval(rng, -5, 5, 2);
        if (!interval_add(a, b).contains(sample(rng, a) + sample(rng, b))) ++escapes;
    }
    for (int i = 0; i < kFuzzSamples; ++i) {
        const Interval a = random_interval(rng, -5, 5, 2);
        const double c = rng.uniform(-10, 10);
        if (!interval_scale(a, c).contains(c * sample(rng, a))) ++escapes;
    }
    for (int i = 0; i < kFuzzSamples; ++i) {
        const Interval a = random_interval(rng, -10, 10, rng.uniform01() < 0.1 ? 8.0 : 0.5);
        if (!interval_cos(a).contains(std::cos(sample(rng, a)))) ++escapes;
    }
    const MountainCarParams params;
    for (int i = 0; i < kFuzzSamples; ++i) {
        const BoxSet box{random_interval(rng, -1.2, 0.5, 0.1), random_interval(rng, -0.07, 0.06, 0.01)};
        const BoxSet clipped{{box.position.lo, std::min(box.position.hi, 0.6)}, {box.velocity.lo, std::min(box.velocity.hi, 0.07)}};
        const Interval u = random_interval(rng, -1, 0.5, 0.5);
        const State s{sample(rng, clipped.position), sample(rng, clipped.velocity)};
        if (!dynamics_step_interval(clipped, u, params).contains(dynamics_step(s, sample(rng, u), params))) ++escapes;
    }
    const Controller mlp = default_controller();
    const Controller energy = EnergyController{1.0};
    const Controller deep = random_mlp(rng, {16, 16}, Activation::Tanh, Activation::Tanh);
    for (int i = 0; i < kFuzzSamples; ++i) {
        const Controller& c = i % 3 == 0 ? mlp : i % 3 == 1 ? energy : deep;
        const Interval y = random_interval(rng, -1.4, 0.7, 0.2), v = random_interval(rng, -0.07, 0.06, 0.01);
        if (!controller_eval_interval(c, y, v).contains(controller_eval(c, sample(rng, y), sample(rng, v)))) ++escapes;
    }
    return {escapes == 0, std::to_string(escapes) + " escapes over 5 x " + std::to_string(kFuzzSamples) + " samples"};
}

Outcome optimizer_sanity() {
    const Dataset reg = step_dataset(200, 40, derive_seed(7, "reg"));
    const Dataset conf = step_dataset(600, 40, derive_seed(7, "conf"));
    const LossSpec loss{LossKind::ETDL, 0.9};
    const SweepResult sweep = edge_sweep(reg, reg, loss, 0.05);
    bool ok = true;
    std::string detail = "sweep edge " + f4(sweep.edge);
    for (OptimizerKind k : {OptimizerKind::GA, OptimizerKind::SA}) {
        OptimizerSpec opt;
        opt.kind = k;
        opt.budget = kOptimizerBudget;
        opt.seed = derive_seed(7, to_string(k));
        const auto r = optimize_partition(reg, conf, 2, loss, opt, 0.05);
        bool monotone = true;
        for (std::size_t i = 1; i < r.history.size(); ++i) monotone = monotone && r.history[i] <= r.history[i - 1];
        ok = ok && monotone && std::abs(r.partition.edges[0] - sweep.edge) <= kEdgeTol;
        detail += ", " + to_string(k) + " " + f4(r.partition.edges[0]) + (monotone ? "" : " (history increased)");
    }
    return {ok, detail};
}

Outcome etdl_identity() {
    Rng rng(derive_seed(8, "acceptance-identity"));
    for (int t = 0; t < kIdentityPairs; ++t) {
        const Dataset ds = synthetic_dataset(1 + rng.index(60), 40, rng.bits(), [](double p) { return 0.03 + 0.05 * std::abs(p); });
        std::vector<double> e(rng.index(7));
        for (auto& x : e) x = rng.uniform(-1.2, 0.6);
        Partition p;
        p.edges = repair_edges(e, p.range, 1e-3);
        const EtaFunction eta = fit_eta(ds, p, 0.05);
        const double a = loss_etdl(ds, p, eta, 1.0), b = loss_el(ds, p, eta);
        if (!(a == b || (std::isinf(a) && std::isinf(b)))) return {false, "pair " + std::to_string(t) + " differs"};
    }
    return {true, std::to_string(kIdentityPairs) + " pairs identical"};
}

Outcome determinism() {
    std::string digests[2];
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = temp_dir("acceptance_det" + std::to_string(run));
        PipelineConfig cfg = parse_config(small_config_json(dir, 20240601));
        cfg.validate();
        cmd_generate(cfg);
        cmd_calibrate(cfg);
        cmd_verify(cfg);
        digests[run] = cmd_report(cfg).digest;
        fs::remove_all(dir);
    }
    return {digests[0] == digests[1], digests[0] + " vs " + digests[1]};
}

}  // namespace

int main() {
    std::printf("simd backend: %s\n", std::string(kernels::backend_name(kernels::active().backend)).c_str());
    report(1, "quantile oracle", quantile_oracle);
    report(2, "coverage on held-out trajectories", coverage);
    report(3, "reach-tube soundness", tube_soundness);
    report(4, "max set size ordering", table_trend);
    report(5, "merge equivalence", merge_equivalence);
    report(6, "interval soundness fuzz", interval_fuzz);
    report(7, "optimizer sanity", optimizer_sanity);
    report(8, "ETDL/EL identity", etdl_identity);
    report(9, "determinism", determinism);
    fs::remove_all(desk().cfg.out_dir);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
