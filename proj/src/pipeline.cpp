// SPDX-License-Identifier: Apache-2.0
#include "confreach/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <numeric>

#include "confreach/io.hpp"
#include "confreach/rng.hpp"

namespace confreach {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Interval interval_from(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2) throw ConfigError(std::string(what) + ": expected [lo, hi]");
    const double lo = j.at(0).get<double>();
    const double hi = j.at(1).get<double>();
    if (!(lo <= hi)) throw ConfigError(std::string(what) + ": lo > hi");
    return {lo, hi};
}

json interval_to(const Interval& a) { return json::array({a.lo, a.hi}); }

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

void read_optimizer(const json& j, OptimizerSpec& o) {
    o.budget = j.value("budget", o.budget);
    o.population = j.value("population", o.population);
    o.mutation_rate = j.value("mutation_rate", o.mutation_rate);
    o.tournament = j.value("tournament", o.tournament);
    o.initial_temperature = j.value("initial_temperature", o.initial_temperature);
    o.cooling_rate = j.value("cooling_rate", o.cooling_rate);
    o.step_fraction = j.value("step_fraction", o.step_fraction);
    o.min_width = j.value("min_width", o.min_width);
    if (j.contains("search_fit")) o.search_fit = search_fit_from_string(j.at("search_fit"));
}

json optimizer_json(const OptimizerSpec& o) {
    return {{"budget", o.budget},          {"population", o.population},
            {"mutation_rate", o.mutation_rate}, {"tournament", o.tournament},
            {"initial_temperature", o.initial_temperature}, {"cooling_rate", o.cooling_rate},
            {"step_fraction", o.step_fraction}, {"min_width", o.min_width},
            {"search_fit", to_string(o.search_fit)}};
}

std::string method_name(OptimizerKind o, LossKind l, std::size_t m) {
    return lower(to_string(o)) + "_" + lower(to_string(l)) + "_m" + std::to_string(m);
}

std::uint64_t fnv_file(const std::string& content) { return fnv1a64(content); }

fs::path data_path(const PipelineConfig& cfg, const std::string& name) { return cfg.out_dir / "data" / (name + ".json"); }
fs::path bound_path(const PipelineConfig& cfg, const std::string& name) { return cfg.out_dir / "bounds" / (name + ".json"); }
fs::path tube_path(const PipelineConfig& cfg, const std::string& name, const std::string& ext) {
    return cfg.out_dir / "tubes" / (name + ext);
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.horizon = ds.horizon;
    out.seed = ds.seed;
    out.trajectories.reserve(idx.size());
    for (std::size_t i : idx) out.trajectories.push_back(ds.trajectories[i]);
    return out;
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.index(i)]);
    return p;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(const std::vector<std::size_t>& perm,
                                                                            std::size_t first) {
    std::vector<std::size_t> a(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(first));
    std::vector<std::size_t> b(perm.begin() + static_cast<std::ptrdiff_t>(first), perm.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return {a, b};
}

std::size_t portion(std::size_t n, double fraction) {
    if (n < 2) throw ConfigError("data: cannot split a set of fewer than 2 trajectories");
    const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    return std::clamp<std::size_t>(k, 1, n - 1);
}

json load_json(const fs::path& p) {
    try {
        return json::parse(read_file(p));
    } catch (const json::exception& e) {
        throw IoError("malformed JSON in '" + p.string() + "': " + e.what());
    }
}

}  // namespace

void PipelineConfig::apply_paper_scale() {
    paper_scale = true;
    data.n_total = 4000;
    verify.subdivisions = 200;
    uniform_m = {1, 2, 3, 4, 5, 6, 7};
    optimized = {{OptimizerKind::GA, LossKind::EL, {2, 3, 4, 5, 6, 7}},
                 {OptimizerKind::GA, LossKind::ETDL, {2, 3, 4, 5, 6, 7}},
                 {OptimizerKind::SA, LossKind::EL, {2, 3, 4, 5, 6, 7}},
                 {OptimizerKind::SA, LossKind::ETDL, {2, 3, 4, 5, 6, 7}}};
    ga.budget = 1500;
    sa.budget = 1500;
}

void PipelineConfig::validate() const {
    params.validate();
    noise.validate(params.position_bounds);
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (data.n_total < 4) throw ConfigError("data.n_total must be >= 4");
    for (double f : {data.cal_fraction, data.reg_fraction, data.baseline_alpha_fraction}) {
        if (!(f > 0.0 && f < 1.0)) throw ConfigError("data: split fractions must lie in (0, 1)");
    }
    if (!params.position_bounds.contains(data.initial_set)) throw ConfigError("data.initial_set outside the position bounds");
    if (!params.position_bounds.contains(verify.initial_set)) throw ConfigError("verify.initial_set outside the position bounds");
    if (verify.subdivisions < 1) throw ConfigError("verify.subdivisions must be >= 1");
    if (verify.normalize_period < 1) throw ConfigError("verify.normalize_period must be >= 1");
    if (verify.merge_sweep_subdivisions < 1 || verify.merge_sweep_horizon < 1) {
        throw ConfigError("verify.merge_sweep: subdivisions and horizon must be >= 1");
    }
    for (std::size_t m : uniform_m) {
        if (m < 1) throw ConfigError("partition.uniform_m entries must be >= 1");
    }
    for (const auto& o : optimized) {
        for (std::size_t m : o.m) {
            if (m < 1) throw ConfigError("partition.optimized m entries must be >= 1");
        }
    }
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("partition.decay must lie in (0, 1]");
    ga.validate();
    sa.validate();
    if (controller.type != "mlp" && controller.type != "energy") throw ConfigError("controller.type must be mlp or energy");
    if (controller.type == "energy" && !(controller.thrust > 0.0 && controller.thrust <= 1.0)) {
        throw ConfigError("controller.thrust must lie in (0, 1]");
    }
    const auto names = method_names(*this);
    for (const auto& m : verify.merge_sweep_methods) {
        if (std::find(names.begin(), names.end(), m) == names.end()) {
            throw ConfigError("verify.merge_sweep names unknown method '" + m + "'");
        }
    }
    split_sizes(data);
}

Controller PipelineConfig::make_controller() const {
    if (controller.type == "energy") return EnergyController{controller.thrust};
    fs::path p = controller.path;
    if (p.empty()) throw ConfigError("controller.path is required for an mlp controller");
    if (p.is_relative()) p = base_dir / p;
    return MlpController::load(p.string());
}

std::string PipelineConfig::canonical_json() const {
    json j;
    j["params"] = {{"power", params.power},
                   {"gravity", params.gravity},
                   {"frequency", params.frequency},
                   {"goal_position", params.goal_position},
                   {"position_bounds", interval_to(params.position_bounds)},
                   {"velocity_bounds", interval_to(params.velocity_bounds)},
                   {"gym_ordering", params.gym_ordering},
                   {"rounding", params.rounding == Rounding::Outward ? "outward" : "nearest"}};
    json ctrl = {{"type", controller.type}};
    if (controller.type == "energy") {
        ctrl["thrust"] = controller.thrust;
    } else {
        // the weights themselves, so that editing the file changes the digest
        ctrl["weights"] = json::parse(std::get<MlpController>(make_controller()).to_json_text());
    }
    j["controller"] = ctrl;
    json bp = json::array();
    for (const auto& [x, a] : noise.breakpoints) bp.push_back({x, a});
    j["noise"] = {{"breakpoints", bp}, {"distribution", to_string(noise.distribution)}, {"seed", noise.seed}};
    j["alpha"] = alpha;
    j["horizon"] = horizon;
    j["data"] = {{"n_total", data.n_total},
                 {"cal_fraction", data.cal_fraction},
                 {"reg_fraction", data.reg_fraction},
                 {"baseline_alpha_fraction", data.baseline_alpha_fraction},
                 {"initial_set", interval_to(data.initial_set)}};
    json opt = json::array();
    for (const auto& o : optimized) opt.push_back({{"optimizer", to_string(o.optimizer)}, {"loss", to_string(o.loss)}, {"m", o.m}});
    j["partition"] = {{"uniform_m", uniform_m}, {"optimized", opt}, {"baseline", baseline}, {"decay", decay},
                      {"ga", optimizer_json(ga)}, {"sa", optimizer_json(sa)}};
    j["verify"] = {{"initial_set", interval_to(verify.initial_set)},
                   {"subdivisions", verify.subdivisions},
                   {"merge", to_string(verify.merge)},
                   {"normalize_period", verify.normalize_period},
                   {"greedy_threshold", verify.greedy_threshold},
                   {"merge_sweep", {{"methods", verify.merge_sweep_methods},
                                    {"subdivisions", verify.merge_sweep_subdivisions},
                                    {"horizon", verify.merge_sweep_horizon}}}};
    j["seed"] = seed;
    return j.dump();
}

std::uint64_t PipelineConfig::digest() const { return fnv1a64(canonical_json()); }

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    PipelineConfig c;
    c.base_dir = base_dir;
    try {
        if (j.contains("system")) {
            const auto& s = j.at("system");
            if (s.contains("params")) {
                const auto& p = s.at("params");
                c.params.power = p.value("power", c.params.power);
                c.params.gravity = p.value("gravity", c.params.gravity);
                c.params.frequency = p.value("frequency", c.params.frequency);
                c.params.goal_position = p.value("goal_position", c.params.goal_position);
                if (p.contains("position_bounds")) c.params.position_bounds = interval_from(p.at("position_bounds"), "position_bounds");
                if (p.contains("velocity_bounds")) c.params.velocity_bounds = interval_from(p.at("velocity_bounds"), "velocity_bounds");
            }
            c.params.gym_ordering = s.value("gym_ordering", false);
            const auto rounding = s.value("rounding", std::string("nearest"));
            if (rounding != "nearest" && rounding != "outward") throw ConfigError("system.rounding must be nearest or outward");
            c.params.rounding = rounding == "outward" ? Rounding::Outward : Rounding::Nearest;
            if (s.contains("controller")) {
                const auto& ct = s.at("controller");
                c.controller.type = ct.value("type", c.controller.type);
                c.controller.path = ct.value("path", c.controller.path);
                c.controller.thrust = ct.value("thrust", c.controller.thrust);
            }
            if (s.contains("noise")) {
                const auto& n = s.at("noise");
                if (n.contains("breakpoints")) {
                    c.noise.breakpoints.clear();
                    for (const auto& bp : n.at("breakpoints")) {
                        c.noise.breakpoints.emplace_back(bp.at(0).get<double>(), bp.at(1).get<double>());
                    }
                }
                if (n.contains("distribution")) c.noise.distribution = noise_distribution_from_string(n.at("distribution"));
                c.noise.seed = n.value("seed", c.noise.seed);
            }
        }
        c.alpha = j.value("alpha", c.alpha);
        c.horizon = j.value("horizon", c.horizon);
        if (j.contains("data")) {
            const auto& d = j.at("data");
            c.data.n_total = d.value("n_total", c.data.n_total);
            c.data.cal_fraction = d.value("cal_fraction", c.data.cal_fraction);
            c.data.reg_fraction = d.value("reg_fraction", c.data.reg_fraction);
            c.data.baseline_alpha_fraction = d.value("baseline_alpha_fraction", c.data.baseline_alpha_fraction);
            if (d.contains("initial_set")) c.data.initial_set = interval_from(d.at("initial_set"), "data.initial_set");
        }
        if (j.contains("partition")) {
            const auto& p = j.at("partition");
            c.uniform_m = p.value("uniform_m", c.uniform_m);
            if (p.contains("optimized")) {
                c.optimized.clear();
                for (const auto& o : p.at("optimized")) {
                    c.optimized.push_back({optimizer_kind_from_string(o.at("optimizer")), loss_kind_from_string(o.at("loss")),
                                           o.at("m").get<std::vector<std::size_t>>()});
                }
            }
            c.baseline = p.value("baseline", c.baseline);
            c.decay = p.value("decay", c.decay);
            c.ga.kind = OptimizerKind::GA;
            c.sa.kind = OptimizerKind::SA;
            if (p.contains("ga")) read_optimizer(p.at("ga"), c.ga);
            if (p.contains("sa")) read_optimizer(p.at("sa"), c.sa);
        }
        if (j.contains("verify")) {
            const auto& v = j.at("verify");
            if (v.contains("initial_set")) c.verify.initial_set = interval_from(v.at("initial_set"), "verify.initial_set");
            c.verify.subdivisions = v.value("subdivisions", c.verify.subdivisions);
            if (v.contains("merge")) c.verify.merge = merge_strategy_from_string(v.at("merge"));
            c.verify.normalize_period = v.value("normalize_period", c.verify.normalize_period);
            c.verify.greedy_threshold = v.value("greedy_threshold", c.verify.greedy_threshold);
            if (v.contains("merge_sweep")) {
                const auto& ms = v.at("merge_sweep");
                c.verify.merge_sweep_methods = ms.value("methods", c.verify.merge_sweep_methods);
                c.verify.merge_sweep_subdivisions = ms.value("subdivisions", c.verify.merge_sweep_subdivisions);
                c.verify.merge_sweep_horizon = ms.value("horizon", c.verify.merge_sweep_horizon);
            }
        }
        if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
        c.seed = j.value("seed", c.seed);
        c.threads = j.value("threads", c.threads);
        if (j.value("paper_scale", false)) c.apply_paper_scale();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.ga.kind = OptimizerKind::GA;
    c.sa.kind = OptimizerKind::SA;
    c.ga.threads = c.threads;
    c.sa.threads = c.threads;
    if (c.out_dir.is_relative()) c.out_dir = base_dir / c.out_dir;
    return c;
}

PipelineConfig load_config(const fs::path& path, const ConfigOverrides& overrides) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError&) {
        throw ConfigError("cannot read config '" + path.string() + "'");
    }
    PipelineConfig c = parse_config(text, path.parent_path().empty() ? fs::path(".") : path.parent_path());
    if (overrides.paper_scale) c.apply_paper_scale();
    if (overrides.out_dir) c.out_dir = *overrides.out_dir;
    if (overrides.seed) c.seed = *overrides.seed;
    c.validate();
    return c;
}

SplitSizes split_sizes(const DataConfig& data) {
    SplitSizes s{};
    s.cal = portion(data.n_total, data.cal_fraction);
    s.test = data.n_total - s.cal;
    s.reg = portion(s.cal, data.reg_fraction);
    s.conf = s.cal - s.reg;
    s.baseline_alpha = portion(s.cal, data.baseline_alpha_fraction);
    s.baseline_conf = s.cal - s.baseline_alpha;
    return s;
}

std::vector<std::string> method_names(const PipelineConfig& cfg) {
    std::vector<std::string> names;
    for (std::size_t m : cfg.uniform_m) names.push_back("uniform_m" + std::to_string(m));
    for (const auto& o : cfg.optimized) {
        for (std::size_t m : o.m) names.push_back(method_name(o.optimizer, o.loss, m));
    }
    if (cfg.baseline) names.emplace_back("baseline");
    return names;
}

void cmd_generate(const PipelineConfig& cfg) {
    const Controller ctrl = cfg.make_controller();
    const Dataset all = generate_dataset(cfg.data.n_total, cfg.data.initial_set, ctrl, cfg.noise, cfg.params,
                                         cfg.horizon, derive_seed(cfg.seed, "dataset"));
    const SplitSizes sz = split_sizes(cfg.data);
    Rng split_rng(derive_seed(cfg.seed, "splits"));
    const auto [cal_idx, test_idx] = split_indices(permutation(all.size(), split_rng), sz.cal);
    const Dataset cal = subset(all, cal_idx);
    Rng reg_rng(derive_seed(cfg.seed, "splits", 1));
    const auto [reg_idx, conf_idx] = split_indices(permutation(cal.size(), reg_rng), sz.reg);
    Rng base_rng(derive_seed(cfg.seed, "splits", 2));
    const auto [ba_idx, bc_idx] = split_indices(permutation(cal.size(), base_rng), sz.baseline_alpha);

    save_dataset(data_path(cfg, "all"), all);
    save_dataset(data_path(cfg, "cal"), cal);
    save_dataset(data_path(cfg, "test"), subset(all, test_idx));
    save_dataset(data_path(cfg, "reg"), subset(cal, reg_idx));
    save_dataset(data_path(cfg, "conf"), subset(cal, conf_idx));
    save_dataset(data_path(cfg, "baseline_alpha"), subset(cal, ba_idx));
    save_dataset(data_path(cfg, "baseline_conf"), subset(cal, bc_idx));
    const json manifest = {{"config_digest", digest_hex(cfg.digest())},
                           {"seed", cfg.seed},
                           {"sizes", {{"all", all.size()}, {"cal", sz.cal}, {"test", sz.test}, {"reg", sz.reg},
                                      {"conf", sz.conf}, {"baseline_alpha", sz.baseline_alpha},
                                      {"baseline_conf", sz.baseline_conf}}}};
    write_file_atomic(cfg.out_dir / "data" / "manifest.json", manifest.dump(1) + "\n");
}

namespace {

Dataset require_split(const PipelineConfig& cfg, const std::string& name) {
    const fs::path p = data_path(cfg, name);
    if (!fs::exists(p)) throw IoError("missing split '" + p.string() + "'; run generate first");
    return load_dataset(p);
}

json bounds_array(const std::vector<double>& b) {
    json a = json::array();
    for (double x : b) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    return a;
}

}  // namespace

void cmd_calibrate(const PipelineConfig& cfg) {
    const std::string cfg_digest = digest_hex(cfg.digest());
    const Dataset reg = require_split(cfg, "reg");
    const Dataset conf = require_split(cfg, "conf");
    const Dataset test = require_split(cfg, "test");
    const VisitTable reg_visits = VisitTable::build(reg);
    const LossSpec etdl{LossKind::ETDL, cfg.decay};

    auto write_bound = [&](const std::string& name, const BoundFunction& bound, json extra) {
        json j = json::parse(bound_to_json(bound));
        j["name"] = name;
        j["coverage_on_test"] = validate_coverage(bound, test);
        j["config_digest"] = cfg_digest;
        j["seed"] = cfg.seed;
        for (auto& [k, v] : extra.items()) j[k] = v;
        write_file_atomic(bound_path(cfg, name), j.dump(1) + "\n");
    };

    for (std::size_t m : cfg.uniform_m) {
        const Partition p = uniform_partition(m, cfg.params.position_bounds);
        const EtaFunction eta = fit_eta(conf, p, cfg.alpha);
        write_bound("uniform_m" + std::to_string(m), eta,
                    {{"method", "uniform"}, {"m", m}, {"loss", "ETDL"}, {"loss_value", json(evaluate_loss(reg_visits, p, eta, etdl))}});
    }
    for (const auto& o : cfg.optimized) {
        for (std::size_t m : o.m) {
            OptimizerSpec spec = o.optimizer == OptimizerKind::GA ? cfg.ga : cfg.sa;
            const std::string name = method_name(o.optimizer, o.loss, m);
            spec.seed = derive_seed(cfg.seed, name);
            const auto res = optimize_partition(reg, conf, m, {o.loss, cfg.decay}, spec, cfg.alpha, cfg.params.position_bounds);
            json history = json::array();
            for (double h : res.history) history.push_back(std::isfinite(h) ? json(h) : json(nullptr));
            write_bound(name, res.eta,
                        {{"method", "optimized"}, {"m", m}, {"optimizer", to_string(o.optimizer)}, {"loss", to_string(o.loss)},
                         {"loss_value", std::isfinite(res.final_loss) ? json(res.final_loss) : json(nullptr)},
                         {"search_loss", std::isfinite(res.loss) ? json(res.loss) : json(nullptr)},
                         {"search_fit", to_string(spec.search_fit)},
                         {"optimizer_seed", spec.seed}, {"budget", spec.budget}, {"loss_history", history},
                         {"status", res.status}});
        }
    }
    if (cfg.baseline) {
        const Dataset ba = require_split(cfg, "baseline_alpha");
        const Dataset bc = require_split(cfg, "baseline_conf");
        write_bound("baseline", fit_time_baseline(ba, bc, cfg.alpha, cfg.horizon), {{"method", "baseline"}, {"m", 0}});
    }
}

namespace {

VerifySpec make_spec(const PipelineConfig& cfg, const BoundFunction& bound, const Controller& ctrl) {
    VerifySpec spec;
    spec.initial_set = cfg.verify.initial_set;
    spec.subdivisions = cfg.verify.subdivisions;
    spec.horizon = cfg.horizon;
    spec.bound = bound;
    spec.controller = ctrl;
    spec.params = cfg.params;
    spec.merge_strategy = cfg.verify.merge;
    spec.normalize_period = cfg.verify.normalize_period;
    spec.greedy_threshold = cfg.verify.greedy_threshold;
    spec.threads = cfg.threads;
    return spec;
}

void write_tube(const PipelineConfig& cfg, const std::string& name, const ReachTube& tube, const std::string& cfg_digest) {
    json j = json::parse(tube_to_json(tube));
    j["name"] = name;
    j["config_digest"] = cfg_digest;
    write_file_atomic(tube_path(cfg, name, ".json"), j.dump(1) + "\n");
    write_file_atomic(tube_path(cfg, name, ".csv"), tube_to_csv(tube));
    write_file_atomic(tube_path(cfg, name, ".timing.json"),
                      json{{"wall_time_seconds", tube.wall_time_seconds}}.dump() + "\n");
}

}  // namespace

VerifyOutcome cmd_verify(const PipelineConfig& cfg) {
    const std::string cfg_digest = digest_hex(cfg.digest());
    const Controller ctrl = cfg.make_controller();
    VerifyOutcome outcome;
    for (const auto& name : method_names(cfg)) {
        const fs::path bp = bound_path(cfg, name);
        if (!fs::exists(bp)) throw IoError("missing bound file '" + bp.string() + "'; run calibrate first");
        const BoundFunction bound = bound_from_json(read_file(bp));
        const ReachTube tube = compute_reach_tube(make_spec(cfg, bound, ctrl));
        write_tube(cfg, name, tube, cfg_digest);
        if (!tube.feasible) {
            outcome.all_feasible = false;
            outcome.infeasible.push_back(name);
        }
    }
    for (const auto& name : cfg.verify.merge_sweep_methods) {
        const BoundFunction bound = bound_from_json(read_file(bound_path(cfg, name)));
        for (MergeStrategy s : {MergeStrategy::NoMerge, MergeStrategy::OppMerge, MergeStrategy::GreedyMerge}) {
            VerifySpec spec = make_spec(cfg, bound, ctrl);
            spec.merge_strategy = s;
            spec.subdivisions = cfg.verify.merge_sweep_subdivisions;
            spec.horizon = std::min(cfg.verify.merge_sweep_horizon, cfg.horizon);
            write_tube(cfg, "merge_" + name + "_" + to_string(s), compute_reach_tube(spec), cfg_digest);
        }
    }
    return outcome;
}

namespace {

ReportRow make_row(const PipelineConfig& cfg, const std::string& bound_name, const std::string& tube_name) {
    const json b = load_json(bound_path(cfg, bound_name));
    const fs::path tp = tube_path(cfg, tube_name, ".json");
    if (!fs::exists(tp)) throw IoError("missing tube '" + tp.string() + "'; run verify first");
    const json t = load_json(tp);
    const TubeSummary tube = tube_from_json(t.dump());
    ReportRow r;
    r.method = tube_name;
    r.kind = b.value("method", std::string("uniform"));
    r.m = b.value("m", std::size_t{0});
    r.strategy = tube.strategy;
    r.max_set_size = tube.max_set_size;
    r.total_branches = tube.total_branches;
    r.feasible = tube.feasible;
    r.coverage = b.at("coverage_on_test").get<double>();
    if (b.contains("loss_value") && b.at("loss_value").is_number()) r.loss = b.at("loss_value").get<double>();
    if (b.contains("edges")) r.edges = b.at("edges").get<std::vector<double>>();
    for (const auto& x : b.at("bounds")) r.bounds.push_back(x.is_null() ? kInf : x.get<double>());
    const std::string bd = b.value("config_digest", std::string());
    const std::string td = t.value("config_digest", std::string());
    if (bd != td) throw ConfigError("mixed provenance: " + bound_name + " and its tube come from different configs");
    r.config_digest = bd;
    const fs::path timing = tube_path(cfg, tube_name, ".timing.json");
    if (fs::exists(timing)) r.wall_time = load_json(timing).value("wall_time_seconds", 0.0);
    return r;
}

json row_json(const ReportRow& r) {
    json j = {{"method", r.method},
              {"kind", r.kind},
              {"m", r.m},
              {"strategy", r.strategy},
              {"max_set_size", r.max_set_size},
              {"coverage_on_test", r.coverage},
              {"loss_value", r.loss ? json(*r.loss) : json(nullptr)},
              {"edges", r.edges},
              {"bounds", bounds_array(r.bounds)},
              {"total_branches", r.total_branches},
              {"feasible", r.feasible},
              {"config_digest", r.config_digest}};
    return j;
}

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::string pad(std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

std::string text_table(const std::vector<ReportRow>& rows) {
    std::string out = pad("method", 28) + pad("M", 4) + pad("merge", 8) + pad("max_size", 11) + pad("coverage", 10) +
                      pad("loss", 12) + pad("branches", 12) + pad("time_s", 9) + "status\n";
    for (const auto& r : rows) {
        out += pad(r.method, 28) + pad(std::to_string(r.m), 4) + pad(r.strategy, 8) + pad(fmt("%.4f", r.max_set_size), 11) +
               pad(fmt("%.4f", r.coverage), 10) + pad(r.loss ? fmt("%.4g", *r.loss) : "-", 12) +
               pad(std::to_string(r.total_branches), 12) + pad(fmt("%.2f", r.wall_time), 9) +
               (r.feasible ? "ok" : "infeasible") + "\n";
    }
    return out;
}

std::string rows_csv(const std::vector<ReportRow>& rows) {
    std::string out = "method,kind,m,strategy,max_set_size,coverage_on_test,loss_value,total_branches,feasible,config_digest\n";
    for (const auto& r : rows) {
        out += r.method + ',' + r.kind + ',' + std::to_string(r.m) + ',' + r.strategy + ',' + format_double(r.max_set_size) +
               ',' + format_double(r.coverage) + ',' + (r.loss ? format_double(*r.loss) : "") + ',' +
               std::to_string(r.total_branches) + ',' + (r.feasible ? "true" : "false") + ',' + r.config_digest + '\n';
    }
    return out;
}

}  // namespace

ExperimentReport cmd_report(const PipelineConfig& cfg) {
    ExperimentReport rep;
    rep.config_digest = digest_hex(cfg.digest());
    rep.seed = cfg.seed;
    const auto names = method_names(cfg);
    if (names.empty()) throw ConfigError("report: no methods configured");
    for (const auto& name : names) rep.rows.push_back(make_row(cfg, name, name));
    for (const auto& name : cfg.verify.merge_sweep_methods) {
        for (MergeStrategy s : {MergeStrategy::NoMerge, MergeStrategy::OppMerge, MergeStrategy::GreedyMerge}) {
            rep.merge_rows.push_back(make_row(cfg, name, "merge_" + name + "_" + to_string(s)));
        }
    }
    for (const auto& r : rep.rows) {
        if (r.config_digest != rep.config_digest) {
            throw ConfigError("report: artifact for " + r.method + " was produced by a different config; rerun the pipeline");
        }
    }

    // Per-step comparison of each state-based tube against the baseline.
    if (cfg.baseline) {
        const TubeSummary base = tube_from_json(read_file(tube_path(cfg, "baseline", ".json")));
        for (const auto& name : names) {
            if (name == "baseline") continue;
            const TubeSummary t = tube_from_json(read_file(tube_path(cfg, name, ".json")));
            std::string csv = "k,state_pos_width,baseline_pos_width,state_tighter_than_baseline\n";
            const std::size_t n = std::min(t.per_step.size(), base.per_step.size());
            for (std::size_t k = 0; k < n; ++k) {
                csv += std::to_string(k) + ',' + format_double(t.per_step[k].pos_width) + ',' +
                       format_double(base.per_step[k].pos_width) + ',' +
                       (t.per_step[k].pos_width < base.per_step[k].pos_width ? "true" : "false") + '\n';
            }
            write_file_atomic(cfg.out_dir / "report" / (name + "_vs_baseline.csv"), csv);
        }
    }

    json rows = json::array();
    for (const auto& r : rep.rows) rows.push_back(row_json(r));
    json merge_rows = json::array();
    for (const auto& r : rep.merge_rows) merge_rows.push_back(row_json(r));
    const json j = {{"rows", rows},
                    {"merge_rows", merge_rows},
                    {"provenance", {{"config_digest", rep.config_digest}, {"seed", cfg.seed}, {"version", rep.version},
                                    {"paper_scale", cfg.paper_scale}}}};
    const std::string text = j.dump(1) + "\n";
    rep.digest = digest_hex(fnv_file(text));
    write_file_atomic(cfg.out_dir / "report" / "report.json", text);
    write_file_atomic(cfg.out_dir / "report" / "report.csv", rows_csv(rep.rows));
    if (!rep.merge_rows.empty()) write_file_atomic(cfg.out_dir / "report" / "merge.csv", rows_csv(rep.merge_rows));
    std::string table = text_table(rep.rows);
    if (!rep.merge_rows.empty()) table += "\nmerge strategies\n" + text_table(rep.merge_rows);
    table += "\nconfig " + rep.config_digest + "  seed " + std::to_string(cfg.seed) + "  report " + rep.digest + "\n";
    write_file_atomic(cfg.out_dir / "report" / "report.txt", table);
    write_file_atomic(cfg.out_dir / "report" / "report.digest", rep.digest + "\n");
    return rep;
}

}  // namespace confreach
