// SPDX-License-Identifier: Apache-2.0
#include "confreach/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "confreach/kernels/kernels.hpp"

namespace confreach {

using nlohmann::json;

std::size_t conformal_rank(std::size_t n, double level) {
    const double x = static_cast<double>(n + 1) * level;
    return static_cast<std::size_t>(std::ceil(x - 1e-12 * x));
}

double conformal_quantile(std::span<const double> scores, double level) {
    if (scores.empty()) throw InputError("conformal_quantile: empty score set");
    if (!(level > 0.0 && level < 1.0)) throw InputError("conformal_quantile: level must lie in (0, 1)");
    for (double s : scores) {
        if (std::isnan(s)) throw InputError("conformal_quantile: NaN score");
    }
    const std::size_t r = std::max<std::size_t>(conformal_rank(scores.size(), level), 1);
    if (r > scores.size()) return kInf;
    std::vector<double> z(scores.begin(), scores.end());
    std::nth_element(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(r - 1), z.end());
    return z[r - 1];
}

VisitTable VisitTable::build(const Dataset& ds, Dimension dim) {
    VisitTable t;
    t.dimension = dim;
    const std::size_t n = ds.visit_count();
    t.coord.reserve(n);
    t.time.reserve(n);
    std::vector<double> y, p;
    y.reserve(n);
    p.reserve(n);
    t.offsets.reserve(ds.size() + 1);
    t.offsets.push_back(0);
    for (const auto& tr : ds.trajectories) {
        for (const auto& s : tr.steps) {
            const double c = dim == Dimension::Position ? s.state.position : s.state.velocity;
            t.coord.push_back(c);
            t.coord_min = std::min(t.coord_min, c);
            t.coord_max = std::max(t.coord_max, c);
            t.time.push_back(s.time);
            y.push_back(s.measurement);
            p.push_back(s.state.position);
        }
        t.offsets.push_back(t.coord.size());
    }
    t.error.resize(n);
    kernels::abs_error(y, p, t.error);
    return t;
}

std::vector<std::int32_t> VisitTable::regions(const Partition& partition) const {
    if (partition.dimension != dimension) throw InputError("visit table and partition use different dimensions");
    if (visits() > 0 && (coord_min < partition.range.lo || coord_max > partition.range.hi)) {
        throw CoverageError("a visited state lies outside the partition range " + to_string(partition.range));
    }
    std::vector<std::int32_t> idx(visits());
    kernels::bin_positions(coord, partition.edges, idx);
    return idx;
}

std::vector<ScoreSet> region_scores(const VisitTable& visits, const Partition& partition) {
    const std::size_t m = partition.size();
    const auto idx = visits.regions(partition);
    std::vector<ScoreSet> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        out[i].region_index = i;
        out[i].scores.reserve(visits.trajectories() + 1);
    }
    std::vector<double> best(m);
    const auto& k = kernels::active();
    for (std::size_t j = 0; j < visits.trajectories(); ++j) {
        const std::size_t a = visits.offsets[j];
        const std::size_t b = visits.offsets[j + 1];
        std::fill(best.begin(), best.end(), -kInf);
        k.region_max(idx.data() + a, visits.error.data() + a, b - a, static_cast<std::int32_t>(m), best.data());
        for (std::size_t i = 0; i < m; ++i) {
            if (best[i] != -kInf) out[i].scores.push_back(best[i]);
        }
    }
    for (auto& s : out) s.scores.push_back(kInf);
    return out;
}

ScoreSet subtrajectory_scores(const Dataset& ds, const Partition& partition, std::size_t region) {
    if (region >= partition.size()) throw InputError("subtrajectory_scores: region index out of range");
    auto all = region_scores(VisitTable::build(ds, partition.dimension), partition);
    return std::move(all[region]);
}

double EtaFunction::operator()(const State& s) const {
    const int i = partition.region_of(s);
    if (i < 0) throw CoverageError("state outside every region of the partition");
    return bounds[static_cast<std::size_t>(i)];
}

double eta_eval(const EtaFunction& eta, const State& s) { return eta(s); }

EtaFunction fit_eta(const VisitTable& visits, const Partition& partition, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("fit_eta: alpha must lie in (0, 1)");
    partition.validate();
    const auto scores = region_scores(visits, partition);
    const double level = 1.0 - alpha / static_cast<double>(partition.size());
    EtaFunction eta{partition, {}, alpha};
    eta.bounds.reserve(scores.size());
    for (const auto& s : scores) {
        const auto finite = s.finite();
        eta.bounds.push_back(finite.empty() ? kInf : conformal_quantile(finite, level));
    }
    return eta;
}

EtaFunction fit_eta(const Dataset& ds, const Partition& partition, double alpha) {
    return fit_eta(VisitTable::build(ds, partition.dimension), partition, alpha);
}

double TimeBoundFunction::operator()(int k) const {
    if (k < 0 || k >= static_cast<int>(per_step_bounds.size())) {
        throw InputError("time bound queried at step " + std::to_string(k) + " beyond its horizon");
    }
    return per_step_bounds[static_cast<std::size_t>(k)];
}

TimeBoundFunction fit_time_baseline(const Dataset& dataset_alpha, const Dataset& dataset_conf, double alpha,
                                    int horizon) {
    if (dataset_alpha.size() == 0 || dataset_conf.size() == 0) throw InputError("fit_time_baseline: empty dataset");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("fit_time_baseline: alpha must lie in (0, 1)");
    if (horizon < 0 || dataset_alpha.horizon != horizon || dataset_conf.horizon != horizon) {
        throw InputError("fit_time_baseline: dataset horizon does not match " + std::to_string(horizon));
    }
    const auto T = static_cast<std::size_t>(horizon);
    std::vector<double> m(T + 1, -kInf);
    for (const auto& tr : dataset_alpha.trajectories) {
        for (const auto& s : tr.steps) {
            if (static_cast<std::size_t>(s.time) > T) throw InputError("fit_time_baseline: trajectory exceeds horizon");
            m[static_cast<std::size_t>(s.time)] = std::max(m[static_cast<std::size_t>(s.time)], s.abs_error());
        }
    }
    for (std::size_t t = 0; t <= T; ++t) {
        if (m[t] == -kInf) m[t] = t > 0 ? m[t - 1] : kNormalizerFloor;
        m[t] = std::max(m[t], kNormalizerFloor);
    }
    std::vector<double> r;
    r.reserve(dataset_conf.size());
    for (const auto& tr : dataset_conf.trajectories) {
        double score = 0.0;
        for (const auto& s : tr.steps) {
            if (static_cast<std::size_t>(s.time) > T) throw InputError("fit_time_baseline: trajectory exceeds horizon");
            score = std::max(score, s.abs_error() / m[static_cast<std::size_t>(s.time)]);
        }
        r.push_back(score);
    }
    const double q = conformal_quantile(r, 1.0 - alpha);
    TimeBoundFunction out{{}, alpha};
    out.per_step_bounds.reserve(T + 1);
    for (double mt : m) out.per_step_bounds.push_back(std::isinf(q) ? kInf : q * mt);
    return out;
}

double validate_coverage(const EtaFunction& eta, const Dataset& test) {
    if (test.size() == 0) return 1.0;
    std::size_t ok = 0;
    for (const auto& tr : test.trajectories) {
        bool covered = true;
        for (const auto& s : tr.steps) {
            if (!(s.abs_error() <= eta(s.state))) {
                covered = false;
                break;
            }
        }
        ok += covered ? 1 : 0;
    }
    return static_cast<double>(ok) / static_cast<double>(test.size());
}

double validate_coverage(const TimeBoundFunction& bound, const Dataset& test) {
    if (test.size() == 0) return 1.0;
    std::size_t ok = 0;
    for (const auto& tr : test.trajectories) {
        bool covered = true;
        for (const auto& s : tr.steps) {
            if (!(s.abs_error() <= bound(s.time))) {
                covered = false;
                break;
            }
        }
        ok += covered ? 1 : 0;
    }
    return static_cast<double>(ok) / static_cast<double>(test.size());
}

double validate_coverage(const BoundFunction& bound, const Dataset& test) {
    return std::visit([&](const auto& b) { return validate_coverage(b, test); }, bound);
}

namespace {

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double number_or_inf(const json& j) { return j.is_null() ? kInf : j.get<double>(); }

json interval_json(const Interval& a) { return json::array({number_or_null(a.lo), number_or_null(a.hi)}); }

}  // namespace

std::string bound_to_json(const BoundFunction& bound) {
    json j;
    if (const auto* eta = std::get_if<EtaFunction>(&bound)) {
        j["type"] = "state";
        j["alpha"] = eta->alpha;
        json regions = json::array();
        for (std::size_t i = 0; i < eta->partition.size(); ++i) {
            const BoxSet b = eta->partition.region_box(i);
            regions.push_back({{"p", interval_json(b.position)}, {"v", interval_json(b.velocity)}});
        }
        j["partition"] = regions;
        j["dimension"] = to_string(eta->partition.dimension);
        j["range"] = interval_json(eta->partition.range);
        j["edges"] = eta->partition.edges;
        json bounds = json::array();
        for (double e : eta->bounds) bounds.push_back(number_or_null(e));
        j["bounds"] = bounds;
    } else {
        const auto& tb = std::get<TimeBoundFunction>(bound);
        j["type"] = "time";
        j["alpha"] = tb.alpha;
        json bounds = json::array();
        for (double e : tb.per_step_bounds) bounds.push_back(number_or_null(e));
        j["bounds"] = bounds;
    }
    return j.dump();
}

BoundFunction bound_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed bound file: ") + e.what());
    }
    try {
        const auto type = j.at("type").get<std::string>();
        const double alpha = j.at("alpha").get<double>();
        std::vector<double> bounds;
        for (const auto& b : j.at("bounds")) bounds.push_back(number_or_inf(b));
        for (double b : bounds) {
            if (!(b >= 0.0)) throw ConfigError("bound file: bounds must be non-negative");
        }
        if (type == "time") {
            if (bounds.empty()) throw ConfigError("bound file: empty time bounds");
            return TimeBoundFunction{std::move(bounds), alpha};
        }
        if (type != "state") throw ConfigError("bound file: unknown type '" + type + "'");
        Partition p;
        p.dimension = dimension_from_string(j.value("dimension", std::string("position")));
        const auto& range = j.at("range");
        p.range = make_interval(range.at(0).get<double>(), range.at(1).get<double>());
        p.edges = j.at("edges").get<std::vector<double>>();
        p.validate();
        if (bounds.size() != p.size()) throw ConfigError("bound file: bounds length does not match the partition");
        return EtaFunction{std::move(p), std::move(bounds), alpha};
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bound file: ") + e.what());
    }
}

}  // namespace confreach
