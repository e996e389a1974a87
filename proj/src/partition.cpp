// SPDX-License-Identifier: Apache-2.0
#include "confreach/partition.hpp"

#include <algorithm>
#include <cmath>

#include "confreach/kernels/kernels.hpp"
#include "confreach/parallel.hpp"
#include "confreach/rng.hpp"

namespace confreach {

namespace {

struct RegionTotals {
    std::vector<double> counts;
    std::vector<double> decayed;
    double total = 0.0;
};

RegionTotals region_totals(const VisitTable& visits, const Partition& partition, const double* decay) {
    const std::size_t m = partition.size();
    const auto idx = visits.regions(partition);
    RegionTotals out{std::vector<double>(m, 0.0), {}, static_cast<double>(visits.visits())};
    std::vector<std::size_t> counts(m, 0);
    for (std::int32_t r : idx) ++counts[static_cast<std::size_t>(r)];
    for (std::size_t i = 0; i < m; ++i) out.counts[i] = static_cast<double>(counts[i]);
    if (decay != nullptr) {
        std::int32_t t_max = 0;
        for (std::int32_t t : visits.time) t_max = std::max(t_max, t);
        std::vector<double> table(static_cast<std::size_t>(t_max) + 1);
        for (std::size_t t = 0; t < table.size(); ++t) table[t] = std::pow(*decay, static_cast<double>(t));
        std::vector<double> w(visits.visits());
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = table[static_cast<std::size_t>(visits.time[k])];
        out.decayed.assign(m, 0.0);
        kernels::region_sums(idx, w, out.decayed);
    }
    return out;
}

double weighted_loss(const RegionTotals& totals, const std::vector<double>& mass, const EtaFunction& eta) {
    if (eta.bounds.size() != totals.counts.size()) throw InputError("loss: eta was fitted on a different partition");
    if (totals.total == 0.0) return 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < totals.counts.size(); ++i) {
        if (totals.counts[i] == 0.0) continue;
        const double w = totals.counts[i] / totals.total;
        loss += w * mass[i] * eta.bounds[i];
    }
    return loss;
}

}  // namespace

std::vector<double> experience_weights(const VisitTable& visits, const Partition& partition) {
    if (visits.visits() == 0) throw InputError("experience_weights: empty dataset");
    const auto totals = region_totals(visits, partition, nullptr);
    std::vector<double> w(totals.counts.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = totals.counts[i] / totals.total;
    return w;
}

std::vector<double> experience_weights(const Dataset& ds, const Partition& partition) {
    return experience_weights(VisitTable::build(ds, partition.dimension), partition);
}

double loss_el(const VisitTable& visits, const Partition& partition, const EtaFunction& eta) {
    const auto totals = region_totals(visits, partition, nullptr);
    return weighted_loss(totals, totals.counts, eta);
}

double loss_el(const Dataset& ds, const Partition& partition, const EtaFunction& eta) {
    return loss_el(VisitTable::build(ds, partition.dimension), partition, eta);
}

double loss_etdl(const VisitTable& visits, const Partition& partition, const EtaFunction& eta, double decay) {
    if (!(decay > 0.0 && decay <= 1.0)) throw InputError("loss_etdl: decay must lie in (0, 1]");
    const auto totals = region_totals(visits, partition, &decay);
    return weighted_loss(totals, totals.decayed, eta);
}

double loss_etdl(const Dataset& ds, const Partition& partition, const EtaFunction& eta, double decay) {
    return loss_etdl(VisitTable::build(ds, partition.dimension), partition, eta, decay);
}

void LossSpec::validate() const {
    if (!(decay_base > 0.0 && decay_base <= 1.0)) throw ConfigError("loss: decay_base must lie in (0, 1]");
}

std::string to_string(LossKind k) { return k == LossKind::EL ? "EL" : "ETDL"; }

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "EL" || s == "el") return LossKind::EL;
    if (s == "ETDL" || s == "etdl") return LossKind::ETDL;
    throw ConfigError("unknown loss '" + s + "'");
}

double evaluate_loss(const VisitTable& visits, const Partition& partition, const EtaFunction& eta,
                     const LossSpec& loss) {
    return loss.kind == LossKind::EL ? loss_el(visits, partition, eta)
                                     : loss_etdl(visits, partition, eta, loss.decay_base);
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::GA ? "GA" : "SA"; }

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "GA" || s == "ga") return OptimizerKind::GA;
    if (s == "SA" || s == "sa") return OptimizerKind::SA;
    throw ConfigError("unknown optimizer '" + s + "'");
}

std::string to_string(SearchFit f) { return f == SearchFit::Reg ? "reg" : "conf"; }

SearchFit search_fit_from_string(const std::string& s) {
    if (s == "reg") return SearchFit::Reg;
    if (s == "conf") return SearchFit::Conf;
    throw ConfigError("unknown search_fit '" + s + "'");
}

void OptimizerSpec::validate() const {
    if (budget < 1) throw ConfigError("optimizer: budget must be >= 1");
    if (kind == OptimizerKind::GA && population < 2) throw ConfigError("optimizer: GA population must be >= 2");
    if (kind == OptimizerKind::GA && tournament < 1) throw ConfigError("optimizer: tournament size must be >= 1");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ConfigError("optimizer: mutation_rate must lie in [0, 1]");
    if (!(cooling_rate > 0.0 && cooling_rate < 1.0)) throw ConfigError("optimizer: cooling_rate must lie in (0, 1)");
    if (!(step_fraction > 0.0)) throw ConfigError("optimizer: step_fraction must be positive");
    if (!(min_width > 0.0)) throw ConfigError("optimizer: min_width must be positive");
}

std::vector<double> repair_edges(std::vector<double> edges, const Interval& range, double min_width) {
    const double lo = range.lo;
    const double hi = range.hi;
    if (static_cast<double>(edges.size() + 1) * min_width > range.width()) {
        throw InputError("partition: range too narrow for the requested number of regions");
    }
    for (double& e : edges) {
        if (std::isnan(e)) e = 0.5 * (lo + hi);
        for (int guard = 0; guard < 64 && (e < lo || e > hi); ++guard) e = e < lo ? 2.0 * lo - e : 2.0 * hi - e;
        e = std::clamp(e, lo, hi);
    }
    std::sort(edges.begin(), edges.end());
    const std::size_t n = edges.size();
    for (std::size_t i = 0; i < n; ++i) edges[i] = std::max(edges[i], (i == 0 ? lo : edges[i - 1]) + min_width);
    for (std::size_t i = n; i-- > 0;) edges[i] = std::min(edges[i], (i + 1 == n ? hi : edges[i + 1]) - min_width);
    return edges;
}

namespace {

class Evaluator {
public:
    Evaluator(const Dataset& reg, const Dataset& conf, const LossSpec& loss, double alpha, const Interval& range,
              double min_width, SearchFit fit)
        : reg_(VisitTable::build(reg)), conf_(VisitTable::build(conf)), loss_(loss), alpha_(alpha),
          range_(range), min_width_(min_width), fit_(fit) {}

    Partition partition(const std::vector<double>& edges) const {
        Partition p;
        p.range = range_;
        p.edges = edges;
        p.validate(min_width_ * 0.5);
        return p;
    }

    double operator()(const std::vector<double>& edges) const {
        const Partition p = partition(edges);
        return evaluate_loss(reg_, p, fit_eta(fit_ == SearchFit::Reg ? reg_ : conf_, p, alpha_), loss_);
    }

    EtaFunction eta(const std::vector<double>& edges) const { return fit_eta(conf_, partition(edges), alpha_); }
    double loss_of(const EtaFunction& eta) const { return evaluate_loss(reg_, eta.partition, eta, loss_); }

private:
    VisitTable reg_;
    VisitTable conf_;
    LossSpec loss_;
    double alpha_;
    Interval range_;
    double min_width_;
    SearchFit fit_;
};

struct Tracker {
    std::vector<double> best_edges;
    double best = kInf;
    bool any = false;
    OptimizeResult* result;

    void record(const std::vector<double>& edges, double loss) {
        result->evaluations.push_back(loss);
        if (!any || loss < best) {
            best = loss;
            best_edges = edges;
            any = true;
        }
        result->history.push_back(best);
    }
};

// Infinite losses compare equal to each other and lose to any finite loss.
bool better(double a, double b) { return a < b; }

void run_ga(const Evaluator& eval, std::size_t m, const OptimizerSpec& opt, const Interval& range, Tracker& tr) {
    Rng rng(derive_seed(opt.seed, "ga"));
    const double sigma = opt.step_fraction * range.width();
    const unsigned threads = opt.threads ? opt.threads : default_threads();

    auto evaluate = [&](const std::vector<std::vector<double>>& cands) {
        std::vector<double> losses(cands.size());
        parallel_for(cands.size(), threads, [&](std::size_t i) { losses[i] = eval(cands[i]); });
        for (std::size_t i = 0; i < cands.size(); ++i) tr.record(cands[i], losses[i]);
        return losses;
    };

    std::vector<std::vector<double>> pop;
    pop.push_back(uniform_partition(m, range).edges);
    while (pop.size() < std::min(opt.population, opt.budget)) {
        std::vector<double> e(m - 1);
        for (double& x : e) x = rng.uniform(range.lo, range.hi);
        pop.push_back(repair_edges(std::move(e), range, opt.min_width));
    }
    std::vector<double> fitness = evaluate(pop);
    std::size_t used = pop.size();

    auto tournament = [&]() -> std::size_t {
        std::size_t best = rng.index(pop.size());
        for (std::size_t k = 1; k < opt.tournament; ++k) {
            const std::size_t c = rng.index(pop.size());
            if (better(fitness[c], fitness[best]) || (fitness[c] == fitness[best] && c < best)) best = c;
        }
        return best;
    };

    while (used < opt.budget) {
        std::size_t elite = 0;
        for (std::size_t i = 1; i < pop.size(); ++i) {
            if (better(fitness[i], fitness[elite])) elite = i;
        }
        const std::size_t n_children = std::min(opt.population - 1, opt.budget - used);
        std::vector<std::vector<double>> children;
        children.reserve(n_children);
        for (std::size_t c = 0; c < n_children; ++c) {
            const auto& a = pop[tournament()];
            const auto& b = pop[tournament()];
            std::vector<double> child(m - 1);
            for (std::size_t k = 0; k + 1 < m; ++k) child[k] = rng.uniform01() < 0.5 ? a[k] : b[k];
            std::sort(child.begin(), child.end());
            for (double& x : child) {
                if (rng.uniform01() < opt.mutation_rate) x += sigma * rng.normal();
            }
            children.push_back(repair_edges(std::move(child), range, opt.min_width));
        }
        const auto child_fitness = evaluate(children);
        used += children.size();
        std::vector<std::vector<double>> next{pop[elite]};
        std::vector<double> next_fitness{fitness[elite]};
        for (std::size_t c = 0; c < children.size(); ++c) {
            next.push_back(std::move(children[c]));
            next_fitness.push_back(child_fitness[c]);
        }
        pop = std::move(next);
        fitness = std::move(next_fitness);
    }
}

void run_sa(const Evaluator& eval, std::size_t m, const OptimizerSpec& opt, const Interval& range, Tracker& tr) {
    Rng rng(derive_seed(opt.seed, "sa"));
    const double sigma = opt.step_fraction * range.width();
    std::vector<double> current = uniform_partition(m, range).edges;
    double current_loss = eval(current);
    tr.record(current, current_loss);
    double temperature = opt.initial_temperature > 0.0 ? opt.initial_temperature
                         : (std::isfinite(current_loss) && current_loss > 0.0) ? current_loss
                                                                               : 1.0;
    for (std::size_t it = 1; it < opt.budget; ++it) {
        std::vector<double> proposal = current;
        proposal[rng.index(m - 1)] += sigma * rng.normal();
        proposal = repair_edges(std::move(proposal), range, opt.min_width);
        const double loss = eval(proposal);
        tr.record(proposal, loss);
        const double u = rng.uniform01();
        bool accept;
        if (std::isinf(loss) || std::isinf(current_loss)) {
            accept = std::isinf(current_loss);
        } else {
            accept = loss <= current_loss || u < std::exp(-(loss - current_loss) / temperature);
        }
        if (accept) {
            current = std::move(proposal);
            current_loss = loss;
        }
        temperature *= opt.cooling_rate;
    }
}

}  // namespace

OptimizeResult optimize_partition(const Dataset& data_reg, const Dataset& data_conf, std::size_t m,
                                  const LossSpec& loss, const OptimizerSpec& opt, double alpha,
                                  const Interval& range) {
    if (m < 1) throw InputError("optimize_partition: m must be >= 1");
    if (data_reg.size() == 0 || data_conf.size() == 0) throw InputError("optimize_partition: empty dataset");
    loss.validate();
    opt.validate();
    const Evaluator eval(data_reg, data_conf, loss, alpha, range, opt.min_width, opt.search_fit);
    OptimizeResult result;
    Tracker tr{{}, kInf, false, &result};
    if (m == 1) {
        tr.record({}, eval({}));
    } else if (opt.kind == OptimizerKind::GA) {
        run_ga(eval, m, opt, range, tr);
    } else {
        run_sa(eval, m, opt, range, tr);
    }
    result.partition = eval.partition(tr.best_edges);
    result.eta = eval.eta(tr.best_edges);
    result.loss = tr.best;
    result.final_loss = eval.loss_of(result.eta);
    if (std::isinf(tr.best)) result.status = "no_finite_candidate";
    return result;
}

}  // namespace confreach
