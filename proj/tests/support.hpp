// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "confreach/conformal.hpp"
#include "confreach/core.hpp"
#include "confreach/partition.hpp"
#include "confreach/rng.hpp"
#include "confreach/system.hpp"

namespace testing_support {

using namespace confreach;

inline Interval random_interval(Rng& rng, double lo, double hi, double max_width) {
    const double a = rng.uniform(lo, hi);
    const double w = rng.uniform(0.0, max_width);
    return {a, a + w};
}

inline double sample(Rng& rng, const Interval& a) { return rng.uniform01() < 0.02 ? a.hi : rng.uniform(a.lo, a.hi); }

// One trajectory per entry: (position, error, time) triples with the given
// positions; velocity and control are irrelevant to the statistics.
inline Trajectory make_trajectory(const std::vector<double>& positions, const std::vector<double>& errors) {
    Trajectory tr;
    for (std::size_t k = 0; k < positions.size(); ++k) {
        Step s;
        s.time = static_cast<int>(k);
        s.state = {positions[k], 0.0};
        s.measurement = positions[k] + errors[k];
        tr.steps.push_back(s);
    }
    return tr;
}

// Random-walk positions in [-1.2, 0.6] with error amplitude amp(p) * U(-1, 1).
template <class Amp>
Dataset synthetic_dataset(std::size_t n, int horizon, std::uint64_t seed, Amp amp) {
    Dataset ds;
    ds.horizon = horizon;
    ds.seed = seed;
    Rng rng(seed);
    for (std::size_t j = 0; j < n; ++j) {
        const int len = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(horizon) + 1));
        double p = rng.uniform(-1.2, 0.6);
        std::vector<double> pos, err;
        for (int k = 0; k < len; ++k) {
            pos.push_back(p);
            err.push_back(amp(p) * rng.uniform(-1.0, 1.0));
            p = std::clamp(p + rng.uniform(-0.08, 0.08), -1.2, 0.6);
        }
        ds.trajectories.push_back(make_trajectory(pos, err));
    }
    return ds;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("confreach_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline MlpController default_controller() {
    return MlpController::load(std::string(CONFREACH_SOURCE_DIR) + "/data/controller.json");
}

inline MlpController random_mlp(Rng& rng, std::vector<std::size_t> widths, Activation hidden, Activation out) {
    std::vector<DenseLayer> layers;
    std::size_t in = 2;
    widths.push_back(1);
    for (std::size_t l = 0; l < widths.size(); ++l) {
        std::vector<std::vector<double>> w(widths[l], std::vector<double>(in));
        std::vector<double> b(widths[l]);
        for (auto& row : w) {
            for (double& x : row) x = rng.uniform(-2.0, 2.0);
        }
        for (double& x : b) x = rng.uniform(-1.0, 1.0);
        layers.push_back(DenseLayer::from_rows(w, b, l + 1 == widths.size() ? out : hidden));
        in = widths[l];
    }
    return MlpController(std::move(layers));
}


// Noise amplitude hi left of `step`, lo to the right.
inline Dataset step_dataset(std::size_t n, int horizon, std::uint64_t seed, double step = -0.3, double hi = 0.2,
                            double lo = 0.02) {
    return synthetic_dataset(n, horizon, seed, [=](double p) { return p < step ? hi : lo; });
}

struct SweepResult {
    double edge;
    double loss;
};

// Exhaustive 2-region search over edges on a 0.01 grid; bounds are fitted
// on `fit` and the loss is scored on `reg`.
inline SweepResult edge_sweep(const Dataset& reg, const Dataset& fit, const LossSpec& loss, double alpha) {
    const VisitTable rv = VisitTable::build(reg);
    const VisitTable cv = VisitTable::build(fit);
    SweepResult best{0.0, kInf};
    for (int i = -119; i <= 59; ++i) {
        Partition p;
        p.edges = {i / 100.0};
        const double l = evaluate_loss(rv, p, fit_eta(cv, p, alpha), loss);
        if (l < best.loss) best = {i / 100.0, l};
    }
    return best;
}

// Small end-to-end config that runs in a few seconds.
inline std::string small_config_json(const std::filesystem::path& out, std::uint64_t seed = 7) {
    return R"({
  "system": {"controller": {"type": "mlp", "path": ")" +
           std::string(CONFREACH_SOURCE_DIR) + R"(/data/controller.json"}},
  "horizon": 30,
  "data": {"n_total": 120},
  "partition": {
    "uniform_m": [1, 2],
    "optimized": [{"optimizer": "GA", "loss": "ETDL", "m": [2]}, {"optimizer": "SA", "loss": "EL", "m": [2]}],
    "ga": {"budget": 40, "population": 8},
    "sa": {"budget": 40}
  },
  "verify": {"subdivisions": 3, "merge_sweep": {"methods": ["uniform_m2"], "subdivisions": 2, "horizon": 10}},
  "out": ")" + out.string() + R"(",
  "seed": )" + std::to_string(seed) + "\n}\n";
}

}  // namespace testing_support
