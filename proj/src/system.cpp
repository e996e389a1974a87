// SPDX-License-Identifier: Apache-2.0
#include "confreach/system.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "confreach/kernels/kernels.hpp"
#include "confreach/parallel.hpp"

namespace confreach {

using nlohmann::json;

void MountainCarParams::validate() const {
    if (!(power > 0 && gravity > 0 && frequency > 0)) throw ConfigError("mountain car: power, gravity and frequency must be positive");
    if (!position_bounds.valid() || !velocity_bounds.valid()) throw ConfigError("mountain car: invalid state bounds");
    if (!position_bounds.contains(goal_position)) throw ConfigError("mountain car: goal outside position bounds");
}

State dynamics_step(const State& s, double control, const MountainCarParams& params) {
    if (!(control >= -1.0 && control <= 1.0)) {
        throw InputError("dynamics_step: control " + std::to_string(control) + " outside [-1, 1]");
    }
    const auto& pb = params.position_bounds;
    const auto& vb = params.velocity_bounds;
    double v = (s.velocity + params.power * control) + (-params.gravity) * std::cos(params.frequency * s.position);
    v = std::clamp(v, vb.lo, vb.hi);
    double p = s.position + (params.gym_ordering ? v : s.velocity);
    p = std::clamp(p, pb.lo, pb.hi);
    if (p <= pb.lo && v < 0.0) v = 0.0;
    return {p, v};
}

BoxSet dynamics_step_interval(const BoxSet& box, const Interval& control, const MountainCarParams& params) {
    const Rounding r = params.rounding;
    const auto& pb = params.position_bounds;
    const Interval thrust = interval_scale(control, params.power, r);
    const Interval slope = interval_scale(interval_cos(interval_scale(box.position, params.frequency, r), r),
                                          -params.gravity, r);
    Interval v = interval_clamp(interval_add(interval_add(box.velocity, thrust, r), slope, r), params.velocity_bounds);
    Interval p = interval_clamp(interval_add(box.position, params.gym_ordering ? v : box.velocity, r), pb);
    if (p.lo <= pb.lo) {
        if (p.hi <= pb.lo) {
            v = {std::max(v.lo, 0.0), std::max(v.hi, 0.0)};
        } else {
            v.hi = std::max(v.hi, 0.0);
        }
    }
    return {p, v};
}

// ---------------------------------------------------------------------------

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Identity: return "id";
    }
    return "id";
}

Activation activation_from_string(const std::string& s) {
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "id" || s == "identity" || s == "linear") return Activation::Identity;
    throw ConfigError("unknown activation '" + s + "'");
}

namespace {

inline double activate(Activation a, double x) {
    switch (a) {
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Identity: return x;
    }
    return x;
}

Interval widen_if(Interval a, Rounding r) {
    if (r == Rounding::Outward) {
        a.lo = std::nextafter(a.lo, -kInf);
        a.hi = std::nextafter(a.hi, kInf);
    }
    return a;
}

}  // namespace

DenseLayer DenseLayer::from_rows(const std::vector<std::vector<double>>& w, std::vector<double> b, Activation act) {
    DenseLayer layer;
    layer.rows = w.size();
    layer.cols = w.empty() ? 0 : w.front().size();
    if (layer.rows == 0 || layer.cols == 0) throw ConfigError("dense layer: empty weight matrix");
    if (b.size() != layer.rows) throw ConfigError("dense layer: bias length does not match weight rows");
    layer.weights.assign(layer.rows * layer.cols, 0.0);
    for (std::size_t i = 0; i < layer.rows; ++i) {
        if (w[i].size() != layer.cols) throw ConfigError("dense layer: ragged weight matrix");
        for (std::size_t j = 0; j < layer.cols; ++j) layer.weights[j * layer.rows + i] = w[i][j];
    }
    layer.bias = std::move(b);
    layer.activation = act;
    return layer;
}

MlpController::MlpController(std::vector<DenseLayer> layers, double output_scale, double output_shift)
    : layers_(std::move(layers)), scale_(output_scale), shift_(output_shift) {
    if (layers_.empty()) throw ConfigError("mlp: no layers");
    std::size_t in = 2;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.cols != in) {
            throw ConfigError("mlp: layer " + std::to_string(l) + " expects " + std::to_string(layer.cols) +
                              " inputs, previous layer gives " + std::to_string(in));
        }
        if (layer.weights.size() != layer.rows * layer.cols || layer.bias.size() != layer.rows) {
            throw ConfigError("mlp: layer " + std::to_string(l) + " has inconsistent storage");
        }
        in = layer.rows;
        widest_ = std::max(widest_, layer.rows);
    }
    if (in != 1) throw ConfigError("mlp: final layer must have a single output");
    if (!std::isfinite(scale_) || !std::isfinite(shift_)) throw ConfigError("mlp: non-finite output scale/shift");
}

MlpController MlpController::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("controller weights: ") + e.what());
    }
    try {
        std::vector<DenseLayer> layers;
        for (const auto& l : j.at("layers")) {
            layers.push_back(DenseLayer::from_rows(l.at("w").get<std::vector<std::vector<double>>>(),
                                                   l.at("b").get<std::vector<double>>(),
                                                   activation_from_string(l.value("act", std::string("id")))));
        }
        return MlpController(std::move(layers), j.value("scale", 1.0), j.value("shift", 0.0));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("controller weights: ") + e.what());
    }
}

MlpController MlpController::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open controller weights '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string MlpController::to_json_text() const {
    json layers = json::array();
    for (const auto& l : layers_) {
        json w = json::array();
        for (std::size_t i = 0; i < l.rows; ++i) {
            json row = json::array();
            for (std::size_t k = 0; k < l.cols; ++k) row.push_back(l.weight(i, k));
            w.push_back(row);
        }
        layers.push_back({{"w", w}, {"b", l.bias}, {"act", to_string(l.activation)}});
    }
    return json{{"layers", layers}, {"scale", scale_}, {"shift", shift_}}.dump();
}

double MlpController::eval(double measurement, double velocity) const {
    thread_local std::vector<double> a, b;
    a.assign({measurement, velocity});
    for (const auto& layer : layers_) {
        b.resize(layer.rows);
        for (std::size_t i = 0; i < layer.rows; ++i) {
            double acc = layer.bias[i];
            for (std::size_t j = 0; j < layer.cols; ++j) acc = acc + layer.weights[j * layer.rows + i] * a[j];
            b[i] = activate(layer.activation, acc);
        }
        std::swap(a, b);
    }
    return std::clamp(scale_ * a[0] + shift_, -1.0, 1.0);
}

Interval MlpController::eval_interval(const Interval& measurement, const Interval& velocity, Rounding r) const {
    thread_local std::vector<double> lo, hi, out_lo, out_hi;
    lo.assign({measurement.lo, velocity.lo});
    hi.assign({measurement.hi, velocity.hi});
    const auto& k = kernels::active();
    for (const auto& layer : layers_) {
        out_lo.resize(layer.rows);
        out_hi.resize(layer.rows);
        k.interval_affine(layer.weights.data(), layer.bias.data(), layer.rows, layer.cols, lo.data(), hi.data(),
                          out_lo.data(), out_hi.data());
        for (std::size_t i = 0; i < layer.rows; ++i) {
            // every supported activation is monotone non-decreasing
            Interval z = widen_if({out_lo[i], out_hi[i]}, r);
            z = widen_if({activate(layer.activation, z.lo), activate(layer.activation, z.hi)}, r);
            out_lo[i] = z.lo;
            out_hi[i] = z.hi;
        }
        std::swap(lo, out_lo);
        std::swap(hi, out_hi);
    }
    const Interval scaled = interval_add(interval_scale({lo[0], hi[0]}, scale_, r), Interval::point(shift_), r);
    return interval_clamp(scaled, {-1.0, 1.0});
}

double controller_eval(const Controller& ctrl, double measurement, double velocity) {
    if (!std::isfinite(measurement) || !std::isfinite(velocity)) throw InputError("controller_eval: non-finite input");
    return std::visit(
        [&](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, EnergyController>) {
                return velocity >= 0.0 ? c.thrust : -c.thrust;
            } else {
                return c.eval(measurement, velocity);
            }
        },
        ctrl);
}

Interval controller_eval_interval(const Controller& ctrl, const Interval& measurement, const Interval& velocity,
                                  Rounding r) {
    if (!std::isfinite(measurement.lo) || !std::isfinite(measurement.hi) || !std::isfinite(velocity.lo) ||
        !std::isfinite(velocity.hi)) {
        throw InputError("controller_eval_interval: non-finite input");
    }
    return std::visit(
        [&](const auto& c) -> Interval {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, EnergyController>) {
                if (velocity.lo >= 0.0) return Interval::point(c.thrust);
                if (velocity.hi < 0.0) return Interval::point(-c.thrust);
                return {-c.thrust, c.thrust};
            } else {
                return c.eval_interval(measurement, velocity, r);
            }
        },
        ctrl);
}

// ---------------------------------------------------------------------------

std::string to_string(NoiseDistribution d) {
    return d == NoiseDistribution::Uniform ? "uniform" : "truncated_gaussian";
}

NoiseDistribution noise_distribution_from_string(const std::string& s) {
    if (s == "uniform") return NoiseDistribution::Uniform;
    if (s == "truncated_gaussian" || s == "gaussian") return NoiseDistribution::TruncatedGaussian;
    throw ConfigError("unknown noise distribution '" + s + "'");
}

NoiseProfile NoiseProfile::default_profile() {
    return {{{-1.2, 0.15}, {-0.6, 0.15}, {-0.3, 0.05}, {0.0, 0.02}, {0.6, 0.02}}, NoiseDistribution::Uniform, 0};
}

NoiseProfile NoiseProfile::constant(double amplitude, Interval range) {
    return {{{range.lo, amplitude}, {range.hi, amplitude}}, NoiseDistribution::Uniform, 0};
}

double NoiseProfile::amplitude(double position) const {
    if (breakpoints.empty()) return 0.0;
    if (position <= breakpoints.front().first) return breakpoints.front().second;
    if (position >= breakpoints.back().first) return breakpoints.back().second;
    const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), position,
                                     [](double x, const auto& bp) { return x < bp.first; });
    const auto& [x1, a1] = *it;
    const auto& [x0, a0] = *(it - 1);
    const double t = (position - x0) / (x1 - x0);
    return a0 + t * (a1 - a0);
}

void NoiseProfile::validate(const Interval& position_range) const {
    if (breakpoints.size() < 2) throw ConfigError("noise profile: need at least two breakpoints");
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        if (!(breakpoints[i].second >= 0.0) || !std::isfinite(breakpoints[i].second)) {
            throw ConfigError("noise profile: amplitudes must be finite and non-negative");
        }
        if (i > 0 && !(breakpoints[i].first > breakpoints[i - 1].first)) {
            throw ConfigError("noise profile: breakpoint positions must be strictly increasing");
        }
    }
    if (breakpoints.front().first > position_range.lo || breakpoints.back().first < position_range.hi) {
        throw ConfigError("noise profile: breakpoints must span the position range");
    }
}

double perceive(const State& s, const NoiseProfile& profile, Rng& rng) {
    double zeta = 0.0;
    if (profile.distribution == NoiseDistribution::Uniform) {
        zeta = rng.uniform(-1.0, 1.0);
    } else {
        // sigma = 1/3 puts the truncation points at three standard deviations
        do {
            zeta = rng.normal() / 3.0;
        } while (std::fabs(zeta) > 1.0);
    }
    return s.position + profile.amplitude(s.position) * zeta;
}

Trajectory simulate(const State& initial, const Controller& ctrl, const NoiseProfile& profile,
                    const MountainCarParams& params, int horizon, Rng& rng) {
    if (horizon < 0) throw InputError("simulate: negative horizon");
    Trajectory tr;
    tr.steps.reserve(static_cast<std::size_t>(horizon) + 1);
    State s = initial;
    for (int k = 0;; ++k) {
        const double y = perceive(s, profile, rng);
        const double u = controller_eval(ctrl, y, s.velocity);
        tr.steps.push_back({k, s, y, u});
        if (s.position >= params.goal_position) {
            tr.terminated_at_goal = true;
            break;
        }
        if (k >= horizon) break;
        s = dynamics_step(s, u, params);
    }
    return tr;
}

Dataset generate_dataset(std::size_t n, const Interval& initial_set, const Controller& ctrl,
                         const NoiseProfile& profile, const MountainCarParams& params, int horizon,
                         std::uint64_t seed) {
    if (n < 1) throw InputError("generate_dataset: n must be >= 1");
    if (!initial_set.valid()) throw InputError("generate_dataset: invalid initial set");
    Dataset ds;
    ds.horizon = horizon;
    ds.seed = seed;
    ds.trajectories.resize(n);
    parallel_for(n, default_threads(), [&](std::size_t i) {
        Rng init(derive_seed(seed, "initial", i));
        Rng noise(derive_seed(derive_seed(seed, "noise", i), "profile", profile.seed));
        const State s0{init.uniform(initial_set.lo, initial_set.hi), 0.0};
        ds.trajectories[i] = simulate(s0, ctrl, profile, params, horizon, noise);
    });
    return ds;
}

}  // namespace confreach
