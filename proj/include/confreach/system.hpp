// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "confreach/core.hpp"
#include "confreach/rng.hpp"

namespace confreach {

struct MountainCarParams {
    double power = 0.0015;
    double gravity = 0.0025;
    double frequency = 3.0;
    double goal_position = 0.45;
    Interval position_bounds{-1.2, 0.6};
    Interval velocity_bounds{-0.07, 0.07};
    // Position update uses the freshly updated velocity (classic gym
    // simulator) instead of the previous one.
    bool gym_ordering = false;
    Rounding rounding = Rounding::Nearest;

    void validate() const;
};

// p' = p + v (or v' when gym_ordering), v' = v + power*u - gravity*cos(frequency*p),
// both clamped; velocity is zeroed when the car is pinned against the left wall.
State dynamics_step(const State& s, double control, const MountainCarParams& params);

// Sound enclosure of dynamics_step over every state in `box` and control in `control`.
BoxSet dynamics_step_interval(const BoxSet& box, const Interval& control, const MountainCarParams& params);

// ---------------------------------------------------------------------------
// Controllers
// ---------------------------------------------------------------------------

enum class Activation { Sigmoid, Tanh, Relu, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
    std::size_t rows = 0;  // outputs
    std::size_t cols = 0;  // inputs
    std::vector<double> weights;  // column-major rows x cols
    std::vector<double> bias;
    Activation activation = Activation::Identity;

    // Row-major [out][in] nested vector, the layout used in weight files.
    static DenseLayer from_rows(const std::vector<std::vector<double>>& w, std::vector<double> b, Activation act);
    double weight(std::size_t out, std::size_t in) const { return weights[in * rows + out]; }
};

// Feed-forward network mapping (measured position, velocity) to a control,
// followed by u = clamp(scale * out + shift, -1, 1).
class MlpController {
public:
    MlpController(std::vector<DenseLayer> layers, double output_scale = 1.0, double output_shift = 0.0);

    static MlpController from_json_text(const std::string& text);
    static MlpController load(const std::string& path);
    std::string to_json_text() const;

    double eval(double measurement, double velocity) const;
    Interval eval_interval(const Interval& measurement, const Interval& velocity,
                           Rounding r = Rounding::Nearest) const;

    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    double output_scale() const noexcept { return scale_; }
    double output_shift() const noexcept { return shift_; }

private:
    std::vector<DenseLayer> layers_;
    double scale_;
    double shift_;
    std::size_t widest_ = 0;
};

// Bang-bang energy pumping: push along the current velocity, toward the goal when at rest.
struct EnergyController {
    double thrust = 1.0;
};

using Controller = std::variant<MlpController, EnergyController>;

double controller_eval(const Controller& ctrl, double measurement, double velocity);
Interval controller_eval_interval(const Controller& ctrl, const Interval& measurement, const Interval& velocity,
                                  Rounding r = Rounding::Nearest);

// ---------------------------------------------------------------------------
// Perception noise
// ---------------------------------------------------------------------------

enum class NoiseDistribution { Uniform, TruncatedGaussian };

std::string to_string(NoiseDistribution d);
NoiseDistribution noise_distribution_from_string(const std::string& s);

struct NoiseProfile {
    // (position, amplitude) pairs, linearly interpolated, constant beyond the ends.
    std::vector<std::pair<double, double>> breakpoints;
    NoiseDistribution distribution = NoiseDistribution::Uniform;
    std::uint64_t seed = 0;

    static NoiseProfile default_profile();
    static NoiseProfile constant(double amplitude, Interval range = {-1.2, 0.6});

    double amplitude(double position) const;
    void validate(const Interval& position_range = {-1.2, 0.6}) const;
};

// Measured position: position + amplitude(position) * zeta, zeta supported on [-1, 1].
double perceive(const State& s, const NoiseProfile& profile, Rng& rng);

Trajectory simulate(const State& initial, const Controller& ctrl, const NoiseProfile& profile,
                    const MountainCarParams& params, int horizon, Rng& rng);

// Trajectory i draws its initial position and noise from streams derived from
// (seed, i), so the dataset does not depend on thread scheduling.
Dataset generate_dataset(std::size_t n, const Interval& initial_set, const Controller& ctrl,
                         const NoiseProfile& profile, const MountainCarParams& params, int horizon,
                         std::uint64_t seed);

}  // namespace confreach
