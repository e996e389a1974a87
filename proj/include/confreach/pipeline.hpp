// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "confreach/partition.hpp"
#include "confreach/reach.hpp"
#include "confreach/system.hpp"

namespace confreach {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct ControllerConfig {
    std::string type = "mlp";  // mlp | energy
    std::string path;          // weight file, resolved against the config directory
    double thrust = 1.0;
};

struct DataConfig {
    std::size_t n_total = 1000;
    double cal_fraction = 0.5;
    double reg_fraction = 0.25;              // of D_cal
    double baseline_alpha_fraction = 0.05;  // of D_cal
    Interval initial_set{-0.55, -0.45};
};

struct OptimizedMethod {
    OptimizerKind optimizer = OptimizerKind::GA;
    LossKind loss = LossKind::ETDL;
    std::vector<std::size_t> m;
};

struct VerifyConfig {
    Interval initial_set{-0.51, -0.49};
    int subdivisions = 50;
    MergeStrategy merge = MergeStrategy::OppMerge;
    int normalize_period = 5;
    std::size_t greedy_threshold = 8;
    // Side-by-side run of the three merge strategies.
    std::vector<std::string> merge_sweep_methods;
    int merge_sweep_subdivisions = 10;
    int merge_sweep_horizon = 30;
};

struct PipelineConfig {
    MountainCarParams params;
    ControllerConfig controller;
    NoiseProfile noise = NoiseProfile::default_profile();
    double alpha = 0.05;
    int horizon = 90;
    DataConfig data;
    std::vector<std::size_t> uniform_m{1, 2, 3, 5};
    std::vector<OptimizedMethod> optimized{{OptimizerKind::GA, LossKind::ETDL, {2, 3, 5}}};
    bool baseline = true;
    double decay = 0.9;
    OptimizerSpec ga;
    OptimizerSpec sa;
    VerifyConfig verify;
    std::filesystem::path out_dir = "out";
    std::filesystem::path base_dir = ".";
    std::uint64_t seed = 20240601;
    unsigned threads = 0;
    bool paper_scale = false;

    // Switches to the full-scale protocol: 4000 trajectories, 200 subdivisions,
    // M in 1..7 and the full GA budget.
    void apply_paper_scale();
    void validate() const;
    std::string canonical_json() const;
    std::uint64_t digest() const;

    Controller make_controller() const;
};

struct ConfigOverrides {
    bool paper_scale = false;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
};

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
PipelineConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

struct SplitSizes {
    std::size_t cal, test, reg, conf, baseline_alpha, baseline_conf;
};
SplitSizes split_sizes(const DataConfig& data);

// Method names: uniform_m<M>, <ga|sa>_<el|etdl>_m<M>, baseline.
std::vector<std::string> method_names(const PipelineConfig& cfg);

void cmd_generate(const PipelineConfig& cfg);
void cmd_calibrate(const PipelineConfig& cfg);

struct VerifyOutcome {
    bool all_feasible = true;
    std::vector<std::string> infeasible;  // method names
};
VerifyOutcome cmd_verify(const PipelineConfig& cfg);

struct ReportRow {
    std::string method;
    std::string kind;  // uniform | optimized | baseline
    std::size_t m = 0;
    std::string strategy;
    double max_set_size = 0.0;
    double wall_time = 0.0;
    double coverage = 0.0;
    std::optional<double> loss;
    std::vector<double> edges;
    std::vector<double> bounds;
    std::size_t total_branches = 0;
    bool feasible = true;
    std::string config_digest;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    std::vector<ReportRow> merge_rows;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::string version = kToolkitVersion;
    std::string digest;  // FNV-1a of report.json
};

ExperimentReport cmd_report(const PipelineConfig& cfg);

}  // namespace confreach
