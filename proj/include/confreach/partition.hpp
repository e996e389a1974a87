// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "confreach/conformal.hpp"
#include "confreach/regions.hpp"

namespace confreach {

// w_i = visits in S_i / total visits.
std::vector<double> experience_weights(const Dataset& ds, const Partition& partition);
std::vector<double> experience_weights(const VisitTable& visits, const Partition& partition);

// sum_i w_i * |D_{S_i}| * e_i. A visited region with an infinite bound makes
// the loss infinite; an empty region contributes nothing.
double loss_el(const Dataset& ds, const Partition& partition, const EtaFunction& eta);
double loss_el(const VisitTable& visits, const Partition& partition, const EtaFunction& eta);

// As loss_el with each visit at step t weighted by decay^t.
double loss_etdl(const Dataset& ds, const Partition& partition, const EtaFunction& eta, double decay);
double loss_etdl(const VisitTable& visits, const Partition& partition, const EtaFunction& eta, double decay);

enum class LossKind { EL, ETDL };

struct LossSpec {
    LossKind kind = LossKind::ETDL;
    double decay_base = 0.9;

    void validate() const;
};

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

double evaluate_loss(const VisitTable& visits, const Partition& partition, const EtaFunction& eta,
                     const LossSpec& loss);

enum class OptimizerKind { GA, SA };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

// Which split the search fits candidate bounds on. The returned bounds are
// always refit on the conformal split; fitting candidates on it as well lets
// the partition depend on the calibration data.
enum class SearchFit { Reg, Conf };

std::string to_string(SearchFit f);
SearchFit search_fit_from_string(const std::string& s);

struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::GA;
    std::size_t budget = 1500;  // candidate evaluations
    std::size_t population = 30;
    double mutation_rate = 0.3;
    std::size_t tournament = 3;
    double initial_temperature = 0.0;  // <= 0: use the initial loss
    double cooling_rate = 0.995;
    double step_fraction = 0.05;  // proposal sigma as a fraction of the range width
    double min_width = 1e-3;
    SearchFit search_fit = SearchFit::Reg;
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0: hardware concurrency

    void validate() const;
};

struct OptimizeResult {
    Partition partition;
    EtaFunction eta;                  // fitted on the conformal split
    double loss = kInf;               // best search loss
    double final_loss = kInf;         // loss of `eta` on the regularization split
    std::vector<double> history;     // best-so-far after each evaluation
    std::vector<double> evaluations;  // loss of each evaluated candidate
    std::string status = "ok";       // "no_finite_candidate" when every candidate had infinite loss
};

// Sorts, reflects into the range and pushes edges apart to at least min_width.
std::vector<double> repair_edges(std::vector<double> edges, const Interval& range, double min_width);

OptimizeResult optimize_partition(const Dataset& data_reg, const Dataset& data_conf, std::size_t m,
                                  const LossSpec& loss, const OptimizerSpec& opt, double alpha,
                                  const Interval& range = {-1.2, 0.6});

}  // namespace confreach
