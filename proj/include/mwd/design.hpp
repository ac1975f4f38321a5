#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mwd/alloc.hpp"
#include "mwd/estim.hpp"
#include "mwd/frame.hpp"
#include "mwd/rng.hpp"

namespace mwd {

enum class Strategy { CaseControl, Simultaneous, Sequential, AOptimal };
enum class Optimality { IPW, GR };

std::string strategy_name(Strategy s);
std::string optimality_name(Optimality o);

struct StrategyConfig {
    Strategy strategy = Strategy::AOptimal;
    int waves = 4;
    long long budget = 1000;
    std::vector<long long> wave_budgets;  // empty = even split (remainder to early waves)
    Optimality optimality = Optimality::IPW;
    AOptWeights weights;                // empty = equal importance
    std::vector<int> sequential_order;  // wave -> parameter; empty = block default
    long long min_per_stratum = 2;
    std::uint64_t rng_seed = 0;
};

// Which parameter drives allocation at wave t (1-based). The default maps
// equal blocks of waves to parameters in order; an explicit order overrides.
int sequential_wave_param(const StrategyConfig& config, int t, int n_params);

struct WaveRecord {
    int wave = 0;
    std::vector<long long> target;  // cumulative per-stratum target
    std::vector<long long> draws;
    std::vector<StratumSummary> summaries;
    bool nuisance_from_phase1 = false;
    int driving_param = -1;  // sequential strategy only
};

struct DesignRun {
    std::vector<WaveRecord> waves;
    std::vector<std::size_t> sampled;  // unit indices, all waves
    std::vector<long long> sampled_per_stratum;
    Eigen::VectorXd beta_ipw;
    Eigen::VectorXd beta_gr;
    bool ok = false;      // false if any fit or calibration failed
    std::string failure;  // reason when !ok
};

struct DesignInputs {
    const SamplingFrame* frame = nullptr;  // stratified, no sampling marks
    std::vector<ModelSpec> models;         // target models on validated columns
    std::vector<TrackedCoef> tracked;
    Eigen::MatrixXd hstar;  // N x P phase 1 influence estimates
    std::vector<std::string> case_control_outcomes;
};

// Per-stratum draw counts for single-wave case-control sampling: the budget
// is split evenly over the case and control cells of each outcome proxy,
// drawn without replacement; short cells are exhausted and the remainder
// redistributed over the still-unsampled units.
std::vector<long long> case_control_allocation(const SamplingFrame& frame,
                                               const std::vector<std::string>& outcome_cols,
                                               long long budget, Rng& rng,
                                               std::vector<std::size_t>& chosen_units);

// Execute one phase 2 design end to end; both estimators are computed on
// the final sample. Reproducible from (frame, inputs, config).
DesignRun run_design(const DesignInputs& inputs, const StrategyConfig& config);

}  // namespace mwd
