#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mwd/design.hpp"
#include "mwd/simgen.hpp"

namespace mwd {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::vector<std::string> scenario_ids;
    std::vector<int> strategies;  // 1..5 as in the strategy taxonomy
    int replicates = 500;
    std::uint64_t base_seed = 20260801;
    bool run_ipw = true;  // IPW-optimal designs, IPW estimator rows
    bool run_gr = true;   // GR-optimal designs, GR estimator rows
    int waves = 4;
    int jobs = 0;  // 0 = MWD_JOBS env var or hardware concurrency
    std::string output_dir = "results";
    std::optional<long long> n_units;
    std::optional<long long> budget;
    double max_failure_rate = 0.05;

    void validate() const;
};

Strategy strategy_of_index(int idx);         // 1 -> CaseControl, 2 -> Simultaneous, ...
std::string strategy_label(int idx);         // "1:case-control" etc.

struct ResultRow {
    std::string scenario;
    int strategy = 0;
    std::string estimator;  // "IPW" or "GR"
    std::string coefficient;
    double mean = 0.0;
    double variance = 0.0;
    double mse = 0.0;
    int replicates = 0;
};

struct EreRow {
    std::string scenario;
    std::string estimator;
    int strategy = 0;
    double ere = 0.0;  // sum-var(A-optimal) / sum-var(this strategy)
};

struct ResultTable {
    std::vector<ResultRow> rows;
    std::vector<EreRow> ere;
    int failed_replicates = 0;
    int total_replicates = 0;
};

// Generate frames, run every configured strategy on each frame (paired
// comparison), and aggregate empirical variance / MSE / ERE.
ResultTable run_experiment(const ExperimentConfig& config);

// One CSV per scenario, a combined ERE CSV, a long-format CSV, and an
// aligned-text rendering.
void emit(const ResultTable& table, const std::string& output_dir);
std::string render_text(const ResultTable& table);

// Parse-back helper for the per-scenario CSVs.
std::vector<ResultRow> parse_result_csv(const std::string& path);

// Key-value config file (one `key value` pair per line, '#' comments).
ExperimentConfig parse_experiment_config(const std::string& path);

// Config for running one design on a user-supplied frame.
struct DesignJobConfig {
    std::vector<ModelSpec> models;
    std::vector<ModelSpec> proxy_models;
    std::vector<TrackedCoef> tracked;
    StratificationRule stratification;
    std::vector<std::string> case_control_outcomes;
    StrategyConfig strategy;
};
DesignJobConfig parse_design_config(const std::string& path);

// Run one design on a frame: fits the proxy models for h*, stratifies if
// needed, executes the strategy, and returns the run.
DesignRun run_design_job(SamplingFrame& frame, const DesignJobConfig& config);

}  // namespace mwd
