#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mwd/estim.hpp"
#include "mwd/frame.hpp"

namespace mwd {

struct BinaryErrorModel {
    double sensitivity = 1.0;  // P(proxy = 1 | truth = 1)
    double specificity = 1.0;  // P(proxy = 0 | truth = 0)
};

// One synthetic-cohort configuration: outcome-model coefficients, covariate
// correlation, and the error models for the proxy variables.
struct ScenarioSpec {
    std::string id;
    long long n_units = 10000;
    long long phase2_budget = 1000;

    // Outcome 1 model: intercept, X1, X2, Z, Y2. Empty = no first outcome.
    std::vector<double> outcome1_coefs;
    // Outcome 2 model: intercept, X1, X2, Z.
    std::vector<double> outcome2_coefs;

    double cor_x1_x2 = 0.0;
    double cor_x1_zlat = 0.10;
    double cor_x2_zlat = 0.25;

    std::optional<BinaryErrorModel> y1_error;
    std::optional<BinaryErrorModel> y2_error;
    BinaryErrorModel z_error{0.9, 0.95};
    double var_u_x1 = 0.0;
    double var_u_x2 = 0.0;
    // Coupling of the error processes; defaults are artifact choices.
    double cor_u_x1_x2 = 0.3;
    double cor_flip_latents = 0.3;

    // Estimation setup derived from the scenario family.
    std::vector<ModelSpec> models;        // target models on true variables
    std::vector<ModelSpec> proxy_models;  // same structure on proxy columns
    std::vector<TrackedCoef> tracked;
    StratificationRule stratification;
    std::vector<std::string> case_control_outcomes;  // proxy outcome columns for strategy 1
};

// Built-in presets: 2O-A..D, 2P-A..D, 2O2P-A..B.
ScenarioSpec scenario_preset(const std::string& id);
std::vector<std::string> scenario_ids();

// Flip a binary vector with the given sensitivity/specificity,
// independently across units.
std::vector<double> misclassify(const std::vector<double>& truth, double sensitivity,
                                double specificity, std::uint64_t seed);

// Generate a full phase 1 cohort for the scenario. Reproducible per seed.
SamplingFrame gen_frame(const ScenarioSpec& spec, std::uint64_t seed);

}  // namespace mwd
