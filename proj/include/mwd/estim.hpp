#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

#include "mwd/frame.hpp"

namespace mwd {

struct EstimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct IrlsOptions {
    int max_iterations = 25;
    double tolerance = 1e-10;  // on the weight-normalized score sup-norm
};

struct LogisticFit {
    Eigen::VectorXd coef;
    Eigen::MatrixXd info;  // sum_i w_i p_i (1 - p_i) x_i x_i^T
    bool converged = false;
    int iterations = 0;
};

// Weighted logistic MLE via iteratively reweighted least squares.
LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& w, const IrlsOptions& opts = {});

// Influence function values h_i = M^{-1} x_i (y_i - p_i) with
// M = info / sum(w), restricted to the tracked coefficient columns.
Eigen::MatrixXd influence(const LogisticFit& fit, const Eigen::MatrixXd& X,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                          const std::vector<int>& tracked_cols);

struct RakeOptions {
    int max_iterations = 50;
    double tolerance = 1e-10;  // relative constraint violation
};

struct CalibratedWeights {
    Eigen::VectorXd base;        // w_i = pi_i^{-1}
    Eigen::VectorXd g;           // multiplicative adjustments exp(A_i lambda)
    Eigen::VectorXd calibrated;  // g_i * w_i
    Eigen::VectorXd achieved_totals;
    Eigen::VectorXd target_totals;
    bool converged = false;
    int iterations = 0;
};

// Raking calibration: choose g_i = exp(A_i lambda) so the weighted sample
// totals of the auxiliary columns match the population targets.
CalibratedWeights rake(const Eigen::VectorXd& base, const Eigen::MatrixXd& aux,
                       const Eigen::VectorXd& targets, const RakeOptions& opts = {});

struct ModelSpec {
    std::string outcome;
    std::vector<std::string> covariates;  // intercept is implicit (column 0)
};

struct TrackedCoef {
    int model = 0;       // index into the model list
    int coef_index = 0;  // 0 = intercept, 1.. = covariates in order
    std::string label;
};

// Design matrix (intercept + covariates) and response for a subset of units.
Eigen::MatrixXd design_matrix(const SamplingFrame& frame, const ModelSpec& model,
                              const std::vector<std::size_t>& units);
Eigen::VectorXd response_vector(const SamplingFrame& frame, const ModelSpec& model,
                                const std::vector<std::size_t>& units);

struct EstimationResult {
    std::vector<LogisticFit> fits;  // one per model
    Eigen::VectorXd tracked;        // coefficient values, one per tracked parameter
    Eigen::MatrixXd influence;      // rows = units passed in, cols = tracked parameters
    bool ok = false;
};

// IPW estimation: weighted fits of each model on the given units.
EstimationResult ipw_estimate(const SamplingFrame& frame, const std::vector<std::size_t>& units,
                              const Eigen::VectorXd& weights, const std::vector<ModelSpec>& models,
                              const std::vector<TrackedCoef>& tracked);

// GR estimation: rake the design weights to the phase 1 totals of
// (1, hstar columns), then run the weighted fits with calibrated weights.
EstimationResult gr_estimate(const SamplingFrame& frame, const std::vector<std::size_t>& units,
                             const Eigen::VectorXd& base_weights,
                             const Eigen::MatrixXd& hstar_full,  // N x P, all phase 1 units
                             const std::vector<ModelSpec>& models,
                             const std::vector<TrackedCoef>& tracked);

struct ResidualOptions {
    bool all_hstar_columns = false;  // regress on every tracked h* column, not just own
    bool weighted = true;            // weight the regression by current design weights
};

struct ResidualFit {
    Eigen::MatrixXd coefs;      // (1 + q) x P regression coefficients per parameter
    Eigen::MatrixXd residuals;  // n x P
    std::vector<StratumSummary> summaries;  // sigma^(eps)_{p,k} in sd_by_param
};

// Residual SDs for GR-optimal design: per parameter, least squares of the
// phase 2 influence estimates on the phase 1 estimates, then within-stratum
// SDs of the residuals.
ResidualFit residual_sds(const Eigen::MatrixXd& h2, const Eigen::MatrixXd& hstar,
                         const std::vector<int>& stratum_of_row, int n_strata,
                         const std::vector<long long>& pop_sizes,
                         const std::vector<long long>& already_sampled,
                         const Eigen::VectorXd& weights, const ResidualOptions& opts = {});

// var_p = sum_k N_k^2 sigma^2_{p,k} / n_k - sum_k N_k sigma^2_{p,k}
Eigen::VectorXd stratified_variance(const std::vector<StratumSummary>& summaries,
                                    const std::vector<long long>& n_k);

}  // namespace mwd
