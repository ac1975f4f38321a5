#pragma once

#include <stdexcept>
#include <vector>

#include "mwd/frame.hpp"

namespace mwd {

struct AllocError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Importance weights for the weighted A-optimality criterion; must be
// nonnegative and sum to 1.
struct AOptWeights {
    std::vector<double> a;
    void validate(std::size_t n_params) const;
};

AOptWeights equal_weights(std::size_t n_params);

struct RealAllocation {
    std::vector<double> counts;
    double total = 0.0;
    double objective_value = 0.0;  // sum_k N_k^2 s_k^2 / n_k over strata with s_k > 0
};

struct IntAllocation {
    std::vector<long long> counts;
    long long total = 0;
    double objective_value = 0.0;
};

// Objective sum_k N_k^2 s_k^2 / n_k; strata with s_k = 0 and n_k = 0
// contribute nothing, s_k > 0 with n_k = 0 is infinite.
double allocation_objective(const std::vector<long long>& pop_sizes,
                            const std::vector<double>& sds,
                            const std::vector<double>& counts);

// Continuous optimum allocation: n_k proportional to N_k * sigma_k.
RealAllocation neyman(const std::vector<StratumSummary>& strata, std::size_t param, double n);

// Exact integer optimum allocation for one parameter, by greedy selection
// over the priority values N_k sigma_k / sqrt((m-1) m).
IntAllocation wright(const std::vector<StratumSummary>& strata, std::size_t param, long long n,
                     long long min_per_stratum = 2);

// Composite per-stratum SD sqrt(sum_p a_p sigma_{p,k}^2).
std::vector<double> composite_sds(const std::vector<StratumSummary>& strata,
                                  const AOptWeights& weights);

RealAllocation a_optimal_neyman(const std::vector<StratumSummary>& strata,
                                const AOptWeights& weights, double n);

IntAllocation a_optimal_wright(const std::vector<StratumSummary>& strata,
                               const AOptWeights& weights, long long n,
                               long long min_per_stratum = 2);

enum class AllocMode { Neyman, Wright };

// Sum of single-parameter allocations, one budget per parameter.
RealAllocation independent_allocation_neyman(const std::vector<StratumSummary>& strata,
                                             const std::vector<double>& budgets);
IntAllocation independent_allocation_wright(const std::vector<StratumSummary>& strata,
                                            const std::vector<long long>& budgets,
                                            long long min_per_stratum = 2);

// Exact integer allocation with per-stratum lower bounds (units already
// sampled in earlier waves) and caps N_k. Used to realize cumulative
// targets across waves.
IntAllocation wright_with_floors(const std::vector<long long>& pop_sizes,
                                 const std::vector<double>& sds, long long n,
                                 long long min_per_stratum,
                                 const std::vector<long long>& floors);

// Wave draw counts toward a cumulative target. Draws are clipped at zero
// and at remaining stratum capacity; any excess over the wave budget is
// trimmed from the lowest-priority strata and any shortfall re-allocated
// greedily over remaining capacity using the same priority values.
std::vector<long long> multiwave_step(const std::vector<long long>& cumulative_target,
                                      const std::vector<long long>& already_sampled,
                                      const std::vector<long long>& pop_sizes,
                                      const std::vector<double>& sds, long long wave_budget);

}  // namespace mwd
