#include "mwd/alloc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

namespace mwd {

void AOptWeights::validate(std::size_t n_params) const {
    if (a.size() != n_params)
        throw AllocError("weight vector length " + std::to_string(a.size()) + " != P = " +
                         std::to_string(n_params));
    double s = 0.0;
    for (double v : a) {
        if (v < 0.0 || !std::isfinite(v)) throw AllocError("importance weights must be >= 0");
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-12) throw AllocError("importance weights must sum to 1");
}

AOptWeights equal_weights(std::size_t n_params) {
    AOptWeights w;
    w.a.assign(n_params, 1.0 / static_cast<double>(n_params));
    return w;
}

double allocation_objective(const std::vector<long long>& pop_sizes,
                            const std::vector<double>& sds,
                            const std::vector<double>& counts) {
    double obj = 0.0;
    for (std::size_t k = 0; k < pop_sizes.size(); ++k) {
        const double Ns = static_cast<double>(pop_sizes[k]) * sds[k];
        if (Ns == 0.0) continue;
        if (counts[k] <= 0.0) return std::numeric_limits<double>::infinity();
        obj += Ns * Ns / counts[k];
    }
    return obj;
}

namespace {

std::vector<long long> pop_sizes_of(const std::vector<StratumSummary>& strata) {
    std::vector<long long> N(strata.size());
    for (std::size_t k = 0; k < strata.size(); ++k) N[k] = strata[k].pop_size;
    return N;
}

std::vector<double> param_sds(const std::vector<StratumSummary>& strata, std::size_t param) {
    std::vector<double> s(strata.size());
    for (std::size_t k = 0; k < strata.size(); ++k) {
        if (param >= strata[k].sd_by_param.size()) throw AllocError("parameter index out of range");
        s[k] = strata[k].sd_by_param[param];
    }
    return s;
}

// Priority of the m-th unit in a stratum: N_k s_k / sqrt((m-1) m).
// The first unit has infinite priority when N_k s_k > 0, matching the
// telescoping decomposition evaluated at n_k = 0.
double priority_value(double Ns, long long m) {
    if (m <= 1) return Ns > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return Ns / std::sqrt(static_cast<double>(m - 1) * static_cast<double>(m));
}

struct Cell {
    double value;
    std::size_t stratum;  // 0-based
    long long slot;
};

// Ties break to the lower stratum id, then the lower slot index.
struct CellLess {
    bool operator()(const Cell& a, const Cell& b) const {
        if (a.value != b.value) return a.value < b.value;
        if (a.stratum != b.stratum) return a.stratum > b.stratum;
        return a.slot > b.slot;
    }
};

RealAllocation neyman_core(const std::vector<long long>& N, const std::vector<double>& s,
                           double n) {
    if (n < 0.0) throw AllocError("sample size must be >= 0");
    double denom = 0.0;
    for (std::size_t k = 0; k < N.size(); ++k) denom += static_cast<double>(N[k]) * s[k];
    if (denom <= 0.0)
        throw AllocError("all N_k * sigma_k are zero; allocation undefined (apply SD fallback first)");
    RealAllocation out;
    out.counts.resize(N.size());
    for (std::size_t k = 0; k < N.size(); ++k)
        out.counts[k] = n * static_cast<double>(N[k]) * s[k] / denom;
    out.total = n;
    out.objective_value = allocation_objective(N, s, out.counts);
    return out;
}

IntAllocation wright_core(const std::vector<long long>& N, const std::vector<double>& s,
                          long long n, long long min_per_stratum,
                          const std::vector<long long>& floors) {
    const std::size_t K = N.size();
    std::vector<long long> base(K);
    long long base_total = 0, capacity = 0;
    for (std::size_t k = 0; k < K; ++k) {
        long long lo = std::max(min_per_stratum, floors.empty() ? 0LL : floors[k]);
        base[k] = std::min(N[k], lo);
        base_total += base[k];
        capacity += N[k];
    }
    if (n < base_total)
        throw AllocError("infeasible: n = " + std::to_string(n) + " < required minimum " +
                         std::to_string(base_total));
    if (n > capacity)
        throw AllocError("infeasible: n = " + std::to_string(n) + " > total capacity " +
                         std::to_string(capacity));

    IntAllocation out;
    out.counts = base;
    std::priority_queue<Cell, std::vector<Cell>, CellLess> heap;
    for (std::size_t k = 0; k < K; ++k)
        if (base[k] < N[k])
            heap.push({priority_value(static_cast<double>(N[k]) * s[k], base[k] + 1), k, base[k] + 1});
    for (long long taken = base_total; taken < n; ++taken) {
        Cell c = heap.top();
        heap.pop();
        ++out.counts[c.stratum];
        if (c.slot < N[c.stratum])
            heap.push({priority_value(static_cast<double>(N[c.stratum]) * s[c.stratum], c.slot + 1),
                       c.stratum, c.slot + 1});
    }
    out.total = n;
    std::vector<double> real_counts(out.counts.begin(), out.counts.end());
    out.objective_value = allocation_objective(N, s, real_counts);
    return out;
}

}  // namespace

RealAllocation neyman(const std::vector<StratumSummary>& strata, std::size_t param, double n) {
    return neyman_core(pop_sizes_of(strata), param_sds(strata, param), n);
}

IntAllocation wright(const std::vector<StratumSummary>& strata, std::size_t param, long long n,
                     long long min_per_stratum) {
    return wright_core(pop_sizes_of(strata), param_sds(strata, param), n, min_per_stratum, {});
}

std::vector<double> composite_sds(const std::vector<StratumSummary>& strata,
                                  const AOptWeights& weights) {
    if (strata.empty()) throw AllocError("no strata");
    weights.validate(strata.front().sd_by_param.size());
    std::vector<double> s(strata.size());
    for (std::size_t k = 0; k < strata.size(); ++k) {
        double acc = 0.0;
        for (std::size_t p = 0; p < weights.a.size(); ++p) {
            const double sd = strata[k].sd_by_param[p];
            acc += weights.a[p] * sd * sd;
        }
        s[k] = std::sqrt(acc);
    }
    return s;
}

RealAllocation a_optimal_neyman(const std::vector<StratumSummary>& strata,
                                const AOptWeights& weights, double n) {
    return neyman_core(pop_sizes_of(strata), composite_sds(strata, weights), n);
}

IntAllocation a_optimal_wright(const std::vector<StratumSummary>& strata,
                               const AOptWeights& weights, long long n,
                               long long min_per_stratum) {
    return wright_core(pop_sizes_of(strata), composite_sds(strata, weights), n, min_per_stratum, {});
}

RealAllocation independent_allocation_neyman(const std::vector<StratumSummary>& strata,
                                             const std::vector<double>& budgets) {
    if (strata.empty()) throw AllocError("no strata");
    RealAllocation out;
    out.counts.assign(strata.size(), 0.0);
    for (std::size_t p = 0; p < budgets.size(); ++p) {
        RealAllocation sub = neyman(strata, p, budgets[p]);
        for (std::size_t k = 0; k < strata.size(); ++k) out.counts[k] += sub.counts[k];
        out.total += budgets[p];
    }
    AOptWeights w = equal_weights(budgets.size());
    out.objective_value =
        allocation_objective(pop_sizes_of(strata), composite_sds(strata, w), out.counts);
    return out;
}

IntAllocation independent_allocation_wright(const std::vector<StratumSummary>& strata,
                                            const std::vector<long long>& budgets,
                                            long long min_per_stratum) {
    if (strata.empty()) throw AllocError("no strata");
    IntAllocation out;
    out.counts.assign(strata.size(), 0);
    for (std::size_t p = 0; p < budgets.size(); ++p) {
        IntAllocation sub = wright(strata, p, budgets[p], min_per_stratum);
        for (std::size_t k = 0; k < strata.size(); ++k) out.counts[k] += sub.counts[k];
        out.total += budgets[p];
    }
    AOptWeights w = equal_weights(budgets.size());
    std::vector<double> real_counts(out.counts.begin(), out.counts.end());
    out.objective_value =
        allocation_objective(pop_sizes_of(strata), composite_sds(strata, w), real_counts);
    return out;
}

IntAllocation wright_with_floors(const std::vector<long long>& pop_sizes,
                                 const std::vector<double>& sds, long long n,
                                 long long min_per_stratum,
                                 const std::vector<long long>& floors) {
    return wright_core(pop_sizes, sds, n, min_per_stratum, floors);
}

std::vector<long long> multiwave_step(const std::vector<long long>& cumulative_target,
                                      const std::vector<long long>& already_sampled,
                                      const std::vector<long long>& pop_sizes,
                                      const std::vector<double>& sds, long long wave_budget) {
    const std::size_t K = pop_sizes.size();
    if (cumulative_target.size() != K || already_sampled.size() != K || sds.size() != K)
        throw AllocError("multiwave_step: vector length mismatch");
    long long remaining_capacity = 0;
    std::vector<long long> draws(K, 0);
    for (std::size_t k = 0; k < K; ++k) {
        long long cap = pop_sizes[k] - already_sampled[k];
        if (cap < 0) throw AllocError("already_sampled exceeds stratum size");
        remaining_capacity += cap;
        draws[k] = std::clamp(cumulative_target[k] - already_sampled[k], 0LL, cap);
    }
    if (wave_budget > remaining_capacity)
        throw AllocError("wave budget exceeds remaining capacity");

    long long total = std::accumulate(draws.begin(), draws.end(), 0LL);
    auto value_of = [&](std::size_t k, long long m) {
        return priority_value(static_cast<double>(pop_sizes[k]) * sds[k], m);
    };
    // Trim excess from the strata whose last-added unit has the smallest
    // priority; refill shortfall by the largest priorities over remaining
    // capacity.
    while (total > wave_budget) {
        std::size_t worst = K;
        double worst_v = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
            if (draws[k] == 0) continue;
            double v = value_of(k, already_sampled[k] + draws[k]);
            if (worst == K || v < worst_v || (v == worst_v && k > worst)) worst = k, worst_v = v;
        }
        --draws[worst];
        --total;
    }
    while (total < wave_budget) {
        std::size_t best = K;
        double best_v = -1.0;
        for (std::size_t k = 0; k < K; ++k) {
            if (already_sampled[k] + draws[k] >= pop_sizes[k]) continue;
            double v = value_of(k, already_sampled[k] + draws[k] + 1);
            if (best == K || v > best_v) best = k, best_v = v;
        }
        ++draws[best];
        ++total;
    }
    return draws;
}

}  // namespace mwd
