#include "mwd/design.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace mwd {

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::CaseControl: return "case-control";
        case Strategy::Simultaneous: return "simultaneous";
        case Strategy::Sequential: return "sequential";
        case Strategy::AOptimal: return "a-optimal";
    }
    return "?";
}

std::string optimality_name(Optimality o) { return o == Optimality::IPW ? "IPW" : "GR"; }

int sequential_wave_param(const StrategyConfig& config, int t, int n_params) {
    if (t < 1 || t > config.waves) throw std::invalid_argument("wave index out of range");
    if (!config.sequential_order.empty()) {
        if (static_cast<int>(config.sequential_order.size()) != config.waves)
            throw std::invalid_argument("sequential order length must equal the number of waves");
        int p = config.sequential_order[static_cast<std::size_t>(t - 1)];
        if (p < 0 || p >= n_params) throw std::invalid_argument("sequential order parameter out of range");
        return p;
    }
    if (config.waves % n_params != 0)
        throw std::invalid_argument("waves not divisible by parameter count; supply an explicit order");
    return (t - 1) / (config.waves / n_params);
}

namespace {

std::vector<long long> even_wave_budgets(long long budget, int waves) {
    std::vector<long long> out(static_cast<std::size_t>(waves), budget / waves);
    for (int t = 0; t < static_cast<int>(budget % waves); ++t) ++out[static_cast<std::size_t>(t)];
    return out;
}

// Split a wave budget as evenly as possible across parameters.
std::vector<long long> even_param_split(long long amount, std::size_t n_params) {
    std::vector<long long> out(n_params, amount / static_cast<long long>(n_params));
    for (long long p = 0; p < amount % static_cast<long long>(n_params); ++p)
        ++out[static_cast<std::size_t>(p)];
    return out;
}

// Simple random sample of `count` elements from `pool` (order-stable pool).
std::vector<std::size_t> srs(std::vector<std::size_t>& pool, long long count, Rng& rng) {
    std::vector<std::size_t> picked;
    picked.reserve(static_cast<std::size_t>(count));
    for (long long j = 0; j < count; ++j) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        std::size_t idx = pick(rng);
        picked.push_back(pool[idx]);
        pool[idx] = pool.back();
        pool.pop_back();
    }
    return picked;
}

}  // namespace

std::vector<long long> case_control_allocation(const SamplingFrame& frame,
                                               const std::vector<std::string>& outcome_cols,
                                               long long budget, Rng& rng,
                                               std::vector<std::size_t>& chosen_units) {
    if (outcome_cols.empty()) throw std::invalid_argument("case-control needs outcome columns");
    const std::size_t n_cells = outcome_cols.size() * 2;
    const long long quota = budget / static_cast<long long>(n_cells);
    std::vector<bool> taken(frame.n_units(), false);
    chosen_units.clear();
    long long shortfall = budget - quota * static_cast<long long>(n_cells);

    for (const auto& col_name : outcome_cols) {
        const auto& col = frame.column(col_name);
        for (double level : {1.0, 0.0}) {
            std::vector<std::size_t> pool;
            for (std::size_t i = 0; i < frame.n_units(); ++i)
                if (!taken[i] && col[i] == level) pool.push_back(i);
            long long take = std::min<long long>(quota, static_cast<long long>(pool.size()));
            shortfall += quota - take;
            for (std::size_t u : srs(pool, take, rng)) {
                taken[u] = true;
                chosen_units.push_back(u);
            }
        }
    }
    // Exhausted cells: spread the remainder over the unsampled units.
    if (shortfall > 0) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < frame.n_units(); ++i)
            if (!taken[i]) pool.push_back(i);
        long long take = std::min<long long>(shortfall, static_cast<long long>(pool.size()));
        for (std::size_t u : srs(pool, take, rng)) {
            taken[u] = true;
            chosen_units.push_back(u);
        }
    }

    std::vector<long long> per_stratum(static_cast<std::size_t>(frame.n_strata()), 0);
    for (std::size_t u : chosen_units) ++per_stratum[static_cast<std::size_t>(frame.stratum_ids()[u] - 1)];
    return per_stratum;
}

DesignRun run_design(const DesignInputs& inputs, const StrategyConfig& config) {
    const SamplingFrame& base = *inputs.frame;
    if (base.n_strata() < 1) throw std::invalid_argument("frame must be stratified");
    const std::size_t P = inputs.tracked.size();
    AOptWeights weights = config.weights.a.empty() ? equal_weights(P) : config.weights;
    weights.validate(P);

    SamplingFrame frame = base;  // sampling state is local to this run
    const auto pop_sizes = frame.stratum_sizes();
    const std::size_t K = pop_sizes.size();
    DesignRun run;
    run.sampled_per_stratum.assign(K, 0);

    auto draw_into_frame = [&](const std::vector<long long>& draws, int wave, Rng& rng) {
        std::vector<std::vector<std::size_t>> pools(K);
        for (std::size_t i = 0; i < frame.n_units(); ++i)
            if (!frame.is_sampled(i))
                pools[static_cast<std::size_t>(frame.stratum_ids()[i] - 1)].push_back(i);
        for (std::size_t k = 0; k < K; ++k) {
            if (draws[k] > static_cast<long long>(pools[k].size()))
                throw AllocError("stratum exhausted during draw");
            for (std::size_t u : srs(pools[k], draws[k], rng)) {
                frame.mark_sampled(u, wave);
                run.sampled.push_back(u);
            }
            run.sampled_per_stratum[k] += draws[k];
        }
    };

    if (config.strategy == Strategy::CaseControl) {
        Rng rng = make_rng(config.rng_seed, {1});
        std::vector<std::size_t> chosen;
        WaveRecord rec;
        rec.wave = 1;
        rec.nuisance_from_phase1 = true;
        rec.draws = case_control_allocation(frame, inputs.case_control_outcomes, config.budget,
                                            rng, chosen);
        rec.target = rec.draws;
        for (std::size_t u : chosen) {
            frame.mark_sampled(u, 1);
            run.sampled.push_back(u);
        }
        for (std::size_t k = 0; k < K; ++k) run.sampled_per_stratum[k] += rec.draws[k];
        run.waves.push_back(std::move(rec));
    } else {
        std::vector<long long> wave_budgets =
            config.wave_budgets.empty() ? even_wave_budgets(config.budget, config.waves)
                                        : config.wave_budgets;
        if (std::accumulate(wave_budgets.begin(), wave_budgets.end(), 0LL) != config.budget)
            throw std::invalid_argument("wave budgets must sum to the phase 2 budget");

        long long cum = 0;
        for (int t = 1; t <= config.waves; ++t) {
            WaveRecord rec;
            rec.wave = t;
            // Nuisance SDs: phase 1 influence estimates at wave 1, then
            // re-estimated from the accumulated phase 2 sample.
            if (t == 1) {
                rec.nuisance_from_phase1 = true;
                rec.summaries = summarize_strata(frame, inputs.hstar);
            } else {
                auto units = run.sampled;
                std::sort(units.begin(), units.end());
                Eigen::VectorXd w(static_cast<Eigen::Index>(units.size()));
                std::vector<int> row_strata(units.size());
                for (std::size_t i = 0; i < units.size(); ++i) {
                    int k = frame.stratum_ids()[units[i]] - 1;
                    row_strata[i] = k + 1;
                    w[static_cast<Eigen::Index>(i)] =
                        static_cast<double>(pop_sizes[static_cast<std::size_t>(k)]) /
                        static_cast<double>(run.sampled_per_stratum[static_cast<std::size_t>(k)]);
                }
                EstimationResult est =
                    ipw_estimate(frame, units, w, inputs.models, inputs.tracked);
                if (!est.ok) {
                    run.failure = "nuisance estimation failed at wave " + std::to_string(t);
                    return run;
                }
                if (config.optimality == Optimality::IPW) {
                    rec.summaries = summarize_strata(frame, est.influence, units);
                } else {
                    Eigen::MatrixXd hstar_sub(static_cast<Eigen::Index>(units.size()),
                                              inputs.hstar.cols());
                    for (std::size_t i = 0; i < units.size(); ++i)
                        hstar_sub.row(static_cast<Eigen::Index>(i)) =
                            inputs.hstar.row(static_cast<Eigen::Index>(units[i]));
                    ResidualFit rf = residual_sds(est.influence, hstar_sub, row_strata,
                                                  static_cast<int>(K), pop_sizes,
                                                  run.sampled_per_stratum, w);
                    rec.summaries = std::move(rf.summaries);
                }
            }

            const long long wave_budget = wave_budgets[static_cast<std::size_t>(t - 1)];
            cum += wave_budget;
            std::vector<double> comp = composite_sds(rec.summaries, weights);
            std::vector<long long> target;
            if (config.strategy == Strategy::AOptimal) {
                target = wright_with_floors(pop_sizes, comp, cum, config.min_per_stratum,
                                            run.sampled_per_stratum)
                             .counts;
            } else if (config.strategy == Strategy::Sequential) {
                rec.driving_param = sequential_wave_param(config, t, static_cast<int>(P));
                std::vector<double> sds(K);
                for (std::size_t k = 0; k < K; ++k)
                    sds[k] = rec.summaries[k].sd_by_param[static_cast<std::size_t>(rec.driving_param)];
                target = wright_with_floors(pop_sizes, sds, cum, config.min_per_stratum,
                                            run.sampled_per_stratum)
                             .counts;
            } else {  // Simultaneous: sum of per-parameter exact allocations
                std::vector<long long> cum_split = even_param_split(cum, P);
                target = independent_allocation_wright(rec.summaries, cum_split,
                                                       config.min_per_stratum)
                             .counts;
            }
            rec.target = target;
            rec.draws = multiwave_step(target, run.sampled_per_stratum, pop_sizes, comp, wave_budget);
            Rng rng = make_rng(config.rng_seed, {static_cast<std::uint64_t>(t)});
            draw_into_frame(rec.draws, t, rng);
            run.waves.push_back(std::move(rec));
        }
    }

    // Final estimation with cumulative stratified design weights. For
    // case-control sampling the design cells are the cross-classification
    // of the outcome proxies, not the multiwave analysis strata.
    auto units = run.sampled;
    std::sort(units.begin(), units.end());
    Eigen::VectorXd w(static_cast<Eigen::Index>(units.size()));
    if (config.strategy == Strategy::CaseControl) {
        const std::size_t n_cells = std::size_t{1} << inputs.case_control_outcomes.size();
        auto cell_of = [&](std::size_t i) {
            std::size_t code = 0;
            for (std::size_t j = 0; j < inputs.case_control_outcomes.size(); ++j)
                if (frame.column(inputs.case_control_outcomes[j])[i] == 1.0)
                    code |= std::size_t{1} << j;
            return code;
        };
        std::vector<long long> cell_pop(n_cells, 0), cell_sampled(n_cells, 0);
        for (std::size_t i = 0; i < frame.n_units(); ++i) ++cell_pop[cell_of(i)];
        for (std::size_t u : units) ++cell_sampled[cell_of(u)];
        for (std::size_t i = 0; i < units.size(); ++i) {
            std::size_t c = cell_of(units[i]);
            w[static_cast<Eigen::Index>(i)] =
                static_cast<double>(cell_pop[c]) / static_cast<double>(cell_sampled[c]);
        }
    } else {
        for (std::size_t i = 0; i < units.size(); ++i) {
            int k = frame.stratum_ids()[units[i]] - 1;
            w[static_cast<Eigen::Index>(i)] =
                static_cast<double>(pop_sizes[static_cast<std::size_t>(k)]) /
                static_cast<double>(run.sampled_per_stratum[static_cast<std::size_t>(k)]);
        }
    }
    EstimationResult ipw = ipw_estimate(frame, units, w, inputs.models, inputs.tracked);
    EstimationResult gr =
        gr_estimate(frame, units, w, inputs.hstar, inputs.models, inputs.tracked);
    if (!ipw.ok || !gr.ok) {
        run.failure = !ipw.ok ? "final IPW estimation failed" : "final GR estimation failed";
        return run;
    }
    run.beta_ipw = ipw.tracked;
    run.beta_gr = gr.tracked;
    run.ok = true;
    return run;
}

}  // namespace mwd
