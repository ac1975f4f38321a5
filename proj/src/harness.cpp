#include "mwd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

namespace mwd {

namespace {

double true_coef(const ScenarioSpec& spec, const TrackedCoef& tc) {
    const bool two_models = spec.models.size() == 2;
    const std::vector<double>& v =
        (two_models && tc.model == 0) ? spec.outcome1_coefs : spec.outcome2_coefs;
    return v[static_cast<std::size_t>(tc.coef_index)];
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, sep))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

int resolve_jobs(int jobs) {
    if (jobs > 0) return jobs;
    if (const char* env = std::getenv("MWD_JOBS")) {
        int j = std::atoi(env);
        if (j > 0) return j;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (scenario_ids.empty()) throw ConfigError("no scenarios configured");
    if (strategies.empty()) throw ConfigError("no strategies configured");
    for (int s : strategies)
        if (s < 1 || s > 5) throw ConfigError("strategy index must be in 1..5");
    if (replicates < 2) throw ConfigError("replicates must be >= 2");
    if (!run_ipw && !run_gr) throw ConfigError("at least one estimator must be enabled");
    for (const auto& id : scenario_ids) {
        try {
            scenario_preset(id);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }
}

Strategy strategy_of_index(int idx) {
    switch (idx) {
        case 1: return Strategy::CaseControl;
        case 2: return Strategy::Simultaneous;
        case 3: return Strategy::Sequential;
        case 4: return Strategy::Sequential;  // reversed parameter order
        case 5: return Strategy::AOptimal;
    }
    throw ConfigError("strategy index must be in 1..5");
}

std::string strategy_label(int idx) {
    switch (idx) {
        case 1: return "1:case-control";
        case 2: return "2:simultaneous";
        case 3: return "3:sequential";
        case 4: return "4:sequential-reversed";
        case 5: return "5:a-optimal";
    }
    return "?";
}

namespace {

struct CellLayout {
    // (strategy index, estimator) pairs in emission order, then coefficients.
    std::vector<std::pair<int, std::string>> groups;
    std::size_t n_coefs = 0;
    std::size_t size() const { return groups.size() * n_coefs; }
    std::size_t index(std::size_t group, std::size_t coef) const {
        return group * n_coefs + coef;
    }
};

struct ScenarioAccumulator {
    std::vector<std::vector<double>> values;  // per replicate, layout order
    std::vector<bool> ok;
};

std::vector<int> reversed_block_order(int waves, int n_params) {
    if (waves % n_params != 0) throw ConfigError("waves not divisible by parameter count");
    std::vector<int> order(static_cast<std::size_t>(waves));
    const int block = waves / n_params;
    for (int t = 0; t < waves; ++t)
        order[static_cast<std::size_t>(t)] = n_params - 1 - t / block;
    return order;
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& config) {
    config.validate();
    const int jobs = resolve_jobs(config.jobs);
    ResultTable table;

    for (std::size_t si = 0; si < config.scenario_ids.size(); ++si) {
        ScenarioSpec spec = scenario_preset(config.scenario_ids[si]);
        if (config.n_units) spec.n_units = *config.n_units;
        if (config.budget) spec.phase2_budget = *config.budget;
        const std::size_t P = spec.tracked.size();

        CellLayout layout;
        layout.n_coefs = P;
        for (int s : config.strategies) {
            if (config.run_ipw) layout.groups.emplace_back(s, "IPW");
            if (config.run_gr) layout.groups.emplace_back(s, "GR");
        }

        ScenarioAccumulator acc;
        acc.values.assign(static_cast<std::size_t>(config.replicates),
                          std::vector<double>(layout.size(), 0.0));
        acc.ok.assign(static_cast<std::size_t>(config.replicates), false);

        auto run_replicate = [&](int r) {
            std::uint64_t rep_seed =
                derive_seed(config.base_seed, {static_cast<std::uint64_t>(si),
                                               static_cast<std::uint64_t>(r)});
            SamplingFrame frame = gen_frame(spec, rep_seed);
            build_strata(frame, spec.stratification);

            // Phase 1 influence estimates from the proxy-variable fits.
            std::vector<std::size_t> all_units(frame.n_units());
            std::iota(all_units.begin(), all_units.end(), 0);
            Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(frame.n_units()));
            EstimationResult phase1 =
                ipw_estimate(frame, all_units, ones, spec.proxy_models, spec.tracked);
            if (!phase1.ok) return;

            DesignInputs inputs;
            inputs.frame = &frame;
            inputs.models = spec.models;
            inputs.tracked = spec.tracked;
            inputs.hstar = phase1.influence;
            inputs.case_control_outcomes = spec.case_control_outcomes;

            auto& row = acc.values[static_cast<std::size_t>(r)];
            std::size_t group = 0;
            for (int s : config.strategies) {
                // Strategy 1 is a single run; both estimator rows share it.
                DesignRun cc_run;
                bool cc_done = false;
                for (int pass = 0; pass < 2; ++pass) {
                    const bool ipw_pass = pass == 0;
                    if ((ipw_pass && !config.run_ipw) || (!ipw_pass && !config.run_gr)) continue;
                    StrategyConfig sc;
                    sc.strategy = strategy_of_index(s);
                    sc.waves = config.waves;
                    sc.budget = spec.phase2_budget;
                    sc.optimality = ipw_pass ? Optimality::IPW : Optimality::GR;
                    sc.rng_seed = derive_seed(
                        config.base_seed,
                        {static_cast<std::uint64_t>(si), static_cast<std::uint64_t>(r),
                         static_cast<std::uint64_t>(s), ipw_pass ? 0ULL : 1ULL});
                    if (s == 4)
                        sc.sequential_order =
                            reversed_block_order(config.waves, static_cast<int>(P));
                    const DesignRun* run_ptr = nullptr;
                    if (s == 1) {
                        if (!cc_done) {
                            sc.rng_seed = derive_seed(config.base_seed,
                                                      {static_cast<std::uint64_t>(si),
                                                       static_cast<std::uint64_t>(r),
                                                       static_cast<std::uint64_t>(s)});
                            cc_run = run_design(inputs, sc);
                            cc_done = true;
                        }
                        run_ptr = &cc_run;
                    } else {
                        cc_run = run_design(inputs, sc);
                        run_ptr = &cc_run;
                    }
                    if (!run_ptr->ok) return;  // replicate flagged and excluded
                    const Eigen::VectorXd& beta =
                        ipw_pass ? run_ptr->beta_ipw : run_ptr->beta_gr;
                    for (std::size_t p = 0; p < P; ++p)
                        row[layout.index(group, p)] = beta[static_cast<Eigen::Index>(p)];
                    ++group;
                }
            }
            acc.ok[static_cast<std::size_t>(r)] = true;
        };

        if (jobs <= 1) {
            for (int r = 0; r < config.replicates; ++r) run_replicate(r);
        } else {
            std::atomic<int> next{0};
            std::vector<std::thread> workers;
            for (int j = 0; j < jobs; ++j)
                workers.emplace_back([&] {
                    for (int r = next.fetch_add(1); r < config.replicates; r = next.fetch_add(1))
                        run_replicate(r);
                });
            for (auto& t : workers) t.join();
        }

        int n_ok = static_cast<int>(std::count(acc.ok.begin(), acc.ok.end(), true));
        int failed = config.replicates - n_ok;
        table.failed_replicates += failed;
        table.total_replicates += config.replicates;
        if (failed > config.max_failure_rate * config.replicates)
            throw ConfigError("scenario " + spec.id + ": " + std::to_string(failed) +
                              " of " + std::to_string(config.replicates) +
                              " replicates failed estimation");

        // Aggregate mean / variance / MSE per cell.
        std::vector<double> sumvar_by_strategy_est;  // indexed like layout.groups
        sumvar_by_strategy_est.assign(layout.groups.size(), 0.0);
        for (std::size_t g = 0; g < layout.groups.size(); ++g) {
            for (std::size_t p = 0; p < P; ++p) {
                double mean = 0.0;
                for (int r = 0; r < config.replicates; ++r)
                    if (acc.ok[static_cast<std::size_t>(r)])
                        mean += acc.values[static_cast<std::size_t>(r)][layout.index(g, p)];
                mean /= n_ok;
                double ss = 0.0;
                const double truth = true_coef(spec, spec.tracked[p]);
                for (int r = 0; r < config.replicates; ++r) {
                    if (!acc.ok[static_cast<std::size_t>(r)]) continue;
                    const double v = acc.values[static_cast<std::size_t>(r)][layout.index(g, p)];
                    ss += (v - mean) * (v - mean);
                }
                ResultRow rr;
                rr.scenario = spec.id;
                rr.strategy = layout.groups[g].first;
                rr.estimator = layout.groups[g].second;
                rr.coefficient = spec.tracked[p].label;
                rr.mean = mean;
                rr.variance = ss / (n_ok - 1);
                rr.mse = rr.variance + (mean - truth) * (mean - truth);
                rr.replicates = n_ok;
                sumvar_by_strategy_est[g] += rr.variance;
                table.rows.push_back(std::move(rr));
            }
        }

        // ERE relative to the A-optimal strategy when it was run.
        for (const std::string& est : {std::string("IPW"), std::string("GR")}) {
            double aopt_sum = -1.0;
            for (std::size_t g = 0; g < layout.groups.size(); ++g)
                if (layout.groups[g].first == 5 && layout.groups[g].second == est)
                    aopt_sum = sumvar_by_strategy_est[g];
            if (aopt_sum < 0.0) continue;
            for (std::size_t g = 0; g < layout.groups.size(); ++g) {
                if (layout.groups[g].second != est) continue;
                EreRow er;
                er.scenario = spec.id;
                er.estimator = est;
                er.strategy = layout.groups[g].first;
                er.ere = aopt_sum / sumvar_by_strategy_est[g];
                table.ere.push_back(std::move(er));
            }
        }
    }
    return table;
}

void emit(const ResultTable& table, const std::string& output_dir) {
    if (table.rows.empty()) throw ConfigError("empty result table; nothing to emit");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(output_dir, ec);
    if (!fs::is_directory(output_dir)) throw ConfigError("cannot create output directory");

    std::vector<std::string> scenarios;
    for (const auto& r : table.rows)
        if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end())
            scenarios.push_back(r.scenario);

    for (const auto& sc : scenarios) {
        std::ofstream out(output_dir + "/" + sc + ".csv");
        if (!out) throw ConfigError("cannot write scenario CSV");
        out << "scenario,strategy,estimator,coefficient,mean,variance,mse,replicates\n";
        out << std::setprecision(17);
        for (const auto& r : table.rows)
            if (r.scenario == sc)
                out << r.scenario << "," << r.strategy << "," << r.estimator << ","
                    << r.coefficient << "," << r.mean << "," << r.variance << "," << r.mse
                    << "," << r.replicates << "\n";
    }
    {
        std::ofstream out(output_dir + "/ere.csv");
        out << "scenario,estimator,strategy,ere\n";
        out << std::setprecision(17);
        for (const auto& e : table.ere)
            out << e.scenario << "," << e.estimator << "," << e.strategy << "," << e.ere << "\n";
    }
    {
        // Long format for external plotting.
        std::ofstream out(output_dir + "/long.csv");
        out << "scenario,strategy,estimator,coefficient,metric,value\n";
        out << std::setprecision(17);
        for (const auto& r : table.rows) {
            out << r.scenario << "," << r.strategy << "," << r.estimator << "," << r.coefficient
                << ",variance," << r.variance << "\n";
            out << r.scenario << "," << r.strategy << "," << r.estimator << "," << r.coefficient
                << ",mse," << r.mse << "\n";
            out << r.scenario << "," << r.strategy << "," << r.estimator << "," << r.coefficient
                << ",mean," << r.mean << "\n";
        }
    }
    {
        std::ofstream out(output_dir + "/results.txt");
        out << render_text(table);
    }
}

std::string render_text(const ResultTable& table) {
    std::ostringstream out;
    out << std::left << std::setw(10) << "scenario" << std::setw(24) << "strategy" << std::setw(6)
        << "est" << std::setw(10) << "coef" << std::right << std::setw(12) << "mean"
        << std::setw(14) << "var(x1e3)" << std::setw(14) << "mse(x1e3)" << "\n";
    for (const auto& r : table.rows) {
        out << std::left << std::setw(10) << r.scenario << std::setw(24)
            << strategy_label(r.strategy) << std::setw(6) << r.estimator << std::setw(10)
            << r.coefficient << std::right << std::fixed << std::setprecision(4) << std::setw(12)
            << r.mean << std::setw(14) << r.variance * 1e3 << std::setw(14) << r.mse * 1e3
            << "\n";
        out.unsetf(std::ios::fixed);
    }
    if (!table.ere.empty()) {
        out << "\n" << std::left << std::setw(10) << "scenario" << std::setw(6) << "est"
            << std::setw(24) << "strategy" << std::right << std::setw(8) << "ERE" << "\n";
        for (const auto& e : table.ere) {
            out << std::left << std::setw(10) << e.scenario << std::setw(6) << e.estimator
                << std::setw(24) << strategy_label(e.strategy) << std::right << std::fixed
                << std::setprecision(2) << std::setw(8) << e.ere << "\n";
            out.unsetf(std::ios::fixed);
        }
    }
    if (table.failed_replicates > 0)
        out << "\nexcluded replicates: " << table.failed_replicates << " of "
            << table.total_replicates << "\n";
    return out.str();
}

std::vector<ResultRow> parse_result_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::string line;
    std::getline(in, line);  // header
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split(line, ',');
        if (f.size() != 8) throw ConfigError("malformed result CSV row");
        ResultRow r;
        r.scenario = f[0];
        r.strategy = std::stoi(f[1]);
        r.estimator = f[2];
        r.coefficient = f[3];
        r.mean = std::stod(f[4]);
        r.variance = std::stod(f[5]);
        r.mse = std::stod(f[6]);
        r.replicates = std::stoi(f[7]);
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

// `key value` pairs, one per line; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::stringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        std::string rest;
        std::getline(ss, rest);
        auto start = rest.find_first_not_of(" \t=");
        rest = start == std::string::npos ? "" : rest.substr(start);
        while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\t' || rest.back() == '\r'))
            rest.pop_back();
        kv.emplace_back(key, rest);
    }
    return kv;
}

ModelSpec parse_model(const std::string& text) {
    auto tilde = text.find('~');
    if (tilde == std::string::npos) throw ConfigError("model must look like 'Y ~ X1+X2'");
    ModelSpec m;
    {
        std::stringstream ss(text.substr(0, tilde));
        ss >> m.outcome;
    }
    for (auto& tok : split(text.substr(tilde + 1), '+')) {
        std::stringstream ss(tok);
        std::string name;
        ss >> name;
        if (!name.empty()) m.covariates.push_back(name);
    }
    if (m.outcome.empty() || m.covariates.empty()) throw ConfigError("malformed model spec");
    return m;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& path) {
    ExperimentConfig cfg;
    bool have_estimators = false;
    for (const auto& [key, value] : read_kv_file(path)) {
        if (key == "scenarios") {
            cfg.scenario_ids = split(value, ',');
        } else if (key == "strategies") {
            cfg.strategies.clear();
            for (auto& t : split(value, ',')) cfg.strategies.push_back(std::stoi(t));
        } else if (key == "replicates") {
            cfg.replicates = std::stoi(value);
        } else if (key == "seed") {
            cfg.base_seed = std::stoull(value);
        } else if (key == "estimators") {
            cfg.run_ipw = cfg.run_gr = false;
            for (auto& t : split(value, ',')) {
                if (t == "IPW" || t == "ipw") cfg.run_ipw = true;
                else if (t == "GR" || t == "gr") cfg.run_gr = true;
                else throw ConfigError("unknown estimator '" + t + "'");
            }
            have_estimators = true;
        } else if (key == "waves") {
            cfg.waves = std::stoi(value);
        } else if (key == "jobs") {
            cfg.jobs = std::stoi(value);
        } else if (key == "output") {
            cfg.output_dir = value;
        } else if (key == "n_units") {
            cfg.n_units = std::stoll(value);
        } else if (key == "budget") {
            cfg.budget = std::stoll(value);
        } else if (key == "max_failure_rate") {
            cfg.max_failure_rate = std::stod(value);
        } else {
            throw ConfigError("unknown experiment config key '" + key + "'");
        }
    }
    (void)have_estimators;
    return cfg;
}

DesignJobConfig parse_design_config(const std::string& path) {
    DesignJobConfig cfg;
    for (const auto& [key, value] : read_kv_file(path)) {
        if (key == "model") {
            cfg.models.push_back(parse_model(value));
        } else if (key == "proxy_model") {
            cfg.proxy_models.push_back(parse_model(value));
        } else if (key == "tracked") {
            for (auto& t : split(value, ',')) {
                auto parts = split(t, ':');
                if (parts.size() != 3) throw ConfigError("tracked must be model:coef:label");
                cfg.tracked.push_back({std::stoi(parts[0]), std::stoi(parts[1]), parts[2]});
            }
        } else if (key == "stratify") {
            std::stringstream ss(value);
            std::string tok;
            while (ss >> tok) {
                auto parts = split(tok, ':');
                if (parts.size() != 2) throw ConfigError("stratify entries must be column:kind");
                StratumVariable v;
                v.column = parts[0];
                if (parts[1] == "binary") {
                    v.kind = StratumVariable::Kind::Binary;
                } else if (parts[1] == "median") {
                    v.kind = StratumVariable::Kind::Quantile;
                    v.n_bins = 2;
                } else if (parts[1] == "tertile") {
                    v.kind = StratumVariable::Kind::Quantile;
                    v.n_bins = 3;
                } else {
                    throw ConfigError("stratify kind must be binary|median|tertile");
                }
                cfg.stratification.variables.push_back(std::move(v));
            }
        } else if (key == "case_control_outcomes") {
            cfg.case_control_outcomes = split(value, ',');
        } else if (key == "strategy") {
            if (value == "case-control") cfg.strategy.strategy = Strategy::CaseControl;
            else if (value == "simultaneous") cfg.strategy.strategy = Strategy::Simultaneous;
            else if (value == "sequential") cfg.strategy.strategy = Strategy::Sequential;
            else if (value == "a-optimal") cfg.strategy.strategy = Strategy::AOptimal;
            else throw ConfigError("unknown strategy '" + value + "'");
        } else if (key == "optimality") {
            if (value == "IPW" || value == "ipw") cfg.strategy.optimality = Optimality::IPW;
            else if (value == "GR" || value == "gr") cfg.strategy.optimality = Optimality::GR;
            else throw ConfigError("optimality must be IPW or GR");
        } else if (key == "waves") {
            cfg.strategy.waves = std::stoi(value);
        } else if (key == "budget") {
            cfg.strategy.budget = std::stoll(value);
        } else if (key == "min_per_stratum") {
            cfg.strategy.min_per_stratum = std::stoll(value);
        } else if (key == "seed") {
            cfg.strategy.rng_seed = std::stoull(value);
        } else if (key == "order") {
            for (auto& t : split(value, ',')) cfg.strategy.sequential_order.push_back(std::stoi(t));
        } else if (key == "weights") {
            cfg.strategy.weights.a.clear();
            for (auto& t : split(value, ',')) cfg.strategy.weights.a.push_back(std::stod(t));
        } else {
            throw ConfigError("unknown design config key '" + key + "'");
        }
    }
    if (cfg.models.empty() || cfg.tracked.empty())
        throw ConfigError("design config needs at least one model and one tracked coefficient");
    if (cfg.proxy_models.size() != cfg.models.size())
        throw ConfigError("design config needs one proxy_model per model");
    return cfg;
}

DesignRun run_design_job(SamplingFrame& frame, const DesignJobConfig& config) {
    if (frame.n_strata() == 0) {
        if (config.stratification.variables.empty())
            throw ConfigError("frame has no strata and no stratify rule was given");
        build_strata(frame, config.stratification);
    }
    std::vector<std::size_t> all_units(frame.n_units());
    std::iota(all_units.begin(), all_units.end(), 0);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(frame.n_units()));
    EstimationResult phase1 =
        ipw_estimate(frame, all_units, ones, config.proxy_models, config.tracked);
    if (!phase1.ok) throw EstimError("phase 1 proxy model fit did not converge");

    DesignInputs inputs;
    inputs.frame = &frame;
    inputs.models = config.models;
    inputs.tracked = config.tracked;
    inputs.hstar = phase1.influence;
    inputs.case_control_outcomes = config.case_control_outcomes;
    return run_design(inputs, config.strategy);
}

}  // namespace mwd
