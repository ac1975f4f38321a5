// Command-line front end: config-driven experiments, one-shot allocation
// from stratum summaries, and single multiwave designs on user frames.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mwd/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct SummaryCsv {
    std::vector<mwd::StratumSummary> strata;
    std::size_t n_params = 0;
};

// Columns: stratum,N,sd_p1..sd_pP
SummaryCsv read_summary_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mwd::ConfigError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw mwd::ConfigError("empty summary CSV");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) header.push_back(tok);
    }
    if (header.size() < 3 || header[0] != "stratum" || header[1] != "N")
        throw mwd::ConfigError("summary CSV must start with columns stratum,N,sd_p1..");
    SummaryCsv out;
    out.n_params = header.size() - 2;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> fields;
        while (std::getline(ss, tok, ',')) fields.push_back(tok);
        if (fields.size() != header.size())
            throw mwd::ConfigError("summary CSV row has wrong field count");
        mwd::StratumSummary s;
        s.stratum_id = std::stoi(fields[0]);
        s.pop_size = std::stoll(fields[1]);
        for (std::size_t p = 0; p < out.n_params; ++p)
            s.sd_by_param.push_back(std::stod(fields[2 + p]));
        out.strata.push_back(std::move(s));
    }
    if (out.strata.empty()) throw mwd::ConfigError("summary CSV has no strata");
    return out;
}

int cmd_simulate(const std::string& config_path, const std::string& output_override,
                 int jobs_override) {
    mwd::ExperimentConfig cfg = mwd::parse_experiment_config(config_path);
    if (!output_override.empty()) cfg.output_dir = output_override;
    if (jobs_override > 0) cfg.jobs = jobs_override;
    cfg.validate();
    mwd::ResultTable table = mwd::run_experiment(cfg);
    mwd::emit(table, cfg.output_dir);
    std::cout << mwd::render_text(table);
    std::cout << "\nwrote results to " << cfg.output_dir << "/\n";
    return kExitOk;
}

int cmd_allocate(const std::string& csv_path, long long n, long long min_per_stratum,
                 const std::string& method, const std::vector<double>& weight_values) {
    SummaryCsv summary = read_summary_csv(csv_path);
    mwd::AOptWeights weights;
    weights.a = weight_values.empty() ? mwd::equal_weights(summary.n_params).a : weight_values;
    weights.validate(summary.n_params);

    std::vector<double> real_counts;
    std::vector<long long> int_counts;
    double objective = 0.0;
    if (method == "neyman") {
        if (summary.n_params != 1)
            throw mwd::ConfigError("method neyman needs exactly one sd column; use aopt-neyman");
        auto a = mwd::neyman(summary.strata, 0, static_cast<double>(n));
        real_counts = a.counts;
        objective = a.objective_value;
    } else if (method == "wright") {
        if (summary.n_params != 1)
            throw mwd::ConfigError("method wright needs exactly one sd column; use aopt-wright");
        auto a = mwd::wright(summary.strata, 0, n, min_per_stratum);
        int_counts = a.counts;
        objective = a.objective_value;
    } else if (method == "aopt-neyman") {
        auto a = mwd::a_optimal_neyman(summary.strata, weights, static_cast<double>(n));
        real_counts = a.counts;
        objective = a.objective_value;
    } else if (method == "aopt-wright") {
        auto a = mwd::a_optimal_wright(summary.strata, weights, n, min_per_stratum);
        int_counts = a.counts;
        objective = a.objective_value;
    } else {
        throw mwd::ConfigError("unknown method '" + method + "'");
    }

    std::cout << "stratum,N,n\n";
    for (std::size_t k = 0; k < summary.strata.size(); ++k) {
        std::cout << summary.strata[k].stratum_id << "," << summary.strata[k].pop_size << ",";
        if (!int_counts.empty())
            std::cout << int_counts[k];
        else
            std::cout << std::setprecision(17) << real_counts[k];
        std::cout << "\n";
    }
    std::cerr << "objective " << std::setprecision(17) << objective << "\n";
    return kExitOk;
}

int cmd_design(const std::string& frame_path, const std::string& config_path,
               const std::string& output_path) {
    mwd::DesignJobConfig cfg = mwd::parse_design_config(config_path);
    mwd::SamplingFrame frame = mwd::read_frame_csv(frame_path);
    mwd::DesignRun run = mwd::run_design_job(frame, cfg);
    if (!run.ok) throw mwd::EstimError("design failed: " + run.failure);

    std::cout << "wave,stratum,target,drawn\n";
    for (const auto& wave : run.waves)
        for (std::size_t k = 0; k < wave.draws.size(); ++k)
            std::cout << wave.wave << "," << (k + 1) << "," << wave.target[k] << ","
                      << wave.draws[k] << "\n";
    std::cout << std::setprecision(10);
    for (std::size_t p = 0; p < cfg.tracked.size(); ++p)
        std::cout << "# " << cfg.tracked[p].label
                  << " ipw=" << run.beta_ipw[static_cast<Eigen::Index>(p)]
                  << " gr=" << run.beta_gr[static_cast<Eigen::Index>(p)] << "\n";

    if (!output_path.empty()) {
        // Persist the frame with stratum labels and wave marks for audit.
        mwd::SamplingFrame annotated = frame;
        std::vector<double> wave_col(annotated.n_units());
        for (std::size_t i = 0; i < annotated.n_units(); ++i)
            wave_col[i] = static_cast<double>(annotated.sampled_waves()[i]);
        annotated.add_column("sampled_wave", std::move(wave_col));
        mwd::write_frame_csv(annotated, output_path, true);
        std::cerr << "wrote sampled frame to " << output_path << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiwave two-phase sampling designs: allocation, calibration, simulation"};
    app.require_subcommand(1);

    std::string sim_config, sim_output;
    int sim_jobs = 0;
    auto* simulate = app.add_subcommand("simulate", "Run a config-driven experiment");
    simulate->add_option("config", sim_config, "experiment config file")->required();
    simulate->add_option("--output", sim_output, "override output directory");
    simulate->add_option("--jobs", sim_jobs, "worker threads (0 = auto)");

    std::string alloc_csv, alloc_method = "wright";
    long long alloc_n = 0, alloc_min = 2;
    std::vector<double> alloc_weights;
    auto* allocate = app.add_subcommand("allocate", "One-shot allocation from stratum summaries");
    allocate->add_option("csv", alloc_csv, "CSV with columns stratum,N,sd_p1..sd_pP")->required();
    allocate->add_option("--n", alloc_n, "total sample size")->required();
    allocate->add_option("--min-per-stratum", alloc_min, "minimum units per stratum");
    allocate->add_option("--weights", alloc_weights, "importance weights (sum to 1)");
    allocate->add_option("--method", alloc_method, "neyman|wright|aopt-neyman|aopt-wright");

    std::string design_frame, design_config, design_output;
    auto* design = app.add_subcommand("design", "Run one multiwave design on a CSV frame");
    design->add_option("frame", design_frame, "unit-level CSV frame")->required();
    design->add_option("config", design_config, "design config file")->required();
    design->add_option("--output", design_output, "write the sampled frame here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim_config, sim_output, sim_jobs);
        if (allocate->parsed())
            return cmd_allocate(alloc_csv, alloc_n, alloc_min, alloc_method, alloc_weights);
        if (design->parsed()) return cmd_design(design_frame, design_config, design_output);
    } catch (const mwd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const mwd::FrameError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const mwd::AllocError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const mwd::EstimError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitConfig;
}
