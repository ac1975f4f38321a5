#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mwd/harness.hpp"

using namespace mwd;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.scenario_ids = {"2O-A"};
    cfg.strategies = {5};
    cfg.replicates = 2;
    cfg.jobs = 1;
    return cfg;
}

}  // namespace

TEST_CASE("strategy index mapping") {
    CHECK(strategy_of_index(1) == Strategy::CaseControl);
    CHECK(strategy_of_index(2) == Strategy::Simultaneous);
    CHECK(strategy_of_index(3) == Strategy::Sequential);
    CHECK(strategy_of_index(4) == Strategy::Sequential);
    CHECK(strategy_of_index(5) == Strategy::AOptimal);
    CHECK_THROWS_AS(strategy_of_index(0), ConfigError);
    CHECK_THROWS_AS(strategy_of_index(6), ConfigError);
}

TEST_CASE("config validation rejects malformed experiments") {
    ExperimentConfig cfg = tiny_config();
    cfg.strategies.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.replicates = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.run_ipw = cfg.run_gr = false;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.scenario_ids = {"nope"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("two-replicate smoke run produces finite cells and unit self-efficiency") {
    ExperimentConfig cfg = tiny_config();
    ResultTable t = run_experiment(cfg);
    CHECK(t.rows.size() == 4);  // two estimators x two coefficients
    for (const auto& r : t.rows) {
        CHECK(std::isfinite(r.mean));
        CHECK(std::isfinite(r.variance));
        CHECK(r.mse >= r.variance - 1e-12);
        CHECK(r.replicates == 2);
    }
    for (const auto& e : t.ere)
        if (e.strategy == 5) CHECK(e.ere == doctest::Approx(1.0));
}

TEST_CASE("experiments are exactly repeatable") {
    ExperimentConfig cfg = tiny_config();
    cfg.strategies = {1, 5};
    cfg.replicates = 3;
    ResultTable a = run_experiment(cfg);
    ResultTable b = run_experiment(cfg);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].mean == b.rows[i].mean);
        CHECK(a.rows[i].variance == b.rows[i].variance);
        CHECK(a.rows[i].mse == b.rows[i].mse);
    }
}

TEST_CASE("emitted files round-trip and follow the file-count contract") {
    ExperimentConfig cfg = tiny_config();
    cfg.scenario_ids = {"2O-A", "2P-A"};
    ResultTable t = run_experiment(cfg);
    const std::string dir = "/tmp/mwd_emit_test";
    fs::remove_all(dir);
    emit(t, dir);
    CHECK(fs::exists(dir + "/2O-A.csv"));
    CHECK(fs::exists(dir + "/2P-A.csv"));
    CHECK(fs::exists(dir + "/ere.csv"));
    CHECK(fs::exists(dir + "/long.csv"));
    CHECK(fs::exists(dir + "/results.txt"));

    auto rows = parse_result_csv(dir + "/2O-A.csv");
    std::size_t matched = 0;
    for (const auto& r : rows) {
        for (const auto& orig : t.rows) {
            if (orig.scenario == r.scenario && orig.strategy == r.strategy &&
                orig.estimator == r.estimator && orig.coefficient == r.coefficient) {
                CHECK(r.mean == orig.mean);
                CHECK(r.variance == orig.variance);
                CHECK(r.mse == orig.mse);
                ++matched;
            }
        }
    }
    CHECK(matched == rows.size());
    fs::remove_all(dir);

    ResultTable empty;
    CHECK_THROWS_AS(emit(empty, dir), ConfigError);
    CHECK(!fs::exists(dir));  // no partial output on error
}

TEST_CASE("experiment config files parse into the documented fields") {
    const std::string path = "/tmp/mwd_experiment_config.txt";
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "scenarios 2O-A,2P-B\n";
        out << "strategies 1,5\n";
        out << "replicates 12\n";
        out << "seed 99\n";
        out << "estimators gr\n";
        out << "jobs 2\n";
        out << "output /tmp/somewhere\n";
        out << "budget 400\n";
    }
    ExperimentConfig cfg = parse_experiment_config(path);
    CHECK(cfg.scenario_ids == std::vector<std::string>{"2O-A", "2P-B"});
    CHECK(cfg.strategies == std::vector<int>{1, 5});
    CHECK(cfg.replicates == 12);
    CHECK(cfg.base_seed == 99);
    CHECK(!cfg.run_ipw);
    CHECK(cfg.run_gr);
    CHECK(cfg.jobs == 2);
    CHECK(cfg.output_dir == "/tmp/somewhere");
    REQUIRE(cfg.budget.has_value());
    CHECK(*cfg.budget == 400);
    std::remove(path.c_str());

    {
        std::ofstream out(path);
        out << "unknown_key 1\n";
    }
    CHECK_THROWS_AS(parse_experiment_config(path), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("design config files drive a full run on a CSV frame") {
    // Persist a generated cohort and re-ingest it as a user frame.
    ScenarioSpec spec = scenario_preset("2P-A");
    SamplingFrame f = gen_frame(spec, 55);
    const std::string frame_path = "/tmp/mwd_user_frame.csv";
    write_frame_csv(f, frame_path, false);

    const std::string cfg_path = "/tmp/mwd_design_config.txt";
    {
        std::ofstream out(cfg_path);
        out << "model Y2 ~ X1+X2+Z\n";
        out << "proxy_model Y2s ~ X1s+X2s+Zs\n";
        out << "tracked 0:1:beta12,0:2:beta22\n";
        out << "stratify Y2s:binary X1s:median X2s:median\n";
        out << "strategy a-optimal\n";
        out << "optimality GR\n";
        out << "budget 600\n";
        out << "seed 17\n";
    }
    DesignJobConfig cfg = parse_design_config(cfg_path);
    CHECK(cfg.models.size() == 1);
    CHECK(cfg.models[0].outcome == "Y2");
    CHECK(cfg.tracked.size() == 2);
    CHECK(cfg.strategy.strategy == Strategy::AOptimal);
    CHECK(cfg.strategy.budget == 600);

    SamplingFrame user = read_frame_csv(frame_path);
    DesignRun run = run_design_job(user, cfg);
    CHECK(run.ok);
    CHECK(run.sampled.size() == 600);
    std::remove(frame_path.c_str());
    std::remove(cfg_path.c_str());
}
