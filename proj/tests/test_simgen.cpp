#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "mwd/estim.hpp"
#include "mwd/simgen.hpp"

using namespace mwd;

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double corr(const std::vector<double>& a, const std::vector<double>& b) {
    double ma = mean_of(a), mb = mean_of(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("preset catalogue covers the ten cohort configurations") {
    auto ids = scenario_ids();
    CHECK(ids.size() == 10);
    for (const auto& id : ids) {
        ScenarioSpec s = scenario_preset(id);
        CHECK(s.id == id);
        CHECK(s.n_units == 10000);
        CHECK(s.phase2_budget == 1000);
        CHECK(!s.models.empty());
        CHECK(!s.tracked.empty());
        CHECK(s.models.size() == s.proxy_models.size());
    }
    CHECK_THROWS(scenario_preset("definitely-not-a-scenario"));
}

TEST_CASE("generated cohorts are reproducible and seed-sensitive") {
    ScenarioSpec spec = scenario_preset("2O-A");
    spec.n_units = 2000;
    SamplingFrame a = gen_frame(spec, 7);
    SamplingFrame b = gen_frame(spec, 7);
    SamplingFrame c = gen_frame(spec, 8);
    CHECK(a.column("X1") == b.column("X1"));
    CHECK(a.column("Y1") == b.column("Y1"));
    CHECK(a.column("X1") != c.column("X1"));
}

TEST_CASE("binary standardization is exact") {
    ScenarioSpec spec = scenario_preset("2O-A");
    SamplingFrame f = gen_frame(spec, 3);
    const auto& z = f.column("Z");
    double m = mean_of(z);
    double v = 0.0;
    for (double x : z) v += (x - m) * (x - m);
    v /= static_cast<double>(z.size());
    CHECK(std::abs(m) <= 1e-12);
    CHECK(std::abs(v - 1.0) <= 1e-9);
}

TEST_CASE("outcome prevalences for the correlated-outcome cohorts") {
    double y1 = 0.0, y2 = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        ScenarioSpec spec = scenario_preset(s % 2 == 0 ? "2O-C" : "2O-D");
        SamplingFrame f = gen_frame(spec, static_cast<std::uint64_t>(1000 + s));
        y1 += mean_of(f.column("Y1"));
        y2 += mean_of(f.column("Y2"));
    }
    y1 /= seeds;
    y2 /= seeds;
    CHECK(std::abs(y1 - 0.2) <= 0.03);
    CHECK(std::abs(y2 - 0.4) <= 0.03);
}

TEST_CASE("error-free configuration reproduces the true variables") {
    ScenarioSpec spec = scenario_preset("2O-A");
    spec.n_units = 3000;
    spec.y1_error = BinaryErrorModel{1.0, 1.0};
    spec.y2_error = BinaryErrorModel{1.0, 1.0};
    spec.z_error = BinaryErrorModel{1.0, 1.0};
    spec.var_u_x1 = 0.0;
    spec.var_u_x2 = 0.0;
    SamplingFrame f = gen_frame(spec, 5);
    CHECK(f.column("X1") == f.column("X1s"));
    CHECK(f.column("X2") == f.column("X2s"));
    CHECK(f.column("Y1") == f.column("Y1s"));
    CHECK(f.column("Y2") == f.column("Y2s"));
}

TEST_CASE("misclassification hits the requested sensitivity and specificity") {
    std::vector<double> truth(20000);
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = i % 2 ? 1.0 : 0.0;
    auto proxy = misclassify(truth, 0.9, 0.95, 11);
    long long tp = 0, pos = 0, tn = 0, neg = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == 1.0) {
            ++pos;
            if (proxy[i] == 1.0) ++tp;
        } else {
            ++neg;
            if (proxy[i] == 0.0) ++tn;
        }
    }
    CHECK(static_cast<double>(tp) / pos == doctest::Approx(0.9).epsilon(0.02));
    CHECK(static_cast<double>(tn) / neg == doctest::Approx(0.95).epsilon(0.02));
}

TEST_CASE("covariate correlation structure is realized") {
    ScenarioSpec spec = scenario_preset("2P-B");  // strongly correlated exposures
    SamplingFrame f = gen_frame(spec, 21);
    CHECK(corr(f.column("X1"), f.column("X2")) ==
          doctest::Approx(spec.cor_x1_x2).epsilon(0.15));

    ScenarioSpec lo = scenario_preset("2P-A");
    SamplingFrame g = gen_frame(lo, 21);
    CHECK(std::abs(corr(g.column("X1"), g.column("X2")) - lo.cor_x1_x2) < 0.05);
}

TEST_CASE("fits on the true variables recover the generating coefficients") {
    for (const std::string& id : {std::string("2O-A"), std::string("2P-C")}) {
        ScenarioSpec spec = scenario_preset(id);
        SamplingFrame f = gen_frame(spec, 31);
        std::vector<std::size_t> units(f.n_units());
        std::iota(units.begin(), units.end(), std::size_t{0});
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(f.n_units()));
        for (std::size_t m = 0; m < spec.models.size(); ++m) {
            Eigen::MatrixXd X = design_matrix(f, spec.models[m], units);
            Eigen::VectorXd y = response_vector(f, spec.models[m], units);
            LogisticFit fit = fit_logistic(X, y, ones);
            REQUIRE(fit.converged);
            Eigen::MatrixXd cov = fit.info.inverse();
            const std::vector<double>& truth =
                (spec.models.size() == 2 && m == 0) ? spec.outcome1_coefs : spec.outcome2_coefs;
            for (Eigen::Index j = 0; j < fit.coef.size(); ++j) {
                double se = std::sqrt(cov(j, j));
                CHECK(std::abs(fit.coef[j] - truth[static_cast<std::size_t>(j)]) <= 3.0 * se);
            }
        }
    }
}
