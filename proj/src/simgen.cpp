#include "mwd/simgen.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "mwd/rng.hpp"

namespace mwd {

namespace {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

void check_prob(double p, const char* what) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " must be in (0,1]");
}

// Standardize in place to mean 0, variance 1 (denominator N).
void standardize(std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    double sd = std::sqrt(ss / static_cast<double>(v.size()));
    if (sd == 0.0) throw std::runtime_error("cannot standardize a constant column");
    for (double& x : v) x = (x - m) / sd;
}

ScenarioSpec base_spec(const std::string& id) {
    ScenarioSpec s;
    s.id = id;
    return s;
}

void setup_2o(ScenarioSpec& s) {
    s.models = {{"Y1", {"X1", "X2", "Z", "Y2"}}, {"Y2", {"X1", "X2", "Z"}}};
    s.proxy_models = {{"Y1s", {"X1s", "X2s", "Zs", "Y2s"}}, {"Y2s", {"X1s", "X2s", "Zs"}}};
    s.tracked = {{0, 1, "beta11"}, {1, 1, "beta12"}};
    s.stratification.variables = {{"Y1s", StratumVariable::Kind::Binary, 2},
                                  {"Y2s", StratumVariable::Kind::Binary, 2},
                                  {"X1s", StratumVariable::Kind::Quantile, 2}};
    s.case_control_outcomes = {"Y1s", "Y2s"};
}

void setup_2p(ScenarioSpec& s) {
    s.models = {{"Y2", {"X1", "X2", "Z"}}};
    s.proxy_models = {{"Y2s", {"X1s", "X2s", "Zs"}}};
    s.tracked = {{0, 1, "beta12"}, {0, 2, "beta22"}};
    s.stratification.variables = {{"Y2s", StratumVariable::Kind::Binary, 2},
                                  {"X1s", StratumVariable::Kind::Quantile, 2},
                                  {"X2s", StratumVariable::Kind::Quantile, 2}};
    s.case_control_outcomes = {"Y2s"};
}

void setup_2o2p(ScenarioSpec& s) {
    s.models = {{"Y1", {"X1", "X2", "Z", "Y2"}}, {"Y2", {"X1", "X2", "Z"}}};
    s.proxy_models = {{"Y1s", {"X1s", "X2s", "Zs", "Y2s"}}, {"Y2s", {"X1s", "X2s", "Zs"}}};
    s.tracked = {{0, 1, "beta11"}, {0, 2, "beta21"}, {1, 1, "beta12"}, {1, 2, "beta22"}};
    s.stratification.variables = {{"Y1s", StratumVariable::Kind::Binary, 2},
                                  {"Y2s", StratumVariable::Kind::Binary, 2},
                                  {"X1s", StratumVariable::Kind::Quantile, 2},
                                  {"X2s", StratumVariable::Kind::Quantile, 2}};
    s.case_control_outcomes = {"Y1s", "Y2s"};
}

}  // namespace

ScenarioSpec scenario_preset(const std::string& id) {
    ScenarioSpec s = base_spec(id);
    const bool high_error = id.size() && (id.back() == 'B' || id.back() == 'D');
    if (id == "2O-A" || id == "2O-B" || id == "2O-C" || id == "2O-D") {
        const bool high_corr = id.back() == 'C' || id.back() == 'D';
        if (high_corr) {
            s.outcome1_coefs = {-3.1, 0.4, 1.0, 0.7, 1.9};
            s.outcome2_coefs = {-0.8, 0.2, 1.3, 0.8};
        } else {
            s.outcome1_coefs = {-1.5, 0.4, 0.0, 0.3, 0.0};
            s.outcome2_coefs = {-0.5, 0.2, 0.5, 0.0};
        }
        s.cor_x1_x2 = 0.0;
        if (high_error) {
            s.y1_error = BinaryErrorModel{0.85, 0.90};
            s.y2_error = BinaryErrorModel{0.80, 0.85};
            s.var_u_x1 = 0.5;
            s.var_u_x2 = 0.1;
        } else {
            s.y1_error = BinaryErrorModel{0.95, 0.99};
            s.y2_error = BinaryErrorModel{0.90, 0.95};
            s.var_u_x1 = 0.15;
            s.var_u_x2 = 0.1;
        }
        setup_2o(s);
    } else if (id == "2P-A" || id == "2P-B" || id == "2P-C" || id == "2P-D") {
        const bool high_corr = id.back() == 'C' || id.back() == 'D';
        s.outcome2_coefs = {-2.1, 0.3, 0.7, 0.7};
        s.cor_x1_x2 = high_corr ? 0.65 : 0.05;
        if (high_error) {
            s.y2_error = BinaryErrorModel{0.85, 0.90};
            s.var_u_x1 = 0.4;
            s.var_u_x2 = 0.6;
        } else {
            s.y2_error = BinaryErrorModel{0.90, 0.95};
            s.var_u_x1 = 0.15;
            s.var_u_x2 = 0.5;
        }
        setup_2p(s);
    } else if (id == "2O2P-A" || id == "2O2P-B") {
        s.outcome1_coefs = {-1.5, 0.4, 0.6, 0.3, 0.3};
        s.outcome2_coefs = {-2.1, 0.3, 0.7, 0.7};
        s.cor_x1_x2 = 0.3;
        if (high_error) {
            s.y1_error = BinaryErrorModel{0.85, 0.90};
            s.y2_error = BinaryErrorModel{0.80, 0.85};
            s.var_u_x1 = 0.4;
            s.var_u_x2 = 0.6;
        } else {
            s.y1_error = BinaryErrorModel{0.95, 0.99};
            s.y2_error = BinaryErrorModel{0.90, 0.95};
            s.var_u_x1 = 0.15;
            s.var_u_x2 = 0.5;
        }
        setup_2o2p(s);
    } else {
        throw std::invalid_argument("unknown scenario id '" + id + "'");
    }
    return s;
}

std::vector<std::string> scenario_ids() {
    return {"2O-A", "2O-B", "2O-C", "2O-D", "2P-A", "2P-B", "2P-C", "2P-D", "2O2P-A", "2O2P-B"};
}

std::vector<double> misclassify(const std::vector<double>& truth, double sensitivity,
                                double specificity, std::uint64_t seed) {
    check_prob(sensitivity, "sensitivity");
    check_prob(specificity, "specificity");
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> proxy(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double u = unif(rng);
        if (truth[i] != 0.0)
            proxy[i] = u <= sensitivity ? 1.0 : 0.0;
        else
            proxy[i] = u <= specificity ? 0.0 : 1.0;
    }
    return proxy;
}

SamplingFrame gen_frame(const ScenarioSpec& spec, std::uint64_t seed) {
    const std::size_t N = static_cast<std::size_t>(spec.n_units);
    const bool has_y1 = !spec.outcome1_coefs.empty();
    if (spec.outcome2_coefs.size() != 4)
        throw std::invalid_argument("outcome 2 model needs 4 coefficients");
    if (has_y1 && spec.outcome1_coefs.size() != 5)
        throw std::invalid_argument("outcome 1 model needs 5 coefficients");

    Eigen::Matrix3d cov;
    cov << 1.0, spec.cor_x1_x2, spec.cor_x1_zlat,
           spec.cor_x1_x2, 1.0, spec.cor_x2_zlat,
           spec.cor_x1_zlat, spec.cor_x2_zlat, 1.0;
    Eigen::LLT<Eigen::Matrix3d> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("covariate covariance matrix is not positive definite");
    Eigen::Matrix3d L = llt.matrixL();

    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<double> x1(N), x2(N), zbin(N);
    for (std::size_t i = 0; i < N; ++i) {
        Eigen::Vector3d g(gauss(rng), gauss(rng), gauss(rng));
        Eigen::Vector3d v = L * g;
        x1[i] = v[0];
        x2[i] = v[1];
        zbin[i] = v[2] > 0.0 ? 1.0 : 0.0;  // dichotomized at the latent median
    }
    std::vector<double> z = zbin;
    standardize(z);

    std::vector<double> y2(N), y1(has_y1 ? N : 0);
    const auto& b2 = spec.outcome2_coefs;
    for (std::size_t i = 0; i < N; ++i) {
        const double p2 = expit(b2[0] + b2[1] * x1[i] + b2[2] * x2[i] + b2[3] * z[i]);
        y2[i] = unif(rng) < p2 ? 1.0 : 0.0;
    }
    if (has_y1) {
        const auto& b1 = spec.outcome1_coefs;
        for (std::size_t i = 0; i < N; ++i) {
            const double p1 =
                expit(b1[0] + b1[1] * x1[i] + b1[2] * x2[i] + b1[3] * z[i] + b1[4] * y2[i]);
            y1[i] = unif(rng) < p1 ? 1.0 : 0.0;
        }
    }

    // Correlated additive errors for the continuous proxies.
    std::vector<double> x1s(N), x2s(N);
    {
        const double rho = spec.cor_u_x1_x2;
        const double s1 = std::sqrt(spec.var_u_x1), s2 = std::sqrt(spec.var_u_x2);
        const double c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
        for (std::size_t i = 0; i < N; ++i) {
            const double g1 = gauss(rng), g2 = gauss(rng);
            x1s[i] = x1[i] + s1 * g1;
            x2s[i] = x2[i] + s2 * (rho * g1 + c * g2);
        }
    }

    // Misclassification of the binary proxies through a shared Gaussian
    // copula so the flip events are correlated across variables.
    std::vector<double> y1s(has_y1 ? N : 0), y2s(N), zsbin(N);
    {
        const double r = spec.cor_flip_latents;
        Eigen::Matrix3d ccov;
        ccov << 1.0, r, r, r, 1.0, r, r, r, 1.0;
        Eigen::LLT<Eigen::Matrix3d> cllt(ccov);
        if (cllt.info() != Eigen::Success)
            throw std::invalid_argument("flip-latent correlation matrix is not positive definite");
        Eigen::Matrix3d Lc = cllt.matrixL();
        auto flip = [](double truth, double u, const BinaryErrorModel& em) {
            if (truth != 0.0) return u <= em.sensitivity ? 1.0 : 0.0;
            return u <= em.specificity ? 0.0 : 1.0;
        };
        for (std::size_t i = 0; i < N; ++i) {
            Eigen::Vector3d g(gauss(rng), gauss(rng), gauss(rng));
            Eigen::Vector3d v = Lc * g;
            if (has_y1) {
                check_prob(spec.y1_error->sensitivity, "sens(Y1)");
                check_prob(spec.y1_error->specificity, "spec(Y1)");
                y1s[i] = flip(y1[i], std_normal_cdf(v[0]), *spec.y1_error);
            }
            y2s[i] = flip(y2[i], std_normal_cdf(v[1]),
                          spec.y2_error.value_or(BinaryErrorModel{}));
            zsbin[i] = flip(zbin[i], std_normal_cdf(v[2]), spec.z_error);
        }
    }
    std::vector<double> zs = zsbin;
    standardize(zs);

    SamplingFrame frame(N);
    frame.add_column("X1", std::move(x1));
    frame.add_column("X2", std::move(x2));
    frame.add_column("Z", std::move(z));
    frame.add_column("Y2", std::move(y2));
    if (has_y1) frame.add_column("Y1", std::move(y1));
    frame.add_column("X1s", std::move(x1s));
    frame.add_column("X2s", std::move(x2s));
    frame.add_column("Zs", std::move(zs));
    frame.add_column("Y2s", std::move(y2s));
    if (has_y1) frame.add_column("Y1s", std::move(y1s));
    return frame;
}

}  // namespace mwd
