#include "mwd/estim.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "mwd/kernels.hpp"

namespace mwd {

namespace {

double log1pexp(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& w) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        ll += w[i] * (y[i] * eta[i] - log1pexp(eta[i]));
    return ll;
}

// Gram matrix X^T diag(ww) X through the dispatched dot kernels.
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& ww) {
    const Eigen::Index d = X.cols();
    const std::size_t n = static_cast<std::size_t>(X.rows());
    Eigen::MatrixXd G(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index l = j; l < d; ++l) {
            double v = kernels::weighted_dot(ww.data(), X.col(j).data(), X.col(l).data(), n);
            G(j, l) = v;
            G(l, j) = v;
        }
    return G;
}

}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& w, const IrlsOptions& opts) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (y.size() != n || w.size() != n) throw EstimError("fit_logistic: size mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) throw EstimError("fit_logistic: response must be 0/1");
        if (w[i] < 0.0) throw EstimError("fit_logistic: negative weight");
    }
    const double wsum = w.sum();
    if (wsum <= 0.0) throw EstimError("fit_logistic: zero total weight");

    LogisticFit fit;
    fit.coef = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    double ll = log_likelihood(eta, y, w);
    Eigen::VectorXd p(n), ww(n), resid(n);

    for (int it = 1; it <= opts.max_iterations; ++it) {
        fit.iterations = it;
        for (Eigen::Index i = 0; i < n; ++i) {
            p[i] = expit(eta[i]);
            ww[i] = std::max(w[i] * p[i] * (1.0 - p[i]), 1e-300);
            resid[i] = w[i] * (y[i] - p[i]);
        }
        Eigen::VectorXd grad(d);
        for (Eigen::Index j = 0; j < d; ++j)
            grad[j] = kernels::dot(X.col(j).data(), resid.data(), static_cast<std::size_t>(n));
        fit.info = weighted_gram(X, ww);
        if (grad.lpNorm<Eigen::Infinity>() / wsum <= opts.tolerance) {
            fit.converged = true;
            return fit;
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(fit.info);
        if (ldlt.info() != Eigen::Success) throw EstimError("fit_logistic: singular information matrix");
        Eigen::VectorXd step = ldlt.solve(grad);
        if (!step.allFinite()) throw EstimError("fit_logistic: non-finite update (rank deficiency?)");
        // Step halving keeps the likelihood monotone under separation.
        double scale = 1.0;
        for (int half = 0; half < 20; ++half) {
            Eigen::VectorXd cand = fit.coef + scale * step;
            Eigen::VectorXd cand_eta = X * cand;
            double cand_ll = log_likelihood(cand_eta, y, w);
            if (cand_ll >= ll - 1e-12 * std::abs(ll)) {
                fit.coef = cand;
                eta = cand_eta;
                ll = cand_ll;
                break;
            }
            scale *= 0.5;
        }
    }
    // Final score check after the last update.
    for (Eigen::Index i = 0; i < n; ++i) {
        p[i] = expit(eta[i]);
        ww[i] = std::max(w[i] * p[i] * (1.0 - p[i]), 1e-300);
        resid[i] = w[i] * (y[i] - p[i]);
    }
    fit.info = weighted_gram(X, ww);
    Eigen::VectorXd grad(d);
    for (Eigen::Index j = 0; j < d; ++j)
        grad[j] = kernels::dot(X.col(j).data(), resid.data(), static_cast<std::size_t>(n));
    fit.converged = grad.lpNorm<Eigen::Infinity>() / wsum <= opts.tolerance;
    return fit;
}

Eigen::MatrixXd influence(const LogisticFit& fit, const Eigen::MatrixXd& X,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                          const std::vector<int>& tracked_cols) {
    if (!fit.converged) throw EstimError("influence: fit did not converge");
    const Eigen::Index n = X.rows();
    const double wsum = w.sum();
    Eigen::MatrixXd M = fit.info / wsum;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) throw EstimError("influence: singular scaled information");
    Eigen::MatrixXd Minv = ldlt.solve(Eigen::MatrixXd::Identity(M.rows(), M.cols()));
    Eigen::VectorXd eta = X * fit.coef;
    Eigen::MatrixXd h(n, static_cast<Eigen::Index>(tracked_cols.size()));
    Eigen::MatrixXd XM = X * Minv;  // symmetric M
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = y[i] - expit(eta[i]);
        for (std::size_t c = 0; c < tracked_cols.size(); ++c)
            h(i, static_cast<Eigen::Index>(c)) = XM(i, tracked_cols[c]) * r;
    }
    return h;
}

CalibratedWeights rake(const Eigen::VectorXd& base, const Eigen::MatrixXd& aux,
                       const Eigen::VectorXd& targets, const RakeOptions& opts) {
    const Eigen::Index n = aux.rows();
    const Eigen::Index q = aux.cols();
    if (base.size() != n || targets.size() != q) throw EstimError("rake: size mismatch");
    for (Eigen::Index i = 0; i < n; ++i)
        if (base[i] <= 0.0) throw EstimError("rake: base weights must be positive");
    for (Eigen::Index j = 0; j < q; ++j)
        if (!std::isfinite(targets[j])) throw EstimError("rake: non-finite target");

    CalibratedWeights cw;
    cw.base = base;
    cw.target_totals = targets;
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd g(n), wg(n);

    auto violation = [&](const Eigen::VectorXd& achieved) {
        double v = 0.0;
        for (Eigen::Index j = 0; j < q; ++j)
            v = std::max(v, std::abs(achieved[j] - targets[j]) / std::max(1.0, std::abs(targets[j])));
        return v;
    };
    auto evaluate = [&](const Eigen::VectorXd& lam, Eigen::VectorXd& gv, Eigen::VectorXd& wgv) {
        Eigen::VectorXd e = aux * lam;
        for (Eigen::Index i = 0; i < n; ++i) {
            gv[i] = std::exp(e[i]);
            wgv[i] = base[i] * gv[i];
        }
        return (aux.transpose() * wgv).eval();
    };

    Eigen::VectorXd achieved = evaluate(lambda, g, wg);
    double viol = violation(achieved);
    for (int it = 1; it <= opts.max_iterations && viol > opts.tolerance; ++it) {
        cw.iterations = it;
        Eigen::MatrixXd J = weighted_gram(aux, wg);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(J);
        if (ldlt.info() != Eigen::Success) break;
        Eigen::VectorXd step = ldlt.solve(targets - achieved);
        if (!step.allFinite()) break;
        double scale = 1.0;
        for (int half = 0; half < 30; ++half) {
            Eigen::VectorXd cand = lambda + scale * step;
            Eigen::VectorXd cg(n), cwg(n);
            Eigen::VectorXd cand_achieved = evaluate(cand, cg, cwg);
            double cand_viol = violation(cand_achieved);
            if (cand_viol < viol && cand_achieved.allFinite()) {
                lambda = cand;
                g = cg;
                wg = cwg;
                achieved = cand_achieved;
                viol = cand_viol;
                break;
            }
            scale *= 0.5;
            if (half == 29) it = opts.max_iterations;  // stalled
        }
    }
    cw.g = g;
    cw.calibrated = wg;
    cw.achieved_totals = achieved;
    cw.converged = viol <= opts.tolerance * 100.0;  // report at the contract tolerance
    return cw;
}

Eigen::MatrixXd design_matrix(const SamplingFrame& frame, const ModelSpec& model,
                              const std::vector<std::size_t>& units) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(units.size()),
                      static_cast<Eigen::Index>(model.covariates.size() + 1));
    X.col(0).setOnes();
    for (std::size_t c = 0; c < model.covariates.size(); ++c) {
        const auto& col = frame.column(model.covariates[c]);
        for (std::size_t i = 0; i < units.size(); ++i)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c + 1)) = col[units[i]];
    }
    return X;
}

Eigen::VectorXd response_vector(const SamplingFrame& frame, const ModelSpec& model,
                                const std::vector<std::size_t>& units) {
    const auto& col = frame.column(model.outcome);
    Eigen::VectorXd y(static_cast<Eigen::Index>(units.size()));
    for (std::size_t i = 0; i < units.size(); ++i) y[static_cast<Eigen::Index>(i)] = col[units[i]];
    return y;
}

namespace {

EstimationResult estimate_with_weights(const SamplingFrame& frame,
                                       const std::vector<std::size_t>& units,
                                       const Eigen::VectorXd& weights,
                                       const std::vector<ModelSpec>& models,
                                       const std::vector<TrackedCoef>& tracked) {
    EstimationResult res;
    res.tracked.resize(static_cast<Eigen::Index>(tracked.size()));
    res.influence.resize(static_cast<Eigen::Index>(units.size()),
                         static_cast<Eigen::Index>(tracked.size()));
    res.ok = true;
    std::vector<Eigen::MatrixXd> designs;
    std::vector<Eigen::VectorXd> responses;
    for (const auto& m : models) {
        designs.push_back(design_matrix(frame, m, units));
        responses.push_back(response_vector(frame, m, units));
        LogisticFit fit = fit_logistic(designs.back(), responses.back(), weights);
        if (!fit.converged) res.ok = false;
        res.fits.push_back(std::move(fit));
    }
    if (!res.ok) return res;
    for (std::size_t t = 0; t < tracked.size(); ++t) {
        const auto& tc = tracked[t];
        res.tracked[static_cast<Eigen::Index>(t)] =
            res.fits[static_cast<std::size_t>(tc.model)].coef[tc.coef_index];
        Eigen::MatrixXd h = influence(res.fits[static_cast<std::size_t>(tc.model)],
                                      designs[static_cast<std::size_t>(tc.model)],
                                      responses[static_cast<std::size_t>(tc.model)], weights,
                                      {tc.coef_index});
        res.influence.col(static_cast<Eigen::Index>(t)) = h.col(0);
    }
    return res;
}

}  // namespace

EstimationResult ipw_estimate(const SamplingFrame& frame, const std::vector<std::size_t>& units,
                              const Eigen::VectorXd& weights, const std::vector<ModelSpec>& models,
                              const std::vector<TrackedCoef>& tracked) {
    return estimate_with_weights(frame, units, weights, models, tracked);
}

EstimationResult gr_estimate(const SamplingFrame& frame, const std::vector<std::size_t>& units,
                             const Eigen::VectorXd& base_weights,
                             const Eigen::MatrixXd& hstar_full,
                             const std::vector<ModelSpec>& models,
                             const std::vector<TrackedCoef>& tracked) {
    const Eigen::Index P = hstar_full.cols();
    Eigen::MatrixXd aux(static_cast<Eigen::Index>(units.size()), P + 1);
    aux.col(0).setOnes();
    for (std::size_t i = 0; i < units.size(); ++i)
        for (Eigen::Index p = 0; p < P; ++p)
            aux(static_cast<Eigen::Index>(i), p + 1) =
                hstar_full(static_cast<Eigen::Index>(units[i]), p);
    Eigen::VectorXd targets(P + 1);
    targets[0] = static_cast<double>(hstar_full.rows());
    for (Eigen::Index p = 0; p < P; ++p) targets[p + 1] = hstar_full.col(p).sum();

    CalibratedWeights cw = rake(base_weights, aux, targets);
    if (!cw.converged) {
        // Poor overlap: fall back to the design weights and flag.
        EstimationResult res = estimate_with_weights(frame, units, base_weights, models, tracked);
        res.ok = false;
        return res;
    }
    return estimate_with_weights(frame, units, cw.calibrated, models, tracked);
}

ResidualFit residual_sds(const Eigen::MatrixXd& h2, const Eigen::MatrixXd& hstar,
                         const std::vector<int>& stratum_of_row, int n_strata,
                         const std::vector<long long>& pop_sizes,
                         const std::vector<long long>& already_sampled,
                         const Eigen::VectorXd& weights, const ResidualOptions& opts) {
    const Eigen::Index n = h2.rows();
    const Eigen::Index P = h2.cols();
    if (hstar.rows() != n || static_cast<Eigen::Index>(stratum_of_row.size()) != n)
        throw EstimError("residual_sds: size mismatch");
    Eigen::VectorXd w = opts.weighted ? weights : Eigen::VectorXd::Ones(n);
    Eigen::VectorXd sw = w.array().sqrt();

    ResidualFit out;
    out.residuals.resize(n, P);
    const Eigen::Index q = opts.all_hstar_columns ? hstar.cols() : 1;
    out.coefs.resize(q + 1, P);
    for (Eigen::Index p = 0; p < P; ++p) {
        Eigen::MatrixXd Z(n, q + 1);
        Z.col(0).setOnes();
        if (opts.all_hstar_columns)
            Z.rightCols(q) = hstar;
        else
            Z.col(1) = hstar.col(p);
        // QR on the weighted system tolerates collinear regressors.
        Eigen::MatrixXd Zw = sw.asDiagonal() * Z;
        Eigen::VectorXd yw = sw.asDiagonal() * h2.col(p);
        Eigen::VectorXd theta = Zw.colPivHouseholderQr().solve(yw);
        out.coefs.col(p) = theta;
        out.residuals.col(p) = h2.col(p) - Z * theta;
    }

    // Within-stratum residual SDs, pooled fallback for strata with <2 rows.
    out.summaries.resize(static_cast<std::size_t>(n_strata));
    for (int k = 0; k < n_strata; ++k) {
        auto& s = out.summaries[static_cast<std::size_t>(k)];
        s.stratum_id = k + 1;
        s.pop_size = pop_sizes[static_cast<std::size_t>(k)];
        s.already_sampled = already_sampled[static_cast<std::size_t>(k)];
        s.sd_by_param.assign(static_cast<std::size_t>(P), 0.0);
    }
    for (Eigen::Index p = 0; p < P; ++p) {
        std::vector<std::vector<double>> per_stratum(static_cast<std::size_t>(n_strata));
        std::vector<double> all;
        all.reserve(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            per_stratum[static_cast<std::size_t>(stratum_of_row[static_cast<std::size_t>(i)] - 1)]
                .push_back(out.residuals(i, p));
            all.push_back(out.residuals(i, p));
        }
        double pooled = 0.0;
        if (all.size() >= 2) {
            double mean = kernels::sum(all.data(), all.size()) / static_cast<double>(all.size());
            pooled = std::sqrt(kernels::sum_sq_dev(all.data(), all.size(), mean) /
                               static_cast<double>(all.size() - 1));
        }
        for (int k = 0; k < n_strata; ++k) {
            const auto& v = per_stratum[static_cast<std::size_t>(k)];
            double sd = pooled;
            if (v.size() >= 2) {
                double mean = kernels::sum(v.data(), v.size()) / static_cast<double>(v.size());
                sd = std::sqrt(kernels::sum_sq_dev(v.data(), v.size(), mean) /
                               static_cast<double>(v.size() - 1));
            }
            out.summaries[static_cast<std::size_t>(k)].sd_by_param[static_cast<std::size_t>(p)] = sd;
        }
    }
    return out;
}

Eigen::VectorXd stratified_variance(const std::vector<StratumSummary>& summaries,
                                    const std::vector<long long>& n_k) {
    if (summaries.empty()) throw EstimError("stratified_variance: no strata");
    const std::size_t P = summaries.front().sd_by_param.size();
    Eigen::VectorXd var = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(P));
    for (std::size_t k = 0; k < summaries.size(); ++k) {
        const double Nk = static_cast<double>(summaries[k].pop_size);
        const double nk = static_cast<double>(n_k[k]);
        for (std::size_t p = 0; p < P; ++p) {
            const double s2 = summaries[k].sd_by_param[p] * summaries[k].sd_by_param[p];
            if (nk <= 0.0) {
                if (s2 > 0.0)
                    throw EstimError("stratified_variance: n_k = 0 with positive sigma");
                continue;
            }
            var[static_cast<Eigen::Index>(p)] += Nk * Nk * s2 / nk - Nk * s2;
        }
    }
    return var;
}

}  // namespace mwd
