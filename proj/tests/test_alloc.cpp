#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mwd/alloc.hpp"

using namespace mwd;

namespace {

std::vector<StratumSummary> make_strata(const std::vector<long long>& N,
                                        const std::vector<std::vector<double>>& sds) {
    std::vector<StratumSummary> out;
    for (std::size_t k = 0; k < N.size(); ++k) {
        StratumSummary s;
        s.stratum_id = static_cast<int>(k + 1);
        s.pop_size = N[k];
        s.sd_by_param = sds[k];
        out.push_back(std::move(s));
    }
    return out;
}

// Exhaustive search over all feasible integer allocations; the independent
// optimum reference for the greedy allocators.
double brute_force_best(const std::vector<long long>& N, const std::vector<double>& sds,
                        long long n, long long min_per) {
    const std::size_t K = N.size();
    std::vector<long long> counts(K, 0);
    double best = std::numeric_limits<double>::infinity();
    auto objective = [&]() {
        double obj = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            if (sds[k] == 0.0) continue;
            if (counts[k] == 0) return std::numeric_limits<double>::infinity();
            obj += static_cast<double>(N[k]) * static_cast<double>(N[k]) * sds[k] * sds[k] /
                   static_cast<double>(counts[k]);
        }
        return obj;
    };
    auto rec = [&](auto&& self, std::size_t k, long long left) -> void {
        if (k == K - 1) {
            if (left < std::min(min_per, N[k]) || left > N[k]) return;
            counts[k] = left;
            best = std::min(best, objective());
            return;
        }
        for (long long c = std::min(min_per, N[k]); c <= std::min(N[k], left); ++c) {
            counts[k] = c;
            self(self, k + 1, left - c);
        }
    };
    rec(rec, 0, n);
    return best;
}

std::vector<double> composite(const std::vector<std::vector<double>>& sds,
                              const std::vector<double>& a) {
    std::vector<double> out;
    for (const auto& row : sds) {
        double s2 = 0.0;
        for (std::size_t p = 0; p < a.size(); ++p) s2 += a[p] * row[p] * row[p];
        out.push_back(std::sqrt(s2));
    }
    return out;
}

}  // namespace

TEST_CASE("continuous optimum allocation: proportional to N_k sigma_k") {
    auto s1 = make_strata({100, 100}, {{1.0}, {1.0}});
    auto a1 = neyman(s1, 0, 50.0);
    CHECK(a1.counts[0] == doctest::Approx(25.0));
    CHECK(a1.counts[1] == doctest::Approx(25.0));

    auto s2 = make_strata({100, 100}, {{3.0}, {1.0}});
    auto a2 = neyman(s2, 0, 40.0);
    CHECK(a2.counts[0] == doctest::Approx(30.0));
    CHECK(a2.counts[1] == doctest::Approx(10.0));

    auto s3 = make_strata({50, 50}, {{0.0}, {2.0}});
    auto a3 = neyman(s3, 0, 10.0);
    CHECK(a3.counts[0] == doctest::Approx(0.0));
    CHECK(a3.counts[1] == doctest::Approx(10.0));

    auto s4 = make_strata({50, 50}, {{0.0}, {0.0}});
    CHECK_THROWS_AS(neyman(s4, 0, 10.0), AllocError);
}

TEST_CASE("integer optimum allocation: symmetric and capped cases") {
    auto s1 = make_strata({100, 100}, {{1.0}, {1.0}});
    auto a1 = wright(s1, 0, 10, 2);
    CHECK(a1.counts == std::vector<long long>{5, 5});
    CHECK(a1.total == 10);

    auto s2 = make_strata({4, 100}, {{10.0}, {0.1}});
    auto a2 = wright(s2, 0, 20, 2);
    CHECK(a2.counts[0] == 4);  // cap binds
    CHECK(a2.counts[1] == 16);
    CHECK(a2.objective_value ==
          doctest::Approx(brute_force_best({4, 100}, {10.0, 0.1}, 20, 2)));
}

TEST_CASE("integer optimum allocation matches exhaustive search") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> kd(2, 4);
    std::uniform_real_distribution<double> sd(0.0, 3.0);
    for (int rep = 0; rep < 300; ++rep) {
        int K = kd(rng);
        std::vector<long long> N;
        std::vector<std::vector<double>> sds;
        long long total = 0;
        for (int k = 0; k < K; ++k) {
            long long Nk = std::uniform_int_distribution<long long>(3, 12)(rng);
            N.push_back(Nk);
            total += Nk;
            sds.push_back({sd(rng)});
        }
        long long min_per = std::uniform_int_distribution<long long>(0, 2)(rng);
        long long lo = 0;
        for (long long Nk : N) lo += std::min(min_per, Nk);
        long long n = std::uniform_int_distribution<long long>(std::max(lo, 1LL),
                                                               std::min<long long>(total, 20))(rng);
        std::vector<double> flat;
        for (auto& r : sds) flat.push_back(r[0]);
        double oracle = brute_force_best(N, flat, n, min_per);
        if (!std::isfinite(oracle)) continue;  // infeasible under zero counts
        auto a = wright(make_strata(N, sds), 0, n, min_per);
        CHECK(a.total == n);
        CHECK(a.objective_value == doctest::Approx(oracle).epsilon(1e-12));
        double recomputed = allocation_objective(
            N, flat, std::vector<double>(a.counts.begin(), a.counts.end()));
        CHECK(a.objective_value == doctest::Approx(recomputed).epsilon(1e-12));
    }
}

TEST_CASE("weighted composite allocation matches exhaustive search") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> var(0.0, 4.0);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<long long> N{9, 7, 11};
        std::vector<std::vector<double>> sds;
        for (int k = 0; k < 3; ++k)
            sds.push_back({std::sqrt(var(rng)), std::sqrt(var(rng))});
        AOptWeights w;
        w.a = {0.3, 0.7};
        auto a = a_optimal_wright(make_strata(N, sds), w, 14, 2);
        double oracle = brute_force_best(N, composite(sds, w.a), 14, 2);
        CHECK(a.total == 14);
        CHECK(a.objective_value == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("weighted allocation: symmetry and degenerate-weight reductions") {
    // Symmetric composite SDs split evenly.
    auto strata = make_strata({50, 50}, {{3.0, 1.0}, {1.0, 3.0}});
    AOptWeights half;
    half.a = {0.5, 0.5};
    auto ar = a_optimal_neyman(strata, half, 10.0);
    CHECK(ar.counts[0] == doctest::Approx(5.0));
    CHECK(ar.counts[1] == doctest::Approx(5.0));

    // All weight on one parameter reduces to the single-parameter rule.
    AOptWeights first;
    first.a = {1.0, 0.0};
    auto a1 = a_optimal_neyman(strata, first, 10.0);
    auto n1 = neyman(strata, 0, 10.0);
    for (std::size_t k = 0; k < 2; ++k)
        CHECK(a1.counts[k] == doctest::Approx(n1.counts[k]).epsilon(1e-14));

    // P = 1 integer reduction over random instances.
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> sd(0.1, 3.0);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<long long> N;
        std::vector<std::vector<double>> sds;
        int K = std::uniform_int_distribution<int>(2, 5)(rng);
        for (int k = 0; k < K; ++k) {
            N.push_back(std::uniform_int_distribution<long long>(5, 40)(rng));
            sds.push_back({sd(rng)});
        }
        long long n = std::uniform_int_distribution<long long>(2 * K, 3 * K)(rng);
        AOptWeights one;
        one.a = {1.0};
        auto s = make_strata(N, sds);
        CHECK(a_optimal_wright(s, one, n, 2).counts == wright(s, 0, n, 2).counts);
    }
}

TEST_CASE("weighted allocation properties: scale invariance, refinement, equal split") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> sd(0.1, 2.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<long long> N{20, 30, 25};
        std::vector<std::vector<double>> sds, scaled;
        for (int k = 0; k < 3; ++k) {
            double s1 = sd(rng), s2 = sd(rng);
            sds.push_back({s1, s2});
            scaled.push_back({7.0 * s1, 7.0 * s2});
        }
        AOptWeights w;
        w.a = {0.4, 0.6};
        auto a = a_optimal_wright(make_strata(N, sds), w, 18, 2);
        auto b = a_optimal_wright(make_strata(N, scaled), w, 18, 2);
        CHECK(a.counts == b.counts);

        // Adding one unit of budget changes exactly one stratum by one.
        auto c = a_optimal_wright(make_strata(N, sds), w, 19, 2);
        long long diff = 0;
        for (std::size_t k = 0; k < 3; ++k) diff += std::llabs(c.counts[k] - a.counts[k]);
        CHECK(diff == 1);
    }

    auto eq = make_strata({30, 30, 30}, {{1.5, 0.5}, {1.5, 0.5}, {1.5, 0.5}});
    AOptWeights w;
    w.a = {0.5, 0.5};
    auto a = a_optimal_wright(eq, w, 12, 2);
    CHECK(a.counts == std::vector<long long>{4, 4, 4});
}

TEST_CASE("independent multi-parameter allocation sums per-parameter optima") {
    // Identical SDs: double the single-parameter solution.
    auto strata = make_strata({60, 40}, {{2.0, 2.0}, {1.0, 1.0}});
    auto both = independent_allocation_neyman(strata, {50.0, 50.0});
    auto single = neyman(strata, 0, 50.0);
    for (std::size_t k = 0; k < 2; ++k)
        CHECK(both.counts[k] == doctest::Approx(2.0 * single.counts[k]).epsilon(1e-12));

    // Orthogonal SD patterns: union of the two single-parameter solutions.
    auto ortho = make_strata({50, 50}, {{2.0, 0.0}, {0.0, 2.0}});
    auto u = independent_allocation_wright(ortho, {10, 10}, 0);
    CHECK(u.counts == std::vector<long long>{10, 10});

    // P = 1 degenerate case.
    auto p1 = make_strata({60, 40}, {{2.0}, {1.0}});
    CHECK(independent_allocation_wright(p1, {12}, 2).counts == wright(p1, 0, 12, 2).counts);
}

TEST_CASE("infeasible budgets are rejected") {
    auto s = make_strata({5, 5}, {{1.0}, {1.0}});
    CHECK_THROWS_AS(wright(s, 0, 3, 2), AllocError);   // below K * min
    CHECK_THROWS_AS(wright(s, 0, 11, 2), AllocError);  // above total capacity
    AOptWeights bad;
    bad.a = {0.5, 0.4};
    CHECK_THROWS_AS(bad.validate(2), AllocError);
}

TEST_CASE("wave draw computation clips, trims, and refills") {
    // No history: draws equal the target.
    CHECK(multiwave_step({6, 4}, {0, 0}, {50, 50}, {1.0, 1.0}, 10) ==
          std::vector<long long>{6, 4});
    // Clipping at already-sampled counts.
    CHECK(multiwave_step({10, 10}, {10, 0}, {50, 50}, {1.0, 1.0}, 10) ==
          std::vector<long long>{0, 10});
    // Over-sampled stratum absorbs the excess elsewhere.
    auto d = multiwave_step({12, 8}, {15, 0}, {50, 50}, {1.0, 1.0}, 5);
    CHECK(d == std::vector<long long>{0, 5});
    long long total = 0;
    for (long long x : d) total += x;
    CHECK(total == 5);
}

TEST_CASE("cumulative allocation with floors stays exactly optimal") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> sd(0.1, 3.0);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<long long> N{10, 12, 9};
        std::vector<double> sds{sd(rng), sd(rng), sd(rng)};
        std::vector<long long> floors{std::uniform_int_distribution<long long>(0, 4)(rng),
                                      std::uniform_int_distribution<long long>(0, 4)(rng), 0};
        long long lo = std::max<long long>(floors[0], 2) + std::max<long long>(floors[1], 2) + 2;
        long long n = std::uniform_int_distribution<long long>(lo, 20)(rng);
        auto a = wright_with_floors(N, sds, n, 2, floors);
        CHECK(a.total == n);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(a.counts[k] >= floors[k]);
            CHECK(a.counts[k] <= N[k]);
        }
        // Oracle with per-stratum lower bounds folded into the enumeration.
        double best = std::numeric_limits<double>::infinity();
        for (long long c0 = std::max(floors[0], std::min<long long>(2, N[0])); c0 <= N[0]; ++c0)
            for (long long c1 = std::max(floors[1], std::min<long long>(2, N[1])); c1 <= N[1];
                 ++c1) {
                long long c2 = n - c0 - c1;
                if (c2 < std::max(floors[2], std::min<long long>(2, N[2])) || c2 > N[2]) continue;
                best = std::min(best, allocation_objective(
                                          N, sds, {static_cast<double>(c0),
                                                   static_cast<double>(c1),
                                                   static_cast<double>(c2)}));
            }
        CHECK(a.objective_value == doctest::Approx(best).epsilon(1e-12));
    }
}
