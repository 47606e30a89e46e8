#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cacherl/errors.hpp"
#include "cacherl/linear_q.hpp"
#include "test_support.hpp"

using namespace cacherl;

namespace {

ActionVector bits(std::vector<std::uint8_t> b) {
    std::size_t m = 0;
    for (auto x : b) m += x;
    return ActionVector(std::move(b), m);
}

LinearQParams random_params(std::size_t G, std::size_t L, std::size_t F, Rng& rng) {
    LinearQParams p(G, L, F);
    for (std::size_t g = 0; g < G; ++g)
        for (auto& x : p.global_row(g)) x = rng.uniform(-10, 10);
    for (std::size_t l = 0; l < L; ++l)
        for (auto& x : p.local_row(l)) x = rng.uniform(-10, 10);
    p.refresh() = rng.uniform(-10, 10);
    return p;
}

/// Q from the definition, written out without psi().
double q_oracle(const SystemState& s, const ActionVector& next, const LinearQParams& p) {
    double q = 0;
    for (std::size_t f = 0; f < p.files(); ++f)
        q += (p.global_row(s.global_idx)[f] + p.local_row(s.local_idx)[f] + p.refresh() * s.action[f]) * (1 - next[f]);
    return q;
}

}  // namespace

TEST_CASE("psi examples") {
    LinearQParams p(1, 1, 2);
    SystemState s{0, 0, bits({1, 0})};
    CHECK(psi(s, p) == std::vector<double>{0, 0});
    p.global_row(0)[0] = 1;
    p.global_row(0)[1] = 2;
    p.local_row(0)[0] = 3;
    p.local_row(0)[1] = 4;
    p.refresh() = 10;
    CHECK(psi(s, p) == std::vector<double>{14, 6});
    p.refresh() = 0;
    SystemState other{0, 0, bits({0, 1})};
    CHECK(psi(s, p) == psi(other, p));
}

TEST_CASE("approx_q examples") {
    LinearQParams p(1, 1, 2);
    p.global_row(0)[0] = 1;
    p.global_row(0)[1] = 2;
    p.local_row(0)[0] = 3;
    p.local_row(0)[1] = 4;
    p.refresh() = 10;
    SystemState s{0, 0, bits({1, 0})};
    CHECK(approx_q(s, bits({1, 0}), p) == 6);
    CHECK(approx_q(s, bits({0, 1}), p) == 14);
    CHECK(approx_q(s, ActionVector::all_ones(2), p) == 0);
}

TEST_CASE("greedy_action examples") {
    LinearQParams p(1, 1, 3);
    p.global_row(0)[0] = 3;
    p.global_row(0)[1] = 1;
    p.global_row(0)[2] = 2;
    SystemState s{0, 0, bits({0, 0, 1})};
    CHECK(greedy_action(s, p, 2) == bits({1, 0, 1}));
    LinearQParams zero(1, 1, 3);
    CHECK(greedy_action(s, zero, 1) == bits({1, 0, 0}));
}

TEST_CASE("greedy_action equals the exhaustive argmin for every F <= 8") {
    Rng rng(1);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t F = 1 + rng.below(8);
        const std::size_t M = rng.below(std::min<std::size_t>(F, 4) + 1);
        auto p = random_params(3, 2, F, rng);
        SystemState s{rng.below(3), rng.below(2), random_action(F, M, rng)};
        const auto greedy = greedy_action(s, p, M);
        const auto all = enumerate_actions(F, M);
        double best = 1e300;
        for (const auto& a : all.actions()) best = std::min(best, q_oracle(s, a, p));
        if (std::abs(q_oracle(s, greedy, p) - best) > 1e-9) ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("td_error examples") {
    Rng rng(2);
    LinearQParams zero(2, 2, 4);
    SystemState s{0, 1, bits({1, 1, 0, 0})}, s2{1, 0, bits({0, 1, 1, 0})};
    CHECK(td_error(s, s2.action, 7.5, s2, zero, 0.9, 2) == 7.5);

    LinearQParams p(2, 2, 4);
    p.global_row(0)[2] = 5;  // Q(s, a_taken) = 5 for a_taken caching files 0 and 1
    CHECK(td_error(s, bits({1, 1, 0, 0}), 0.0, s2, p, 0.0, 2) == -5.0);

    // bootstrap uses the greedy minimum
    auto q = random_params(2, 2, 4, rng);
    const auto all = enumerate_actions(4, 2);
    double best = 1e300;
    for (const auto& a : all.actions()) best = std::min(best, q_oracle(s2, a, q));
    const double e = td_error(s, s2.action, 3.0, s2, q, 0.9, 2);
    CHECK(e == doctest::Approx(3.0 + 0.9 * best - q_oracle(s, s2.action, q)).epsilon(1e-12));
}

TEST_CASE("sgd_update examples") {
    LinearQParams p(1, 1, 2);
    SystemState s{0, 0, bits({1, 0})};
    auto before = p;
    sgd_update(p, s, bits({0, 1}), 0.0, StepSizes{});
    CHECK(p == before);

    sgd_update(p, s, bits({1, 0}), 2.0, StepSizes{0.5, 0.5, 0.5});
    CHECK(p.global_row(0)[0] == 0.0);
    CHECK(p.global_row(0)[1] == 1.0);
    CHECK(p.refresh() == 0.0);  // a_prev = a_taken: nothing refreshed

    CHECK_THROWS_AS(sgd_update(p, s, bits({1, 0}), std::nan(""), StepSizes{}), NumericalError);
}

TEST_CASE("sgd_update changes exactly the uncached coordinates of the visited rows") {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t F = 2 + rng.below(9), M = rng.below(F);
        auto p = random_params(4, 3, F, rng);
        SystemState s{rng.below(4), rng.below(3), random_action(F, M, rng)};
        auto a = random_action(F, M, rng);
        const double e = rng.uniform(0.5, 5.0);
        const auto before = p;
        sgd_update(p, s, a, e, StepSizes{0.01, 0.02, 0.03});
        std::size_t changed_g = 0, changed_l = 0;
        for (std::size_t i = 0; i < p.theta_global().size(); ++i)
            if (p.theta_global()[i] != before.theta_global()[i]) {
                ++changed_g;
                CHECK(i / F == s.global_idx);
                CHECK_FALSE(a.cached(i % F));
            }
        for (std::size_t i = 0; i < p.theta_local().size(); ++i)
            if (p.theta_local()[i] != before.theta_local()[i]) {
                ++changed_l;
                CHECK(i / F == s.local_idx);
            }
        CHECK(changed_g == F - M);
        CHECK(changed_l == F - M);
        double kept = 0;
        for (std::size_t f = 0; f < F; ++f) kept += s.action[f] * (1 - a[f]);
        CHECK(p.refresh() == doctest::Approx(before.refresh() + 0.03 * e * kept).epsilon(1e-12));
    }
}

TEST_CASE("small steps shrink the TD error against a frozen target") {
    Rng rng(4);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t F = 2 + rng.below(9), M = rng.below(F);
        auto p = random_params(3, 3, F, rng);
        SystemState s{rng.below(3), rng.below(3), random_action(F, M, rng)};
        SystemState s2{rng.below(3), rng.below(3), random_action(F, M, rng)};
        auto a = random_action(F, M, rng);
        const double cost = rng.uniform(0, 100), gamma = 0.9;
        const double e = td_error(s, a, cost, s2, p, gamma, M);
        const double target = e + approx_q(s, a, p);
        sgd_update(p, s, a, e, StepSizes{0.005, 0.005, 0.005});
        const double e2 = target - approx_q(s, a, p);
        CHECK(std::abs(e2) <= std::abs(e) + 1e-12);
    }
}

TEST_CASE("parameter count") {
    CHECK(LinearQParams(50, 40, 1000).parameter_count() == 90001);
    CHECK(LinearQParams(2, 2, 10).parameter_count() == 41);
}

namespace {

EnvConfig small_env(std::uint64_t seed) {
    Rng rng(seed);
    EnvConfig cfg;
    cfg.files = 10;
    cfg.capacity = 2;
    cfg.weights = CostWeights{10, 600, 1000};
    std::vector<double> eg{1.0, 1.5}, el{0.7, 2.5};
    cfg.global = chain_from_etas(eg, 10, rng);
    cfg.local = chain_from_etas(el, 10, rng);
    return cfg;
}

}  // namespace

TEST_CASE("run_linear_q with no slots leaves zero params") {
    SingleNodeEnv env(small_env(1), Rng(2));
    Rng rng(3);
    auto r = run_linear_q(env, StepSizes{}, EpsilonSchedule::constant(0.05), 0.9, 0, rng);
    CHECK(r.costs.empty());
    CHECK(r.params == LinearQParams(2, 2, 10));
}

TEST_CASE("run_linear_q is reproducible and stays finite") {
    SingleNodeEnv e1(small_env(4), Rng(5)), e2(small_env(4), Rng(5));
    Rng r1(6), r2(6);
    auto a = run_linear_q(e1, StepSizes{}, EpsilonSchedule::constant(0.05), 0.9, 20000, r1);
    auto b = run_linear_q(e2, StepSizes{}, EpsilonSchedule::constant(0.05), 0.9, 20000, r2);
    CHECK(a.costs == b.costs);
    CHECK(a.params == b.params);
    for (double x : a.params.theta_global()) CHECK(std::isfinite(x));
    CHECK(std::isfinite(a.params.refresh()));
}

TEST_CASE("linear params JSON dump") {
    Rng rng(7);
    auto p = random_params(2, 3, 4, rng);
    auto doc = linear_params_to_json(p);
    CHECK(doc.at("theta_global").size() == 8);
    CHECK(doc.at("theta_local").size() == 12);
    CHECK(doc.at("theta_refresh").get<double>() == p.refresh());
}
