#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cacherl/errors.hpp"
#include "cacherl/two_tier.hpp"
#include "test_support.hpp"

using namespace cacherl;

namespace {

ActionVector bits(std::vector<std::uint8_t> b) {
    std::size_t m = 0;
    for (auto x : b) m += x;
    return ActionVector(std::move(b), m);
}

LeafReport report(std::vector<double> mean, ActionVector a) {
    LeafReport r;
    r.mean_state = mean;
    r.reported_action = a;
    r.unserved = mean;
    for (std::size_t f = 0; f < mean.size(); ++f)
        if (a.cached(f)) r.unserved[f] = 0;
    return r;
}

NetworkConfig small_network(std::size_t leaves, std::size_t files, std::size_t m0, std::size_t mn) {
    NetworkConfig c;
    c.leaves = leaves;
    c.files = files;
    c.parent_capacity = m0;
    c.leaf_capacity = mn;
    c.slots_per_interval = 3;
    c.requests_per_slot = 40;
    c.leaf_states = 3;
    c.eta_lo = 0.8;
    c.eta_hi = 1.5;
    c.persistence = 0.5;
    return c;
}

double total(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s;
}

}  // namespace

TEST_CASE("leaf_cost examples") {
    const RequestVector r{3, 4};
    auto c = leaf_cost(bits({1, 0}), r, bits({0, 0}));
    CHECK(c[0] == 0.0);
    CHECK(leaf_cost(bits({1, 0}), r, bits({1, 0}))[0] == 0.0);
    CHECK(leaf_cost(bits({0}), RequestVector{3}, bits({0}))[0] == 6.0);
    CHECK(leaf_cost(bits({0}), RequestVector{3}, bits({1}))[0] == 3.0);
    CHECK_THROWS_AS(leaf_cost(bits({0, 0}), RequestVector{3}, bits({1})), std::invalid_argument);
}

TEST_CASE("aggregate_state examples") {
    std::vector<LeafReport> reps{report({4, 2}, bits({1, 0})), report({1, 1}, bits({0, 1}))};
    std::vector<double> w{1, 1};
    CHECK(aggregate_state(reps, w) == ParentState{1, 2});

    std::vector<LeafReport> full{report({4, 2}, bits({1, 1})), report({1, 1}, bits({1, 1}))};
    CHECK(aggregate_state(full, w) == ParentState{0, 0});

    std::vector<double> zero{0, 0};
    CHECK(aggregate_state(reps, zero) == ParentState{0, 0});

    std::vector<double> three{1, 1, 1};
    CHECK_THROWS_AS(aggregate_state(reps, three), IncompleteIntervalError);
}

TEST_CASE("slot_avg_cost examples") {
    SlotRecord s1{bits({1, 0}), {2, 5}, {}};
    SlotRecord s2{bits({0, 1}), {4, 1}, {}};
    const auto a0 = bits({0, 0});
    std::vector<SlotRecord> one{s1};
    CHECK(slot_avg_cost(one, a0, 1) == leaf_cost(s1.action, s1.requests, a0));
    std::vector<SlotRecord> same{s1, s1, s1};
    CHECK(slot_avg_cost(same, a0, 3) == leaf_cost(s1.action, s1.requests, a0));
    std::vector<SlotRecord> two{s1, s2};
    // s1: [0, 10], s2: [8, 0]
    CHECK(slot_avg_cost(two, a0, 2) == std::vector<double>{4, 5});
    CHECK_THROWS_AS(slot_avg_cost(two, a0, 3), IncompleteIntervalError);
}

TEST_CASE("parent_cost examples") {
    std::vector<std::vector<double>> one{{3, 1, 4}};
    std::vector<double> w1{1};
    CHECK(parent_cost(one, w1) == std::vector<double>{3, 1, 4});
    std::vector<std::vector<double>> same{{2, 6}, {2, 6}, {2, 6}, {2, 6}};
    std::vector<double> quarter(4, 0.25);
    CHECK(parent_cost(same, quarter) == std::vector<double>{2, 6});
    std::vector<std::vector<double>> pair{{1, 0}, {0, 1}};
    std::vector<double> w12{1, 2};
    CHECK(parent_cost(pair, w12) == std::vector<double>{1, 2});
    CHECK_THROWS_AS(parent_cost(pair, w1), IncompleteIntervalError);
}

TEST_CASE("smoothed leaf policy") {
    SmoothedTopM steady(4, 2, 0.3);
    for (int t = 0; t < 50; ++t) steady.observe({1, 7, 3, 5});
    CHECK(steady.current() == bits({0, 1, 0, 1}));

    SmoothedTopM memoryless(3, 1, 1.0);
    memoryless.observe({9, 0, 0});
    CHECK(memoryless.observe({0, 0, 1}) == bits({0, 0, 1}));

    SmoothedTopM flip(2, 1, 0.5);
    CHECK(flip.observe({2, 0}) == bits({1, 0}));  // h = [1, 0]
    CHECK(flip.observe({0, 4}) == bits({0, 1}));  // h = [0.5, 2]
    CHECK(flip.observe({3, 0}) == bits({1, 0}));  // h = [1.75, 1]
    CHECK(flip.smoothed() == std::vector<double>{1.75, 1.0});

    CHECK(flip.evaluate(std::vector<double>{0.0, 2.0}) == bits({0, 1}));
    CHECK_THROWS_AS(SmoothedTopM(3, 1, 0.0), std::invalid_argument);
}

TEST_CASE("recency leaf policy") {
    RecencyTopM p(4, 2);
    p.observe({0, 3, 0, 0});
    p.observe({0, 0, 1, 0});
    CHECK(p.current() == bits({0, 1, 1, 0}));
    p.observe({5, 0, 0, 2});
    CHECK(p.current() == bits({1, 0, 0, 1}));
    CHECK(p.evaluate(std::vector<double>{0, 0, 4, 0}) == bits({1, 0, 1, 0}));
}

TEST_CASE("single leaf, single slot hand trace") {
    NetworkConfig c;
    c.leaves = 1;
    c.files = 4;
    c.parent_capacity = 1;
    c.leaf_capacity = 1;
    c.slots_per_interval = 1;
    c.requests_per_slot = 5;
    std::vector<PopularityChain> chains{PopularityChain({ProbVector({0, 1, 0, 0})}, {1.0})};
    std::vector<std::unique_ptr<LeafPolicy>> pols;
    pols.push_back(std::make_unique<SmoothedTopM>(4, 1, 0.3));
    TwoTierNetwork net(c, std::move(chains), std::move(pols), Rng(1));

    auto r = net.run_interval(bits({0, 0, 1, 0}));
    REQUIRE(r.trace.slots.size() == 1);
    const auto& slot = r.trace.slots[0][0];
    CHECK(slot.action == bits({1, 0, 0, 0}));  // initial action: tie-break to file 0
    CHECK(slot.requests == RequestVector{0, 5, 0, 0});
    CHECK(r.trace.reports[0].mean_state == std::vector<double>{0, 5, 0, 0});
    CHECK(r.trace.reports[0].reported_action == bits({0, 1, 0, 0}));
    CHECK(r.trace.state == ParentState{0, 0, 0, 0});
    CHECK(r.cost == std::vector<double>{0, 10, 0, 0});
    CHECK(r.total_cost == 10.0);
    CHECK(net.interval_cost(r.trace, bits({0, 1, 0, 0})) == std::vector<double>{0, 5, 0, 0});

    auto next = net.run_interval(bits({0, 0, 1, 0}));
    CHECK(next.trace.slots[0][0].action == bits({0, 1, 0, 0}));
    CHECK(next.total_cost == 0.0);
}

TEST_CASE("parent caching every requested file removes the parent fetch term") {
    auto c = small_network(3, 5, 5, 2);
    TwoTierNetwork net(c, Rng(2), Rng(3));
    for (int k = 0; k < 20; ++k) {
        auto trace = net.advance();
        auto with_all = net.interval_cost(trace, ActionVector::all_ones(5));
        auto none = net.interval_cost(trace, ActionVector(std::vector<std::uint8_t>(5, 0), 0));
        for (std::size_t f = 0; f < 5; ++f) CHECK(2 * with_all[f] == doctest::Approx(none[f]).epsilon(1e-12));
    }
}

TEST_CASE("doubling the weights doubles s0 and c0") {
    auto c = small_network(4, 8, 2, 2);
    auto c2 = c;
    c2.weights.assign(4, 0.5);
    c.weights.assign(4, 0.25);
    TwoTierNetwork a(c, Rng(4), Rng(5)), b(c2, Rng(4), Rng(5));
    Rng pick(6);
    for (int k = 0; k < 20; ++k) {
        auto a0 = random_action(8, 2, pick);
        auto ra = a.run_interval(a0), rb = b.run_interval(a0);
        for (std::size_t f = 0; f < 8; ++f) {
            CHECK(rb.trace.state[f] == 2 * ra.trace.state[f]);
            CHECK(rb.cost[f] == 2 * ra.cost[f]);
        }
    }
}

TEST_CASE("doubling the requests doubles s0 and c0") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t N = 1 + rng.below(4), F = 2 + rng.below(6), T = 1 + rng.below(3);
        const auto w = testing::random_vector(N, 0, 1, rng);
        const auto a0 = random_action(F, rng.below(F + 1), rng);
        std::vector<std::vector<double>> c1, c2;
        std::vector<LeafReport> r1, r2;
        for (std::size_t n = 0; n < N; ++n) {
            const auto an = random_action(F, rng.below(F + 1), rng);
            std::vector<SlotRecord> s1, s2;
            for (std::size_t t = 0; t < T; ++t) {
                auto req = testing::random_requests(F, 9, rng);
                auto dbl = req;
                for (auto& x : dbl) x *= 2;
                s1.push_back({random_action(F, an.capacity(), rng), req, {}});
                s2.push_back({s1.back().action, dbl, {}});
            }
            c1.push_back(slot_avg_cost(s1, a0, T));
            c2.push_back(slot_avg_cost(s2, a0, T));
            SmoothedTopM pol(F, an.capacity(), 0.3);
            r1.push_back(make_report(s1, pol));
            r2.push_back(make_report(s2, pol));
        }
        const auto p1 = parent_cost(c1, w), p2 = parent_cost(c2, w);
        const auto st1 = aggregate_state(r1, w), st2 = aggregate_state(r2, w);
        for (std::size_t f = 0; f < F; ++f) {
            CHECK(p2[f] == doctest::Approx(2 * p1[f]).epsilon(1e-12));
            CHECK(st2[f] == doctest::Approx(2 * st1[f]).epsilon(1e-12));
        }
    }
}

TEST_CASE("total cost is nonincreasing in the parent action") {
    Rng rng(8);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t N = 1 + rng.below(5), F = 2 + rng.below(10), T = 1 + rng.below(3);
        const auto w = testing::random_vector(N, 0, 1, rng);
        std::vector<std::vector<SlotRecord>> slots(N);
        for (auto& s : slots)
            for (std::size_t t = 0; t < T; ++t) s.push_back({random_action(F, rng.below(F + 1), rng), testing::random_requests(F, 20, rng), {}});
        const std::size_t M0 = rng.below(F);
        const auto a0 = random_action(F, M0, rng);
        auto bigger_bits = std::vector<std::uint8_t>(a0.bits().begin(), a0.bits().end());
        std::vector<std::size_t> free;
        for (std::size_t f = 0; f < F; ++f)
            if (!a0.cached(f)) free.push_back(f);
        bigger_bits[free[rng.below(free.size())]] = 1;
        const ActionVector bigger(bigger_bits, M0 + 1);
        auto cost_of = [&](const ActionVector& a) {
            std::vector<std::vector<double>> per;
            for (const auto& s : slots) per.push_back(slot_avg_cost(s, a, T));
            return total(parent_cost(per, w));
        };
        CHECK(cost_of(bigger) <= cost_of(a0) + 1e-12);
    }
}

TEST_CASE("s0 vanishes where every leaf caches the file") {
    Rng rng(9);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t N = 1 + rng.below(5), F = 3 + rng.below(6);
        const std::size_t shared = rng.below(F);
        std::vector<LeafReport> reps;
        for (std::size_t n = 0; n < N; ++n) {
            auto a = random_action(F, 2, rng);
            std::vector<std::uint8_t> b(a.bits().begin(), a.bits().end());
            b[shared] = 1;
            std::size_t m = 0;
            for (auto x : b) m += x;
            reps.push_back(report(testing::random_vector(F, 0, 1000, rng), ActionVector(b, m)));
        }
        auto s0 = aggregate_state(reps, testing::random_vector(N, 0, 1, rng));
        CHECK(s0[shared] == 0.0);
        for (double x : s0) CHECK(x >= 0.0);
    }
}

TEST_CASE("network runs are bit-reproducible and independent of the parent action") {
    auto c = small_network(5, 12, 3, 2);
    TwoTierNetwork a(c, Rng(10), Rng(11)), b(c, Rng(10), Rng(11));
    Rng pa(1), pb(2);
    for (int k = 0; k < 30; ++k) {
        auto ra = a.run_interval(random_action(12, 3, pa));
        auto rb = b.run_interval(random_action(12, 3, pb));
        CHECK(ra.trace.state == rb.trace.state);
        for (std::size_t n = 0; n < 5; ++n)
            for (std::size_t t = 0; t < 3; ++t) {
                CHECK(ra.trace.slots[n][t].events == rb.trace.slots[n][t].events);
                CHECK(ra.trace.slots[n][t].action == rb.trace.slots[n][t].action);
            }
    }
    CHECK_THROWS_AS(a.run_interval(random_action(12, 2, pa)), std::invalid_argument);
}

TEST_CASE("first slot of an interval uses the action left by the previous one") {
    auto c = small_network(2, 6, 2, 2);
    TwoTierNetwork net(c, Rng(12), Rng(13));
    SmoothedTopM shadow(6, 2, c.smoothing);
    for (int k = 0; k < 10; ++k) {
        auto trace = net.advance();
        for (const auto& slot : trace.slots[0]) {
            CHECK(slot.action == shadow.current());
            shadow.observe(slot.requests);
        }
        CHECK(net.leaf_policy(0).current() == shadow.current());
    }
}

TEST_CASE("leaf chains with persistence") {
    auto c = small_network(1, 5, 1, 1);
    c.persistence = 0.7;
    Rng r1(14), r2(14);
    auto with = make_leaf_chain(c, r1);
    c.persistence = 0.0;
    auto without = make_leaf_chain(c, r2);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const double expect = 0.3 * without.transition(i, j) + (i == j ? 0.7 : 0.0);
            CHECK(with.transition(i, j) == doctest::Approx(expect).epsilon(1e-14));
        }
}

TEST_CASE("baselines: hand trace and orderings") {
    NetworkConfig c;
    c.leaves = 1;
    c.files = 3;
    c.parent_capacity = 1;
    c.leaf_capacity = 0;
    c.slots_per_interval = 1;
    TwoTierNetwork net(c, std::vector<PopularityChain>{PopularityChain({ProbVector({0.5, 0.5, 0.0})}, {1.0})},
                       [] {
                           std::vector<std::unique_ptr<LeafPolicy>> v;
                           v.push_back(std::make_unique<SmoothedTopM>(3, 0, 0.3));
                           return v;
                       }(),
                       Rng(1));
    IntervalTrace trace;
    trace.slots = {{SlotRecord{ActionVector(std::vector<std::uint8_t>(3, 0), 0), {2, 1, 0}, {0, 0, 1}}}};
    EventBaseline lru(3, 1, EvictionPolicy::LRU);
    CHECK(lru.serve(trace, net) == 5.0);  // miss, hit, miss
    EventBaseline lru2(3, 1, EvictionPolicy::LRU);
    trace.slots[0][0].events = {0, 1, 0};
    CHECK(lru2.serve(trace, net) == 6.0);
    NoCacheBaseline none;
    CHECK(none.serve(trace, net) == 6.0);
    NonCausalBaseline opt(1);
    CHECK(NonCausalBaseline::action_for(trace, net, 1) == bits({1, 0, 0}));
    CHECK(opt.serve(trace, net) == 4.0);
}

TEST_CASE("non-causal optimum beats every fixed parent action on the interval") {
    auto c = small_network(4, 10, 3, 2);
    TwoTierNetwork net(c, Rng(15), Rng(16));
    Rng rng(17);
    NonCausalBaseline opt(3);
    NoCacheBaseline none;
    for (int k = 0; k < 30; ++k) {
        auto trace = net.advance();
        const double best = opt.serve(trace, net);
        CHECK(best <= none.serve(trace, net) + 1e-12);
        const auto all = enumerate_actions(10, 3);
        for (const auto& a : all.actions()) CHECK(best <= total(net.interval_cost(trace, a)) + 1e-9);
    }
}

TEST_CASE("event baselines interleave leaf miss streams round-robin") {
    NetworkConfig c;
    c.leaves = 2;
    c.files = 3;
    c.parent_capacity = 1;
    c.leaf_capacity = 1;
    c.slots_per_interval = 1;
    std::vector<PopularityChain> chains(2, PopularityChain({ProbVector({0.2, 0.4, 0.4})}, {1.0}));
    std::vector<std::unique_ptr<LeafPolicy>> pols;
    pols.push_back(std::make_unique<SmoothedTopM>(3, 1, 0.3));
    pols.push_back(std::make_unique<SmoothedTopM>(3, 1, 0.3));
    TwoTierNetwork net(c, std::move(chains), std::move(pols), Rng(1));
    IntervalTrace trace;
    // leaf 0 caches file 0; leaf 1 caches file 2
    trace.slots = {{SlotRecord{bits({1, 0, 0}), {1, 2, 0}, {0, 1, 1}}}, {SlotRecord{bits({0, 0, 1}), {0, 1, 1}, {2, 1}}}};
    // merged misses: leaf0 file1, leaf1 file1, leaf0 file1 -> miss, hit, hit
    EventBaseline fifo(3, 1, EvictionPolicy::FIFO);
    CHECK(fifo.serve(trace, net) == doctest::Approx(0.5 * 2 + 0.5 * 1 + 0.5 * 1));
}

TEST_CASE("network config validation") {
    NetworkConfig c;
    CHECK_NOTHROW(c.validate());
    auto bad = c;
    bad.parent_capacity = 101;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.weights = {1.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.slots_per_interval = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(c.effective_weights() == std::vector<double>(10, 0.1));
}
