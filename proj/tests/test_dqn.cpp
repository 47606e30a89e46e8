#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "cacherl/dqn.hpp"
#include "cacherl/errors.hpp"
#include "test_support.hpp"

using namespace cacherl;

namespace {

ActionVector bits(std::vector<std::uint8_t> b) {
    std::size_t m = 0;
    for (auto x : b) m += x;
    return ActionVector(std::move(b), m);
}

DqnConfig config(std::vector<std::size_t> partition, double gamma = 0.9, std::size_t sync = 50) {
    DqnConfig c;
    c.partition = std::move(partition);
    c.gamma = gamma;
    c.sync_period = sync;
    return c;
}

Experience random_experience(std::size_t F, std::size_t M, Rng& rng) {
    return Experience{testing::random_vector(F, 0, 2, rng), random_action(F, M, rng), testing::random_vector(F, 0, 3, rng),
                      testing::random_vector(F, 0, 2, rng)};
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double d2 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace

TEST_CASE("partition_state examples") {
    std::vector<double> s{1, 2, 3, 4};
    std::vector<std::size_t> whole{4}, halves{2, 2}, short_by_one{2, 1};
    auto one = partition_state(s, whole);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == s);
    auto two = partition_state(s, halves);
    CHECK(two[0] == std::vector<double>{1, 2});
    CHECK(two[1] == std::vector<double>{3, 4});
    CHECK_THROWS_AS(partition_state(s, short_by_one), InvalidPartitionError);
}

TEST_CASE("partition concatenation restores the state") {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t F = 1 + rng.below(50), K = 1 + rng.below(F);
        const auto part = even_partition(F, K);
        auto s = testing::random_vector(F, 0, 10, rng);
        std::vector<double> joined;
        for (const auto& p : partition_state(s, part)) joined.insert(joined.end(), p.begin(), p.end());
        CHECK(joined == s);
    }
    CHECK(even_partition(10, 3) == std::vector<std::size_t>{4, 3, 3});
    CHECK_THROWS_AS(even_partition(3, 4), InvalidPartitionError);
    CHECK_THROWS_AS(config({2, 0, 2}).validate(4), InvalidPartitionError);
    CHECK_THROWS_AS(config({2, 2}).validate(5), InvalidPartitionError);
}

TEST_CASE("predict_costs examples") {
    std::vector<FeedforwardNet> zero{FeedforwardNet({3, 6, 3}), FeedforwardNet({2, 4, 2})};
    HyperDQN z(config({3, 2}), zero);
    CHECK(z.predict_costs(std::vector<double>{1, 2, 3, 4, 5}) == std::vector<double>(5, 0.0));

    FeedforwardNet a({2, 2}), b({2, 2});
    a.layer(0).weight = {1, 0, 0, 2};  // [x0, 2 x1]
    a.layer(0).bias = {0, 1};
    b.layer(0).weight = {0, 1, 1, 0};  // [x1, x0]
    b.layer(0).bias = {0.5, 0};
    HyperDQN h(config({2, 2}), {a, b});
    CHECK(h.predict_costs(std::vector<double>{1, 2, 3, 4}) == std::vector<double>{1, 5, 4.5, 3});

    HyperDQN swapped(config({2, 2}), {b, a});
    // swapping the nets while swapping the input blocks swaps the output blocks
    CHECK(swapped.predict_costs(std::vector<double>{3, 4, 1, 2}) == std::vector<double>{4.5, 3, 1, 5});
}

TEST_CASE("groups are block independent") {
    Rng rng(2);
    HyperDQN h(config({4, 3, 5}), rng);
    for (int trial = 0; trial < 200; ++trial) {
        auto s = testing::random_vector(12, 0, 5, rng);
        const auto o = h.predict_costs(s);
        const std::size_t k = rng.below(3);
        auto s2 = s;
        for (std::size_t i = 0; i < h.config().partition[k]; ++i) s2[h.group_offset(k) + i] += rng.uniform(-3, 3);
        const auto o2 = h.predict_costs(s2);
        for (std::size_t f = 0; f < 12; ++f) {
            const bool inside = f >= h.group_offset(k) && f < h.group_offset(k) + h.config().partition[k];
            if (!inside) CHECK(o[f] == o2[f]);
        }
    }
}

TEST_CASE("select_action examples") {
    FeedforwardNet n({4, 4});
    n.layer(0).weight = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    HyperDQN h(config({4}), {n});
    Rng rng(3);
    const std::vector<double> o{5, 1, 4, 2};
    CHECK(select_action(h, o, 2, 0.0, rng) == bits({1, 0, 1, 0}));
    CHECK(select_action(h, o, 4, 0.0, rng) == ActionVector::all_ones(4));
    CHECK(select_action(h, o, 4, 1.0, rng) == ActionVector::all_ones(4));
    CHECK_THROWS_AS(select_action(h, o, 5, 0.0, rng), std::invalid_argument);

    const auto all = enumerate_actions(4, 2);
    std::vector<double> hits(all.size(), 0);
    const int draws = 60000;
    for (int i = 0; i < draws; ++i) hits[all.index_of(select_action(h, o, 2, 1.0, rng))] += 1;
    double chi2 = 0;
    const double e = draws / 6.0;
    for (double x : hits) chi2 += (x - e) * (x - e) / e;
    CHECK(chi2 < 15.0863);  // 99th percentile, 5 degrees of freedom
}

TEST_CASE("target_error examples") {
    Rng rng(4);
    HyperDQN h(config({3, 3}, 0.9), rng);
    auto e = random_experience(6, 2, rng);
    e.action = ActionVector::all_ones(6);
    CHECK(h.target_error(e) == std::vector<double>(6, 0.0));

    std::vector<FeedforwardNet> zero{FeedforwardNet({3, 6, 3}), FeedforwardNet({3, 6, 3})};
    HyperDQN myopic(config({3, 3}, 0.0), zero);
    auto e2 = random_experience(6, 2, rng);
    auto err = myopic.target_error(e2);
    for (std::size_t f = 0; f < 6; ++f) CHECK(err[f] == (e2.action.cached(f) ? 0.0 : e2.cost[f]));

    // c = (1 - γ) Q(s) with s_new = s: zero error
    const double g = 0.7;
    HyperDQN fixed(config({3, 3}, g), rng);
    Experience e3;
    e3.s_prev = testing::random_vector(6, 0, 2, rng);
    e3.s_new = e3.s_prev;
    e3.action = random_action(6, 2, rng);
    const auto q = fixed.predict_costs(e3.s_prev);
    for (double v : q) e3.cost.push_back((1 - g) * v);
    for (double v : fixed.target_error(e3)) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("softmax head targets are normalized per group") {
    Rng rng(5);
    DqnConfig c = config({3, 2}, 0.0);
    c.head = OutputHead::Softmax;
    HyperDQN h(c, rng);
    Experience e{testing::random_vector(5, 0, 1, rng), random_action(5, 0, rng), {2, 1, 1, 3, 1}, testing::random_vector(5, 0, 1, rng)};
    const auto q = h.predict_costs(e.s_prev);
    const auto err = h.target_error(e);
    const std::vector<double> expect{0.5, 0.25, 0.25, 0.75, 0.25};
    for (std::size_t f = 0; f < 5; ++f) CHECK(err[f] + q[f] == doctest::Approx(expect[f]).epsilon(1e-12));
}

TEST_CASE("train_batch on an empty buffer is a no-op") {
    Rng rng(6);
    HyperDQN h(config({4, 4}), rng);
    const auto before = h.online(0);
    ReplayBuffer buf(10);
    CHECK_FALSE(h.train_batch(buf, 32, 0.01, rng));
    CHECK(h.online(0) == before);
    CHECK(h.training_steps() == 0);
}

TEST_CASE("train_batch descends on a single experience") {
    Rng rng(7);
    HyperDQN h(config({5, 5}, 0.0), rng);
    ReplayBuffer buf(10);
    auto e = random_experience(10, 3, rng);
    buf.push(e);
    auto loss_now = [&] {
        const auto err = h.target_error(e);
        double s = 0;
        for (double v : err) s += v * v;
        return s;
    };
    double prev = loss_now();
    for (int i = 0; i < 100; ++i) {
        CHECK(h.train_batch(buf, 1, 0.01, rng));
        const double now = loss_now();
        CHECK(now < prev);
        prev = now;
    }
    CHECK(h.training_steps() == 100);
}

TEST_CASE("a group whose files are all cached does not move") {
    Rng rng(8);
    HyperDQN h(config({3, 3}), rng);
    ReplayBuffer buf(10);
    for (int i = 0; i < 5; ++i) {
        auto e = random_experience(6, 3, rng);
        e.action = bits({1, 1, 1, 0, 0, 0});
        buf.push(e);
    }
    const auto g0 = h.online(0), g1 = h.online(1);
    h.train_batch(buf, 4, 0.05, rng);
    CHECK(h.online(0) == g0);
    CHECK_FALSE(h.online(1) == g1);
}

TEST_CASE("train_batch uses the batch-mean gradient") {
    Rng rng(9);
    HyperDQN h(config({4}, 0.5), rng);
    ReplayBuffer buf(10);
    auto e = random_experience(4, 1, rng);
    buf.push(e);
    // one experience drawn twice: the mean equals the single-sample gradient
    HyperDQN a = h, b = h;
    Rng r1(1), r2(1);
    a.train_batch(buf, 1, 0.01, r1);
    b.train_batch(buf, 2, 0.01, r2);
    CHECK(testing::max_abs_diff(a.online(0).layer(0).weight, b.online(0).layer(0).weight) < 1e-15);
}

TEST_CASE("maybe_sync_target") {
    Rng rng(10);
    HyperDQN every(config({3}, 0.9, 1), rng);
    ReplayBuffer buf(10);
    buf.push(random_experience(3, 1, rng));
    for (int i = 0; i < 3; ++i) {
        every.train_batch(buf, 1, 0.05, rng);
        CHECK(every.maybe_sync_target());
        CHECK(every.target(0) == every.online(0));
    }

    HyperDQN five(config({3}, 0.9, 5), rng);
    for (int i = 0; i < 3; ++i) five.train_batch(buf, 1, 0.05, rng);
    CHECK_FALSE(five.maybe_sync_target());
    CHECK_FALSE(five.target(0) == five.online(0));
    for (int i = 0; i < 2; ++i) five.train_batch(buf, 1, 0.05, rng);
    CHECK(five.maybe_sync_target());
    const auto s = testing::random_vector(3, 0, 1, rng);
    CHECK(five.predict_target(s) == five.predict_costs(s));
    CHECK(five.syncs() == 1);
}

TEST_CASE("replay buffer capacity and uniform sampling") {
    ReplayBuffer buf(20);
    Rng rng(11);
    for (int i = 0; i < 55; ++i) {
        auto e = random_experience(3, 1, rng);
        e.cost[0] = i;
        buf.push(e);
        CHECK(buf.size() <= 20);
    }
    CHECK(buf.size() == 20);
    CHECK(buf.at(0).cost[0] == 35);  // oldest entries dropped first
    CHECK(buf.at(19).cost[0] == 54);

    const int draws = 100000;
    std::vector<double> hits(20, 0);
    for (int i = 0; i < draws; ++i) hits[buf.sample_index(rng)] += 1;
    const double p = 1.0 / 20, sigma = std::sqrt(p * (1 - p) / draws);
    for (double h : hits) CHECK(std::abs(h / draws - p) <= 3 * sigma);

    ReplayBuffer unbounded(0);
    for (int i = 0; i < 50000; ++i) unbounded.push(Experience{});
    CHECK(unbounded.size() == 50000);
}

TEST_CASE("myopic training ranks files by expected cost") {
    // stationary single-state demand; every file uncached at the leaf
    NetworkConfig nc;
    nc.leaves = 1;
    nc.files = 10;
    nc.parent_capacity = 3;
    nc.leaf_capacity = 0;
    nc.slots_per_interval = 2;
    nc.requests_per_slot = 100;
    auto profile = zipf_profile(10, 0.8, std::vector<std::size_t>{3, 7, 1, 9, 0, 5, 2, 8, 4, 6});
    std::vector<std::unique_ptr<LeafPolicy>> pols;
    pols.push_back(std::make_unique<SmoothedTopM>(10, 0, 0.3));
    TwoTierNetwork net(nc, {PopularityChain({profile}, {1.0})}, std::move(pols), Rng(12));

    Rng rng(13);
    HyperDQN h(config({5, 5}, 0.0), rng);
    ReplayBuffer buf(5000);
    const double scale = 100.0;
    auto scaled = [&](std::vector<double> v) {
        for (auto& x : v) x /= scale;
        return v;
    };
    ParentState s = net.advance().state;
    for (int k = 0; k < 3000; ++k) {
        auto a = random_action(10, 3, rng);
        auto r = net.run_interval(a);
        buf.push(Experience{scaled(s), a, scaled(r.cost), scaled(r.trace.state)});
        s = r.trace.state;
        h.train_batch(buf, 32, 0.01, rng);
        h.maybe_sync_target();
    }
    // expected cost of an uncached file: 2 R p_f
    std::vector<double> truth(profile.values().begin(), profile.values().end());
    CHECK(spearman(h.predict_costs(scaled(s)), truth) >= 0.9);
}

TEST_CASE("checkpoint round trip") {
    testing::TempDir dir("dqn");
    Rng rng(14);
    DqnConfig c = config({4, 3, 3}, 0.6, 7);
    c.hidden_factor = 3;
    HyperDQN h(c, rng);
    ReplayBuffer buf(10);
    buf.push(random_experience(10, 2, rng));
    for (int i = 0; i < 9; ++i) {
        h.train_batch(buf, 1, 0.01, rng);
        h.maybe_sync_target();
    }
    h.save(dir.path());
    CHECK(std::filesystem::exists(dir.path() / "group_2.net"));
    std::ifstream is(dir.path() / "manifest.json");
    auto m = nlohmann::json::parse(is);
    CHECK(m.at("partition") == std::vector<std::size_t>{4, 3, 3});
    CHECK(m.at("training_steps") == 9);
    CHECK(m.at("syncs") == 1);
    CHECK(m.at("sync_period") == 7);
    CHECK(m.at("gamma") == 0.6);

    auto back = HyperDQN::load(dir.path());
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(back.online(k) == h.online(k));
        CHECK(back.target(k) == back.online(k));
    }
    CHECK(back.training_steps() == 9);
    CHECK(back.config().hidden_factor == 3);
    const auto s = testing::random_vector(10, 0, 1, rng);
    CHECK(back.predict_costs(s) == h.predict_costs(s));

    std::vector<FeedforwardNet> wrong{FeedforwardNet({4, 8, 4}), FeedforwardNet({3, 6, 3})};
    CHECK_THROWS_AS(HyperDQN(config({4, 3, 3}), wrong), InvalidPartitionError);
}
