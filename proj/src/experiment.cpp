#include "cacherl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cacherl/errors.hpp"
#include "cacherl/tabular_q.hpp"

namespace cacherl {

using nlohmann::json;

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::SingleNodeTabular: return "single-node-tabular";
        case Scenario::SingleNodeLinear: return "single-node-linear";
        case Scenario::SingleNodeOracle: return "single-node-oracle";
        case Scenario::NetworkDqn: return "network-dqn";
        case Scenario::NetworkBaselines: return "network-baselines";
    }
    return "unknown";
}

Scenario scenario_from_string(const std::string& name) {
    for (auto s : {Scenario::SingleNodeTabular, Scenario::SingleNodeLinear, Scenario::SingleNodeOracle,
                   Scenario::NetworkDqn, Scenario::NetworkBaselines})
        if (to_string(s) == name) return s;
    throw ConfigError("scenario", "unknown scenario '" + name + "'");
}

PopularityChain ChainSpec::build(std::size_t files, Rng& rng) const {
    switch (kind) {
        case Kind::Etas: return chain_from_etas(etas, files, rng);
        case Kind::Random: return random_chain(states, files, eta_lo, eta_hi, rng);
        case Kind::File: {
            std::ifstream is(file);
            if (!is) throw ConfigError("chain.file", "cannot open " + file);
            auto chain = chain_from_json(json::parse(is));
            if (chain.num_files() != files) throw ConfigError("chain.file", "chain file count differs from F");
            return chain;
        }
    }
    throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------- presets

namespace {

json small_instance(double refresh, double local_miss, double global_miss) {
    return {{"scenario", "single-node-tabular"},
            {"steps", 200000},
            {"seeds", {{"start", 1}, {"count", 10}}},
            {"oracle_column", true},
            {"single_node",
             {{"files", 10},
              {"capacity", 2},
              {"gamma", 0.9},
              {"requests_per_slot", 100},
              {"reveal", "chain-state"},
              {"weights", {{"refresh", refresh}, {"local_miss", local_miss}, {"global_miss", global_miss}}},
              {"global", {{"etas", {1.0, 1.5}}}},
              {"local", {{"etas", {0.7, 2.5}}}}}},
            {"tabular", {{"step", "constant"}, {"beta", 0.8}, {"epsilon", {{"kind", "constant"}, {"value", 0.05}}}}},
            {"linear",
             {{"alpha_global", 0.005},
              {"alpha_local", 0.005},
              {"alpha_refresh", 0.005},
              {"epsilon", {{"kind", "constant"}, {"value", 0.05}}}}}};
}

json large_instance(double refresh, double local_miss, double global_miss) {
    return {{"scenario", "single-node-linear"},
            {"steps", 1000000},
            {"seeds", {{"start", 1}, {"count", 1}}},
            {"oracle_column", false},
            {"single_node",
             {{"files", 1000},
              {"capacity", 10},
              {"gamma", 0.9},
              {"requests_per_slot", 100},
              {"reveal", "chain-state"},
              {"weights", {{"refresh", refresh}, {"local_miss", local_miss}, {"global_miss", global_miss}}},
              {"global", {{"states", 50}, {"eta_lo", 2.0}, {"eta_hi", 4.0}}},
              {"local", {{"states", 40}, {"eta_lo", 2.0}, {"eta_hi", 4.0}}}}},
            {"linear",
             {{"alpha_global", 0.005},
              {"alpha_local", 0.005},
              {"alpha_refresh", 0.005},
              {"epsilon", {{"kind", "burn_in_inverse"}, {"burn_in", 700000}}}}}};
}

json network_preset(std::size_t leaves, bool scaled) {
    json doc = {{"scenario", "network-dqn"},
                {"steps", 2000},
                {"seeds", {{"start", 1}, {"count", 10}}},
                {"network",
                 {{"leaves", leaves},
                  {"files", 100},
                  {"parent_capacity", 10},
                  {"leaf_capacity", 5},
                  {"slots_per_interval", 2},
                  {"requests_per_slot", 200},
                  {"leaf_states", 4},
                  {"eta_lo", 1.2},
                  {"eta_hi", 1.8},
                  {"persistence", 0.98},
                  {"leaf_policy", "smoothed"},
                  {"smoothing", 0.3}}},
                {"dqn",
                 {{"groups", 5},
                  {"hidden_factor", 2},
                  {"hidden_layers", 1},
                  {"head", "linear"},
                  {"gamma", 0.0},
                  {"sync_period", 50},
                  {"lr", 0.01},
                  {"batch", 32},
                  {"replay_capacity", 10000},
                  {"epsilon_start", 1.0},
                  {"epsilon_end", 0.05},
                  {"anneal_fraction", 0.2},
                  {"cost_scale", 2.0},
                  {"state_scale", 2.0}}},
                {"baselines", {"lru", "lfu", "fifo", "optimal", "nocache"}}};
    if (scaled) doc["scaled"] = true;
    return doc;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"s1", "s2", "s3", "s4", "s5", "s6", "s2-decay", "small", "large", "network-n5", "network-n10", "network-n50"};
}

json preset(const std::string& name) {
    json doc;
    if (name == "s1") doc = small_instance(10, 600, 1000);
    else if (name == "s2") doc = small_instance(600, 10, 1000);
    else if (name == "s3") doc = small_instance(10, 10, 1000);
    else if (name == "small") doc = small_instance(10, 600, 1000);
    else if (name == "s2-decay") {
        doc = small_instance(600, 10, 1000);
        doc["tabular"] = {{"step", "polynomial"},
                          {"beta", 0.8},
                          {"omega", 0.55},
                          {"epsilon", {{"kind", "burn_in_inverse"}, {"burn_in", 20000}}}};
    }
    else if (name == "s4") doc = large_instance(100, 20, 20);
    else if (name == "s5") doc = large_instance(0, 0, 1000);
    else if (name == "s6") doc = large_instance(0, 1000, 600);
    else if (name == "large") doc = large_instance(100, 20, 20);
    else if (name == "network-n5") doc = network_preset(5, false);
    else if (name == "network-n10") doc = network_preset(10, false);
    else if (name == "network-n50") doc = network_preset(50, true);
    else throw ConfigError("preset", "unknown preset '" + name + "'");
    doc["name"] = name;
    return doc;
}

// ---------------------------------------------------------------- parsing

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
    if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ConfigError(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
    }
}

std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

template <typename T>
T read(const json& obj, const char* key, const std::string& path, T fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    const json& v = obj.at(key);
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(join(path, key), "expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(join(path, key), "expected an integer");
            if constexpr (std::is_unsigned_v<T>)
                if (v.get<std::int64_t>() < 0) throw ConfigError(join(path, key), "must be nonnegative");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
        }
        return v.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(join(path, key), e.what());
    }
}

EpsilonSchedule parse_epsilon(const json& obj, const std::string& path, EpsilonSchedule fallback) {
    if (obj.is_null()) return fallback;
    check_keys(obj, {"kind", "value", "burn_in", "start", "end", "steps"}, path);
    const auto kind = read<std::string>(obj, "kind", path, "constant");
    if (kind == "constant") return EpsilonSchedule::constant(read(obj, "value", path, 0.05));
    if (kind == "burn_in_inverse") return EpsilonSchedule::burn_in_inverse(read<std::uint64_t>(obj, "burn_in", path, 0));
    if (kind == "linear")
        return EpsilonSchedule::linear(read(obj, "start", path, 1.0), read(obj, "end", path, 0.05),
                                       read<std::uint64_t>(obj, "steps", path, 0));
    throw ConfigError(join(path, "kind"), "unknown epsilon schedule '" + kind + "'");
}

json epsilon_to_json(const EpsilonSchedule& e) {
    switch (e.kind) {
        case EpsilonSchedule::Kind::Constant: return {{"kind", "constant"}, {"value", e.value}};
        case EpsilonSchedule::Kind::BurnInInverse: return {{"kind", "burn_in_inverse"}, {"burn_in", e.burn_in}};
        case EpsilonSchedule::Kind::Linear:
            return {{"kind", "linear"}, {"start", e.start}, {"end", e.end}, {"steps", e.anneal_steps}};
    }
    return {};
}

ChainSpec parse_chain(const json& obj, const std::string& path) {
    check_keys(obj, {"etas", "states", "eta_lo", "eta_hi", "file"}, path);
    ChainSpec c;
    if (obj.contains("file")) {
        c.kind = ChainSpec::Kind::File;
        c.file = read<std::string>(obj, "file", path, "");
    } else if (obj.contains("etas")) {
        c.kind = ChainSpec::Kind::Etas;
        try {
            c.etas = obj.at("etas").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw ConfigError(join(path, "etas"), e.what());
        }
        c.states = c.etas.size();
    } else {
        c.kind = ChainSpec::Kind::Random;
        c.states = read<std::size_t>(obj, "states", path, 2);
        c.eta_lo = read(obj, "eta_lo", path, 0.5);
        c.eta_hi = read(obj, "eta_hi", path, 1.5);
    }
    return c;
}

json chain_spec_to_json(const ChainSpec& c) {
    switch (c.kind) {
        case ChainSpec::Kind::Etas: return {{"etas", c.etas}};
        case ChainSpec::Kind::Random: return {{"states", c.states}, {"eta_lo", c.eta_lo}, {"eta_hi", c.eta_hi}};
        case ChainSpec::Kind::File: return {{"file", c.file}};
    }
    return {};
}

std::vector<std::uint64_t> parse_seeds(const json& v) {
    std::vector<std::uint64_t> seeds;
    try {
        if (v.is_array()) {
            seeds = v.get<std::vector<std::uint64_t>>();
        } else if (v.is_object()) {
            check_keys(v, {"start", "count"}, "seeds");
            const auto start = read<std::uint64_t>(v, "start", "seeds", 1);
            const auto count = read<std::uint64_t>(v, "count", "seeds", 1);
            for (std::uint64_t i = 0; i < count; ++i) seeds.push_back(start + i);
        } else if (v.is_number_unsigned()) {
            seeds.push_back(v.get<std::uint64_t>());
        } else {
            throw ConfigError("seeds", "expected a list, {start, count} or a single seed");
        }
    } catch (const json::exception& e) {
        throw ConfigError("seeds", e.what());
    }
    return seeds;
}

}  // namespace

ExperimentConfig parse_config(const json& input) {
    if (!input.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    json doc = json::object();
    if (input.contains("preset")) {
        if (!input.at("preset").is_string()) throw ConfigError("preset", "expected a string");
        doc = preset(input.at("preset").get<std::string>());
    }
    doc.merge_patch(input);
    doc.erase("preset");

    check_keys(doc, {"name", "scenario", "seeds", "steps", "output_dir", "oracle_column", "instance_seed", "scaled",
                     "single_node", "tabular", "linear", "network", "dqn", "baselines"},
               "");
    ExperimentConfig cfg;
    cfg.name = read<std::string>(doc, "name", "", cfg.name);
    cfg.scenario = scenario_from_string(read<std::string>(doc, "scenario", "", to_string(cfg.scenario)));
    if (doc.contains("seeds")) cfg.seeds = parse_seeds(doc.at("seeds"));
    cfg.steps = read<std::uint64_t>(doc, "steps", "", cfg.steps);
    cfg.output_dir = read<std::string>(doc, "output_dir", "", "");
    cfg.oracle_column = read(doc, "oracle_column", "", false);
    if (doc.contains("instance_seed")) cfg.single.instance_seed = read<std::uint64_t>(doc, "instance_seed", "", 0);

    if (doc.contains("single_node")) {
        const json& s = doc.at("single_node");
        const std::string p = "single_node";
        check_keys(s, {"files", "capacity", "gamma", "requests_per_slot", "reveal", "weights", "global", "local"}, p);
        auto& sn = cfg.single;
        sn.files = read<std::size_t>(s, "files", p, sn.files);
        sn.capacity = read<std::size_t>(s, "capacity", p, sn.capacity);
        sn.gamma = read(s, "gamma", p, sn.gamma);
        sn.requests_per_slot = read<std::uint64_t>(s, "requests_per_slot", p, sn.requests_per_slot);
        const auto reveal = read<std::string>(s, "reveal", p, "chain-state");
        if (reveal == "chain-state") sn.reveal = RevealMode::ChainState;
        else if (reveal == "empirical") sn.reveal = RevealMode::Empirical;
        else throw ConfigError(p + ".reveal", "expected 'chain-state' or 'empirical'");
        if (s.contains("weights")) {
            const json& w = s.at("weights");
            check_keys(w, {"refresh", "local_miss", "global_miss"}, p + ".weights");
            sn.weights.refresh = read(w, "refresh", p + ".weights", 0.0);
            sn.weights.local_miss = read(w, "local_miss", p + ".weights", 0.0);
            sn.weights.global_miss = read(w, "global_miss", p + ".weights", 0.0);
        }
        if (s.contains("global")) sn.global = parse_chain(s.at("global"), p + ".global");
        if (s.contains("local")) sn.local = parse_chain(s.at("local"), p + ".local");
    }
    if (doc.contains("tabular")) {
        const json& t = doc.at("tabular");
        check_keys(t, {"step", "beta", "omega", "epsilon"}, "tabular");
        const auto step = read<std::string>(t, "step", "tabular", "constant");
        if (step == "constant") cfg.tabular.step = StepSchedule::constant(read(t, "beta", "tabular", 0.8));
        else if (step == "inverse_visit") cfg.tabular.step = StepSchedule::inverse_visit();
        else if (step == "polynomial")
            cfg.tabular.step = StepSchedule::polynomial(read(t, "beta", "tabular", 0.8), read(t, "omega", "tabular", 0.6));
        else throw ConfigError("tabular.step", "expected 'constant', 'inverse_visit' or 'polynomial'");
        if (t.contains("epsilon")) cfg.tabular.epsilon = parse_epsilon(t.at("epsilon"), "tabular.epsilon", cfg.tabular.epsilon);
    }
    if (doc.contains("linear")) {
        const json& l = doc.at("linear");
        check_keys(l, {"alpha_global", "alpha_local", "alpha_refresh", "epsilon"}, "linear");
        cfg.linear.steps.global = read(l, "alpha_global", "linear", cfg.linear.steps.global);
        cfg.linear.steps.local = read(l, "alpha_local", "linear", cfg.linear.steps.local);
        cfg.linear.steps.refresh = read(l, "alpha_refresh", "linear", cfg.linear.steps.refresh);
        if (l.contains("epsilon")) cfg.linear.epsilon = parse_epsilon(l.at("epsilon"), "linear.epsilon", cfg.linear.epsilon);
    }
    if (doc.contains("network")) {
        const json& n = doc.at("network");
        const std::string p = "network";
        check_keys(n, {"leaves", "files", "parent_capacity", "leaf_capacity", "slots_per_interval", "weights",
                       "requests_per_slot", "leaf_states", "eta_lo", "eta_hi", "persistence", "leaf_policy", "smoothing"},
                   p);
        auto& nc = cfg.network;
        nc.leaves = read<std::size_t>(n, "leaves", p, nc.leaves);
        nc.files = read<std::size_t>(n, "files", p, nc.files);
        nc.parent_capacity = read<std::size_t>(n, "parent_capacity", p, nc.parent_capacity);
        nc.leaf_capacity = read<std::size_t>(n, "leaf_capacity", p, nc.leaf_capacity);
        nc.slots_per_interval = read<std::size_t>(n, "slots_per_interval", p, nc.slots_per_interval);
        if (n.contains("weights") && !n.at("weights").is_null()) {
            try {
                nc.weights = n.at("weights").get<std::vector<double>>();
            } catch (const json::exception& e) {
                throw ConfigError(p + ".weights", e.what());
            }
        }
        nc.requests_per_slot = read<std::uint64_t>(n, "requests_per_slot", p, nc.requests_per_slot);
        nc.leaf_states = read<std::size_t>(n, "leaf_states", p, nc.leaf_states);
        nc.eta_lo = read(n, "eta_lo", p, nc.eta_lo);
        nc.eta_hi = read(n, "eta_hi", p, nc.eta_hi);
        nc.persistence = read(n, "persistence", p, nc.persistence);
        const auto lp = read<std::string>(n, "leaf_policy", p, "smoothed");
        if (lp == "smoothed") nc.leaf_policy = LeafPolicyKind::Smoothed;
        else if (lp == "recency") nc.leaf_policy = LeafPolicyKind::Recency;
        else throw ConfigError(p + ".leaf_policy", "expected 'smoothed' or 'recency'");
        nc.smoothing = read(n, "smoothing", p, nc.smoothing);
    }
    if (doc.contains("dqn")) {
        const json& d = doc.at("dqn");
        const std::string p = "dqn";
        check_keys(d, {"groups", "partition", "hidden_factor", "hidden_layers", "head", "gamma", "sync_period", "lr", "batch",
                       "replay_capacity", "epsilon_start", "epsilon_end", "anneal_fraction", "cost_scale", "state_scale"},
                   p);
        auto& dq = cfg.dqn;
        dq.groups = read<std::size_t>(d, "groups", p, dq.groups);
        if (d.contains("partition")) {
            try {
                dq.net.partition = d.at("partition").get<std::vector<std::size_t>>();
            } catch (const json::exception& e) {
                throw ConfigError(p + ".partition", e.what());
            }
        }
        dq.net.hidden_factor = read<std::size_t>(d, "hidden_factor", p, dq.net.hidden_factor);
        dq.net.hidden_layers = read<std::size_t>(d, "hidden_layers", p, dq.net.hidden_layers);
        try {
            dq.net.head = output_head_from_string(read<std::string>(d, "head", p, "linear"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(p + ".head", e.what());
        }
        dq.net.gamma = read(d, "gamma", p, dq.net.gamma);
        dq.net.sync_period = read<std::size_t>(d, "sync_period", p, dq.net.sync_period);
        dq.lr = read(d, "lr", p, dq.lr);
        dq.batch = read<std::size_t>(d, "batch", p, dq.batch);
        dq.replay_capacity = read<std::size_t>(d, "replay_capacity", p, dq.replay_capacity);
        dq.epsilon_start = read(d, "epsilon_start", p, dq.epsilon_start);
        dq.epsilon_end = read(d, "epsilon_end", p, dq.epsilon_end);
        dq.anneal_fraction = read(d, "anneal_fraction", p, dq.anneal_fraction);
        dq.cost_scale = read(d, "cost_scale", p, dq.cost_scale);
        dq.state_scale = read(d, "state_scale", p, dq.state_scale);
    }
    if (doc.contains("baselines")) {
        try {
            cfg.baselines = doc.at("baselines").get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw ConfigError("baselines", e.what());
        }
    }
    if (cfg.dqn.net.partition.empty() && cfg.dqn.groups > 0 && cfg.dqn.groups <= cfg.network.files)
        cfg.dqn.net.partition = even_partition(cfg.network.files, cfg.dqn.groups);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("<file>", "cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("<file>", std::string("parse error: ") + e.what());
    }
    if (!doc.contains("name")) doc["name"] = path.stem().string();
    return parse_config(doc);
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
    if (steps == 0) throw ConfigError("steps", "must be positive");
    const bool single = scenario == Scenario::SingleNodeTabular || scenario == Scenario::SingleNodeLinear ||
                        scenario == Scenario::SingleNodeOracle;
    if (single) {
        const auto& s = this->single;
        if (s.files == 0) throw ConfigError("single_node.files", "must be positive");
        if (s.capacity > s.files) throw ConfigError("single_node.capacity", "M must not exceed F");
        if (!(s.gamma >= 0.0 && s.gamma < 1.0)) throw ConfigError("single_node.gamma", "must lie in [0, 1)");
        for (double w : {s.weights.refresh, s.weights.local_miss, s.weights.global_miss})
            if (!(w >= 0.0)) throw ConfigError("single_node.weights", "weights must be nonnegative");
        if (s.reveal == RevealMode::Empirical && s.requests_per_slot == 0)
            throw ConfigError("single_node.requests_per_slot", "empirical reveal needs requests");
        auto check_chain = [](const ChainSpec& c, const std::string& p) {
            if (c.kind == ChainSpec::Kind::Etas && c.etas.empty()) throw ConfigError(p + ".etas", "must be nonempty");
            if (c.kind == ChainSpec::Kind::Random) {
                if (c.states == 0) throw ConfigError(p + ".states", "must be positive");
                if (!(c.eta_lo >= 0.0 && c.eta_lo <= c.eta_hi)) throw ConfigError(p + ".eta_lo", "need 0 <= eta_lo <= eta_hi");
            }
            for (double e : c.etas)
                if (!(e >= 0.0)) throw ConfigError(p + ".etas", "exponents must be nonnegative");
        };
        check_chain(s.global, "single_node.global");
        check_chain(s.local, "single_node.local");
        const bool needs_table = scenario == Scenario::SingleNodeTabular || scenario == Scenario::SingleNodeOracle ||
                                 oracle_column;
        if (needs_table && s.files > ActionSet::kMaxFiles)
            throw ConfigError("single_node.files", "exact methods support at most 20 files");
        try {
            tabular.epsilon.validate();
            tabular.step.validate();
            linear.epsilon.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("schedule", e.what());
        }
        for (double a : {linear.steps.global, linear.steps.local, linear.steps.refresh})
            if (!(a >= 0.0)) throw ConfigError("linear.alpha", "step sizes must be nonnegative");
    } else {
        network.validate();
        try {
            dqn.net.validate(network.files);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("dqn.partition", e.what());
        }
        if (!(dqn.lr > 0.0)) throw ConfigError("dqn.lr", "must be positive");
        if (dqn.batch == 0) throw ConfigError("dqn.batch", "must be positive");
        for (double e : {dqn.epsilon_start, dqn.epsilon_end})
            if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("dqn.epsilon", "must lie in [0, 1]");
        if (!(dqn.anneal_fraction >= 0.0 && dqn.anneal_fraction <= 1.0))
            throw ConfigError("dqn.anneal_fraction", "must lie in [0, 1]");
        if (!(dqn.cost_scale >= 0.0)) throw ConfigError("dqn.cost_scale", "must be nonnegative");
        if (!(dqn.state_scale >= 0.0)) throw ConfigError("dqn.state_scale", "must be nonnegative");
        static const std::set<std::string> known{"lru", "lfu", "fifo", "optimal", "nocache"};
        for (const auto& b : baselines)
            if (!known.count(b)) throw ConfigError("baselines", "unknown baseline '" + b + "'");
    }
}

json config_to_json(const ExperimentConfig& c) {
    json doc = {{"name", c.name},
                {"scenario", to_string(c.scenario)},
                {"seeds", c.seeds},
                {"steps", c.steps},
                {"oracle_column", c.oracle_column}};
    if (c.single.instance_seed) doc["instance_seed"] = *c.single.instance_seed;
    const bool single = c.scenario == Scenario::SingleNodeTabular || c.scenario == Scenario::SingleNodeLinear ||
                        c.scenario == Scenario::SingleNodeOracle;
    if (single) {
        const auto& s = c.single;
        doc["single_node"] = {{"files", s.files},
                              {"capacity", s.capacity},
                              {"gamma", s.gamma},
                              {"requests_per_slot", s.requests_per_slot},
                              {"reveal", s.reveal == RevealMode::ChainState ? "chain-state" : "empirical"},
                              {"weights",
                               {{"refresh", s.weights.refresh},
                                {"local_miss", s.weights.local_miss},
                                {"global_miss", s.weights.global_miss}}},
                              {"global", chain_spec_to_json(s.global)},
                              {"local", chain_spec_to_json(s.local)}};
        static const char* step_names[] = {"constant", "inverse_visit", "polynomial"};
        doc["tabular"] = {{"step", step_names[static_cast<int>(c.tabular.step.kind)]},
                          {"beta", c.tabular.step.beta},
                          {"omega", c.tabular.step.omega},
                          {"epsilon", epsilon_to_json(c.tabular.epsilon)}};
        doc["linear"] = {{"alpha_global", c.linear.steps.global},
                         {"alpha_local", c.linear.steps.local},
                         {"alpha_refresh", c.linear.steps.refresh},
                         {"epsilon", epsilon_to_json(c.linear.epsilon)}};
    } else {
        const auto& n = c.network;
        doc["network"] = {{"leaves", n.leaves},
                          {"files", n.files},
                          {"parent_capacity", n.parent_capacity},
                          {"leaf_capacity", n.leaf_capacity},
                          {"slots_per_interval", n.slots_per_interval},
                          {"weights", n.effective_weights()},
                          {"requests_per_slot", n.requests_per_slot},
                          {"leaf_states", n.leaf_states},
                          {"eta_lo", n.eta_lo},
                          {"eta_hi", n.eta_hi},
                          {"persistence", n.persistence},
                          {"leaf_policy", n.leaf_policy == LeafPolicyKind::Smoothed ? "smoothed" : "recency"},
                          {"smoothing", n.smoothing}};
        const auto& d = c.dqn;
        doc["dqn"] = {{"partition", d.net.partition},
                      {"hidden_factor", d.net.hidden_factor},
                      {"hidden_layers", d.net.hidden_layers},
                      {"head", std::string(to_string(d.net.head))},
                      {"gamma", d.net.gamma},
                      {"sync_period", d.net.sync_period},
                      {"lr", d.lr},
                      {"batch", d.batch},
                      {"replay_capacity", d.replay_capacity},
                      {"epsilon_start", d.epsilon_start},
                      {"epsilon_end", d.epsilon_end},
                      {"anneal_fraction", d.anneal_fraction},
                      {"cost_scale", d.cost_scale},
                      {"state_scale", d.state_scale}};
        doc["baselines"] = c.baselines;
    }
    return doc;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    const std::string text = config_to_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------- runs

namespace {

Rng instance_rng(const ExperimentConfig& config, std::uint64_t seed) {
    return Rng(config.single.instance_seed.value_or(seed)).split(streams::instance);
}

EnvConfig make_env_config(const ExperimentConfig& config, std::uint64_t seed) {
    const auto& s = config.single;
    Rng inst = instance_rng(config, seed);
    Rng g_rng = inst.split(1), l_rng = inst.split(2);
    EnvConfig env;
    env.files = s.files;
    env.capacity = s.capacity;
    env.weights = s.weights;
    env.gamma = s.gamma;
    env.global = s.global.build(s.files, g_rng);
    env.local = s.local.build(s.files, l_rng);
    env.requests_per_slot = s.requests_per_slot;
    env.reveal = s.reveal;
    return env;
}

double scale_or(double scale, double fallback) { return scale > 0.0 ? scale : fallback; }

json tail_summary(const RunRecord& r) {
    const std::size_t n = r.cost.size();
    const std::size_t tail_from = n - std::max<std::size_t>(1, n / 10);
    json s = {{"mean_cost", mean_of(r.cost, 0, n)}, {"tail_mean_cost", mean_of(r.cost, tail_from, n)}};
    json pol = json::object();
    for (std::size_t p = 0; p < r.policy_names.size(); ++p)
        pol[r.policy_names[p]] = {{"mean_cost", mean_of(r.policies[p], 0, n)},
                                  {"tail_mean_cost", mean_of(r.policies[p], tail_from, n)}};
    s["policies"] = pol;
    return s;
}

RunRecord run_single(const ExperimentConfig& config, std::uint64_t seed) {
    RunRecord rec;
    rec.seed = seed;
    Rng root(seed);
    Rng agent = root.split(streams::agent);

    std::optional<CachingMdp> problem;
    std::optional<ValueTable> oracle;
    if (config.oracle_column || config.scenario == Scenario::SingleNodeOracle) {
        problem = make_single_mdp(config, seed);
        oracle = policy_iteration(problem->mdp);
    }

    SingleNodeEnv env = make_single_env(config, seed);
    switch (config.scenario) {
        case Scenario::SingleNodeTabular:
            rec.cost = run_q_learning(env, config.tabular.step, config.tabular.epsilon, config.single.gamma, config.steps, agent).costs;
            break;
        case Scenario::SingleNodeLinear:
            rec.cost = run_linear_q(env, config.linear.steps, config.linear.epsilon, config.single.gamma, config.steps, agent).costs;
            break;
        case Scenario::SingleNodeOracle:
            rec.cost = simulate_policy(env, *problem, oracle->policy, config.steps);
            break;
        default: throw std::logic_error("not a single-node scenario");
    }
    if (config.oracle_column && config.scenario != Scenario::SingleNodeOracle) {
        SingleNodeEnv twin = make_single_env(config, seed);
        rec.policy_names.push_back("oracle");
        rec.policies.push_back(simulate_policy(twin, *problem, oracle->policy, config.steps));
    }
    return rec;
}

std::unique_ptr<ParentBaseline> make_baseline(const std::string& name, const NetworkConfig& n) {
    if (name == "lru") return std::make_unique<EventBaseline>(n.files, n.parent_capacity, EvictionPolicy::LRU);
    if (name == "lfu") return std::make_unique<EventBaseline>(n.files, n.parent_capacity, EvictionPolicy::LFU);
    if (name == "fifo") return std::make_unique<EventBaseline>(n.files, n.parent_capacity, EvictionPolicy::FIFO);
    if (name == "optimal") return std::make_unique<NonCausalBaseline>(n.parent_capacity);
    if (name == "nocache") return std::make_unique<NoCacheBaseline>();
    throw ConfigError("baselines", "unknown baseline '" + name + "'");
}

RunRecord run_network(const ExperimentConfig& config, std::uint64_t seed) {
    RunRecord rec;
    rec.seed = seed;
    Rng root(seed);
    TwoTierNetwork net(config.network, root.split(streams::instance), root.split(streams::environment));
    Rng agent = root.split(streams::agent);

    std::vector<std::unique_ptr<ParentBaseline>> baselines;
    for (const auto& name : config.baselines) {
        baselines.push_back(make_baseline(name, config.network));
        rec.policy_names.push_back(name);
    }
    rec.policies.assign(baselines.size(), {});
    for (auto& col : rec.policies) col.reserve(config.steps);
    rec.cost.reserve(config.steps);

    const auto& d = config.dqn;
    const double volume = static_cast<double>(config.network.requests_per_slot);
    const double cost_div = scale_or(d.cost_scale, volume);
    const double state_div = scale_or(d.state_scale, volume);
    const bool learn = config.scenario == Scenario::NetworkDqn;

    std::optional<HyperDQN> dqn;
    ReplayBuffer buffer(d.replay_capacity);
    EpsilonSchedule explore = EpsilonSchedule::linear(
        d.epsilon_start, d.epsilon_end,
        static_cast<std::uint64_t>(std::llround(d.anneal_fraction * static_cast<double>(config.steps))));
    if (learn) {
        Rng init = agent.split(1);
        dqn.emplace(d.net, init);
    }

    auto scaled = [](const std::vector<double>& v, double div) {
        std::vector<double> out(v);
        for (auto& x : out) x /= div;
        return out;
    };

    ParentState s_prev = scaled(net.state(), state_div);
    const ActionVector empty(std::vector<std::uint8_t>(config.network.files, 0), 0);
    for (std::uint64_t tau = 1; tau <= config.steps; ++tau) {
        if (learn) {
            const ActionVector a = select_action(*dqn, s_prev, config.network.parent_capacity, explore.at(tau), agent);
            IntervalResult res = net.run_interval(a);
            ParentState s_new = scaled(res.trace.state, state_div);
            buffer.push(Experience{s_prev, a, scaled(res.cost, cost_div), s_new});
            dqn->train_batch(buffer, d.batch, d.lr, agent);
            dqn->maybe_sync_target();
            rec.cost.push_back(res.total_cost);
            for (std::size_t b = 0; b < baselines.size(); ++b) rec.policies[b].push_back(baselines[b]->serve(res.trace, net));
            s_prev = std::move(s_new);
        } else {
            IntervalTrace trace = net.advance();
            const auto c = net.interval_cost(trace, empty);
            rec.cost.push_back(std::accumulate(c.begin(), c.end(), 0.0));
            for (std::size_t b = 0; b < baselines.size(); ++b) rec.policies[b].push_back(baselines[b]->serve(trace, net));
        }
    }
    return rec;
}

}  // namespace

SingleNodeEnv make_single_env(const ExperimentConfig& config, std::uint64_t seed) {
    return SingleNodeEnv(make_env_config(config, seed), Rng(seed).split(streams::environment));
}

CachingMdp make_single_mdp(const ExperimentConfig& config, std::uint64_t seed) {
    const EnvConfig env = make_env_config(config, seed);
    return build_mdp(env.global, env.local, env.files, env.capacity, env.weights, env.gamma);
}

std::vector<double> simulate_policy(SingleNodeEnv& env, const CachingMdp& problem, std::span<const std::size_t> policy,
                                    std::uint64_t steps) {
    std::vector<double> costs;
    costs.reserve(steps);
    for (std::uint64_t t = 0; t < steps; ++t) {
        const std::size_t s = problem.state_index(env.observed_global_index(), env.observed_local_index(),
                                                  problem.actions.index_of(env.state().action));
        costs.push_back(env.step(problem.actions[policy[s]]).cost);
    }
    return costs;
}

RunRecord run_seed(const ExperimentConfig& config, std::uint64_t seed) {
    RunRecord rec;
    try {
        switch (config.scenario) {
            case Scenario::SingleNodeTabular:
            case Scenario::SingleNodeLinear:
            case Scenario::SingleNodeOracle: rec = run_single(config, seed); break;
            case Scenario::NetworkDqn:
            case Scenario::NetworkBaselines: rec = run_network(config, seed); break;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error("seed " + std::to_string(seed) + ": " + e.what());
    }
    rec.summary = tail_summary(rec);
    rec.summary["seed"] = seed;
    rec.summary["config_hash"] = hash_hex(config_hash(config));
    rec.summary["scenario"] = to_string(config.scenario);
    rec.summary["steps"] = config.steps;
    return rec;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config, unsigned threads) {
    config.validate();
    const std::size_t n = config.seeds.size();
    std::vector<RunRecord> out(n);
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = run_seed(config, config.seeds[i]);
        return out;
    }
    std::vector<std::exception_ptr> errors(n);
    std::mutex m;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(m);
                if (next == n) return;
                i = next++;
            }
            try {
                out[i] = run_seed(config, config.seeds[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

RunRecord mean_trace(const std::vector<RunRecord>& records) {
    if (records.empty()) throw std::invalid_argument("mean_trace: no records");
    RunRecord m;
    m.policy_names = records.front().policy_names;
    const std::size_t steps = records.front().steps();
    m.cost.assign(steps, 0.0);
    m.policies.assign(m.policy_names.size(), std::vector<double>(steps, 0.0));
    for (const auto& r : records) {
        if (r.steps() != steps || r.policy_names != m.policy_names)
            throw std::invalid_argument("mean_trace: records are not aligned");
        for (std::size_t t = 0; t < steps; ++t) m.cost[t] += r.cost[t];
        for (std::size_t p = 0; p < m.policies.size(); ++p)
            for (std::size_t t = 0; t < steps; ++t) m.policies[p][t] += r.policies[p][t];
    }
    const double inv = 1.0 / static_cast<double>(records.size());
    for (auto& v : m.cost) v *= inv;
    for (auto& col : m.policies)
        for (auto& v : col) v *= inv;
    m.summary = tail_summary(m);
    m.summary["seeds"] = records.size();
    return m;
}

namespace {

void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

}  // namespace

std::string to_csv(const RunRecord& r) {
    std::string out = "step,cost,run_mean";
    for (const auto& name : r.policy_names) out += "," + name;
    out += '\n';
    double running = 0.0;
    for (std::size_t t = 0; t < r.cost.size(); ++t) {
        running += r.cost[t];
        out += std::to_string(t + 1);
        out += ',';
        append_double(out, r.cost[t]);
        out += ',';
        append_double(out, running / static_cast<double>(t + 1));
        for (const auto& col : r.policies) {
            out += ',';
            append_double(out, col[t]);
        }
        out += '\n';
    }
    return out;
}

RunRecord read_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(path.string() + ": empty file");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    if (header.size() < 3 || header[0] != "step" || header[1] != "cost" || header[2] != "run_mean")
        throw std::runtime_error(path.string() + ": header must start with step,cost,run_mean");
    RunRecord r;
    r.policy_names.assign(header.begin() + 3, header.end());
    r.policies.assign(r.policy_names.size(), {});
    std::size_t row = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        ++row;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != header.size())
            throw std::runtime_error(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                     " columns, header has " + std::to_string(header.size()));
        r.cost.push_back(std::stod(cells[1]));
        for (std::size_t p = 0; p < r.policies.size(); ++p) r.policies[p].push_back(std::stod(cells[3 + p]));
    }
    return r;
}

std::vector<std::filesystem::path> write_outputs(const ExperimentConfig& config, const std::vector<RunRecord>& records,
                                                 const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::filesystem::path& p, const std::string& text) {
        std::ofstream os(p, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + p.string());
        os << text;
        written.push_back(p);
    };
    json per_seed = json::array();
    for (const auto& r : records) {
        put(dir / (config.name + "_seed" + std::to_string(r.seed) + ".csv"), to_csv(r));
        per_seed.push_back(r.summary);
    }
    const RunRecord mean = mean_trace(records);
    put(dir / (config.name + "_mean.csv"), to_csv(mean));
    json summary = {{"name", config.name},
                    {"config_hash", hash_hex(config_hash(config))},
                    {"config", config_to_json(config)},
                    {"mean", mean.summary},
                    {"runs", per_seed}};
    put(dir / (config.name + "_summary.json"), summary.dump(2) + "\n");
    return written;
}

double mean_of(std::span<const double> v, std::size_t from, std::size_t to) {
    if (from >= to || to > v.size()) throw std::invalid_argument("mean_of: empty or out-of-range window");
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) s += v[i];
    return s / static_cast<double>(to - from);
}

CompareResult compare_policies(const std::vector<RunRecord>& records, const std::vector<std::string>& labels,
                               const std::string& reference, std::size_t samples, std::uint64_t seed) {
    if (records.empty()) throw std::invalid_argument("compare_policies: no records");
    if (labels.size() != records.size()) throw std::invalid_argument("compare_policies: one label per record required");
    const std::size_t steps = records.front().steps();
    // Flatten every column into (name, series), prefixing with the record label when there are several records.
    std::vector<std::pair<std::string, const std::vector<double>*>> cols;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.steps() != steps) throw std::invalid_argument("compare_policies: records have different step counts");
        cols.emplace_back(labels[i], &r.cost);
        for (std::size_t p = 0; p < r.policy_names.size(); ++p) {
            const std::string name = r.policy_names[p];
            const bool taken = std::any_of(cols.begin(), cols.end(), [&](const auto& c) { return c.first == name; });
            cols.emplace_back(taken ? labels[i] + ":" + name : name, &r.policies[p]);
        }
    }
    const std::vector<double>* ref = nullptr;
    for (const auto& [name, series] : cols)
        if (name == reference) ref = series;
    if (!ref) throw std::invalid_argument("compare_policies: reference column '" + reference + "' not found");

    // Sampled steps, uniform without replacement.
    std::vector<std::size_t> idx(steps);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(samples, steps));
    std::sort(idx.begin(), idx.end());

    json table = json::array();
    std::string cdf = "policy,reduced_cost,cdf\n";
    for (const auto& [name, series] : cols) {
        std::vector<double> reduced(steps);
        for (std::size_t t = 0; t < steps; ++t) reduced[t] = (*ref)[t] - (*series)[t];
        table.push_back({{"policy", name},
                         {"mean_cost", mean_of(*series, 0, steps)},
                         {"mean_reduced_cost", mean_of(reduced, 0, steps)}});
        std::vector<double> picked;
        for (auto t : idx) picked.push_back(reduced[t]);
        std::sort(picked.begin(), picked.end());
        for (std::size_t k = 0; k < picked.size(); ++k) {
            cdf += name + ",";
            append_double(cdf, picked[k]);
            cdf += ",";
            append_double(cdf, static_cast<double>(k + 1) / static_cast<double>(picked.size()));
            cdf += '\n';
        }
    }
    return {json{{"reference", reference}, {"steps", steps}, {"samples", idx.size()}, {"policies", table}}, cdf};
}

}  // namespace cacherl
