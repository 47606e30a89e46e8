#include "cacherl/dqn.hpp"

#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cacherl/errors.hpp"

namespace cacherl {

void ReplayBuffer::push(Experience e) {
    if (capacity_ != 0 && items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(e));
}

void DqnConfig::validate(std::size_t num_files) const {
    if (partition.empty()) throw InvalidPartitionError("partition is empty");
    std::size_t total = 0;
    for (auto k : partition) {
        if (k == 0) throw InvalidPartitionError("partition has an empty group");
        total += k;
    }
    if (total != num_files)
        throw InvalidPartitionError("partition sums to " + std::to_string(total) + ", expected " + std::to_string(num_files));
    if (hidden_factor == 0) throw std::invalid_argument("hidden_factor must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
    if (sync_period == 0) throw std::invalid_argument("sync period must be positive");
}

std::vector<std::vector<double>> partition_state(std::span<const double> s0, std::span<const std::size_t> partition) {
    const std::size_t total = std::accumulate(partition.begin(), partition.end(), std::size_t{0});
    if (total != s0.size())
        throw InvalidPartitionError("partition sums to " + std::to_string(total) + ", state has " +
                                    std::to_string(s0.size()) + " entries");
    std::vector<std::vector<double>> parts;
    std::size_t at = 0;
    for (auto k : partition) {
        parts.emplace_back(s0.begin() + static_cast<std::ptrdiff_t>(at), s0.begin() + static_cast<std::ptrdiff_t>(at + k));
        at += k;
    }
    return parts;
}

std::vector<std::size_t> even_partition(std::size_t num_files, std::size_t groups) {
    if (groups == 0 || groups > num_files) throw InvalidPartitionError("need 1 <= groups <= files");
    std::vector<std::size_t> out(groups, num_files / groups);
    for (std::size_t k = 0; k < num_files % groups; ++k) ++out[k];
    return out;
}

namespace {

std::vector<std::size_t> group_sizes(const DqnConfig& cfg, std::size_t fk) {
    std::vector<std::size_t> sizes{fk};
    for (std::size_t l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden_factor * fk);
    sizes.push_back(fk);
    return sizes;
}

}  // namespace

HyperDQN::HyperDQN(DqnConfig config, Rng& init) : config_(std::move(config)) {
    files_ = std::accumulate(config_.partition.begin(), config_.partition.end(), std::size_t{0});
    config_.validate(files_);
    init_offsets();
    for (auto fk : config_.partition) online_.push_back(FeedforwardNet::random(group_sizes(config_, fk), config_.head, init));
    target_ = online_;
}

HyperDQN::HyperDQN(DqnConfig config, std::vector<FeedforwardNet> online)
    : config_(std::move(config)), online_(std::move(online)) {
    files_ = std::accumulate(config_.partition.begin(), config_.partition.end(), std::size_t{0});
    config_.validate(files_);
    if (online_.size() != config_.partition.size()) throw InvalidPartitionError("one net per group required");
    for (std::size_t k = 0; k < online_.size(); ++k)
        if (online_[k].input_size() != config_.partition[k] || online_[k].output_size() != config_.partition[k])
            throw InvalidPartitionError("net " + std::to_string(k) + " does not match its group size");
    init_offsets();
    target_ = online_;
}

void HyperDQN::init_offsets() {
    offsets_.assign(config_.partition.size(), 0);
    for (std::size_t k = 1; k < offsets_.size(); ++k) offsets_[k] = offsets_[k - 1] + config_.partition[k - 1];
}

namespace {

std::vector<double> concat_forward(const std::vector<FeedforwardNet>& nets, std::span<const double> s0,
                                   std::span<const std::size_t> partition) {
    const auto parts = partition_state(s0, partition);
    std::vector<double> out;
    out.reserve(s0.size());
    for (std::size_t k = 0; k < nets.size(); ++k) {
        const auto o = nets[k].forward(parts[k]);
        out.insert(out.end(), o.begin(), o.end());
    }
    return out;
}

std::span<const double> block(std::span<const double> v, std::size_t offset, std::size_t len) {
    return v.subspan(offset, len);
}

}  // namespace

std::vector<double> HyperDQN::predict_costs(std::span<const double> s0) const {
    return concat_forward(online_, s0, config_.partition);
}

std::vector<double> HyperDQN::predict_target(std::span<const double> s0) const {
    return concat_forward(target_, s0, config_.partition);
}

std::vector<double> HyperDQN::group_target(std::size_t k, const Experience& e) const {
    const std::size_t off = offsets_[k], fk = config_.partition[k];
    std::vector<double> y(fk);
    const auto boot = target_[k].forward(block(e.s_new, off, fk));
    for (std::size_t i = 0; i < fk; ++i) y[i] = e.cost[off + i] + config_.gamma * boot[i];
    if (config_.head == OutputHead::Softmax) {
        // Bring the target onto the probability scale of the head.
        double total = 0.0;
        for (double v : y) total += v;
        if (total > 0.0)
            for (auto& v : y) v /= total;
    }
    return y;
}

std::vector<double> HyperDQN::target_error(const Experience& e) const {
    if (e.s_prev.size() != files_ || e.s_new.size() != files_ || e.cost.size() != files_ || e.action.size() != files_)
        throw std::invalid_argument("target_error: experience length != F");
    std::vector<double> err(files_, 0.0);
    for (std::size_t k = 0; k < online_.size(); ++k) {
        const std::size_t off = offsets_[k], fk = config_.partition[k];
        const auto y = group_target(k, e);
        const auto q = online_[k].forward(block(e.s_prev, off, fk));
        for (std::size_t i = 0; i < fk; ++i)
            err[off + i] = e.action.cached(off + i) ? 0.0 : y[i] - q[i];
    }
    return err;
}

bool HyperDQN::train_batch(const ReplayBuffer& buffer, std::size_t batch, double lr, Rng& rng) {
    if (buffer.empty() || batch == 0) return false;
    const std::size_t b = std::min(batch, buffer.size());
    std::vector<std::size_t> picks(b);
    for (auto& i : picks) i = buffer.sample_index(rng);

    last_loss_ = 0.0;
    for (std::size_t k = 0; k < online_.size(); ++k) {
        const std::size_t off = offsets_[k], fk = config_.partition[k];
        auto grads = GradientSet::zeros_like(online_[k]);
        std::vector<double> mask(fk);
        for (auto i : picks) {
            const Experience& e = buffer.at(i);
            for (std::size_t j = 0; j < fk; ++j) mask[j] = e.action.cached(off + j) ? 0.0 : 1.0;
            const auto y = group_target(k, e);
            last_loss_ += accumulate_gradient(online_[k], block(e.s_prev, off, fk), y, mask, grads) / static_cast<double>(b);
        }
        grads.scale(1.0 / static_cast<double>(b));
        sgd_step(online_[k], grads, lr);
    }
    ++steps_;
    return true;
}

bool HyperDQN::maybe_sync_target() {
    if (steps_ % config_.sync_period != 0) return false;
    for (std::size_t k = 0; k < online_.size(); ++k) clone_into(online_[k], target_[k]);
    ++syncs_;
    return true;
}

void HyperDQN::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json nets = nlohmann::json::array();
    for (std::size_t k = 0; k < online_.size(); ++k) {
        const std::string name = "group_" + std::to_string(k) + ".net";
        save_net(online_[k], dir / name);
        nets.push_back(name);
    }
    nlohmann::json manifest = {{"format", "cacherl-hyperdqn"},
                               {"version", 1},
                               {"partition", config_.partition},
                               {"hidden_factor", config_.hidden_factor},
                               {"hidden_layers", config_.hidden_layers},
                               {"head", std::string(to_string(config_.head))},
                               {"gamma", config_.gamma},
                               {"sync_period", config_.sync_period},
                               {"training_steps", steps_},
                               {"syncs", syncs_},
                               {"nets", nets}};
    std::ofstream os(dir / "manifest.json");
    if (!os) throw std::runtime_error("cannot write manifest in " + dir.string());
    os << manifest.dump(2) << '\n';
}

HyperDQN HyperDQN::load(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw std::runtime_error("no manifest.json in " + dir.string());
    const auto m = nlohmann::json::parse(is);
    if (m.value("format", "") != "cacherl-hyperdqn") throw std::runtime_error("not a hyper-DQN checkpoint");
    DqnConfig cfg;
    cfg.partition = m.at("partition").get<std::vector<std::size_t>>();
    cfg.hidden_factor = m.at("hidden_factor").get<std::size_t>();
    cfg.hidden_layers = m.at("hidden_layers").get<std::size_t>();
    cfg.head = output_head_from_string(m.at("head").get<std::string>());
    cfg.gamma = m.at("gamma").get<double>();
    cfg.sync_period = m.at("sync_period").get<std::size_t>();
    std::vector<FeedforwardNet> nets;
    for (const auto& name : m.at("nets")) nets.push_back(load_net(dir / name.get<std::string>()));
    HyperDQN dqn(std::move(cfg), std::move(nets));
    dqn.steps_ = m.at("training_steps").get<std::uint64_t>();
    dqn.syncs_ = m.at("syncs").get<std::uint64_t>();
    return dqn;
}

ActionVector select_action(const HyperDQN& dqn, std::span<const double> s0, std::size_t capacity, double epsilon,
                           Rng& rng) {
    if (capacity > dqn.num_files()) throw std::invalid_argument("select_action: M0 > F");
    if (rng.uniform() < epsilon) return random_action(dqn.num_files(), capacity, rng);
    return top_m_action(dqn.predict_costs(s0), capacity);
}

}  // namespace cacherl
