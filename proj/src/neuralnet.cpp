#include "cacherl/neuralnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cacherl/errors.hpp"

namespace cacherl {

std::string_view to_string(OutputHead head) { return head == OutputHead::Linear ? "linear" : "softmax"; }

OutputHead output_head_from_string(std::string_view name) {
    if (name == "linear") return OutputHead::Linear;
    if (name == "softmax") return OutputHead::Softmax;
    throw std::invalid_argument("unknown output head: " + std::string(name));
}

FeedforwardNet::FeedforwardNet(std::vector<std::size_t> sizes, OutputHead head) : sizes_(std::move(sizes)), head_(head) {
    if (sizes_.size() < 2) throw std::invalid_argument("net needs at least an input and an output layer");
    for (auto n : sizes_)
        if (n == 0) throw std::invalid_argument("layer width must be positive");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        DenseLayer layer;
        layer.in = sizes_[l];
        layer.out = sizes_[l + 1];
        layer.weight.assign(layer.in * layer.out, 0.0);
        layer.bias.assign(layer.out, 0.0);
        layers_.push_back(std::move(layer));
    }
}

FeedforwardNet FeedforwardNet::random(std::vector<std::size_t> sizes, OutputHead head, Rng& rng) {
    FeedforwardNet net(std::move(sizes), head);
    for (auto& layer : net.layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (auto& w : layer.weight) w = rng.uniform(-bound, bound);
        for (auto& b : layer.bias) b = rng.uniform(-bound, bound);
    }
    return net;
}

std::size_t FeedforwardNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
    return n;
}

namespace {

void affine(const DenseLayer& layer, std::span<const double> x, std::vector<double>& z) {
    z.assign(layer.bias.begin(), layer.bias.end());
    for (std::size_t i = 0; i < layer.out; ++i) {
        const double* row = layer.weight.data() + i * layer.in;
        double acc = z[i];
        for (std::size_t j = 0; j < layer.in; ++j) acc += row[j] * x[j];
        z[i] = acc;
    }
}

void softmax_inplace(std::vector<double>& z) {
    const double peak = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (auto& v : z) {
        v = std::exp(v - peak);
        total += v;
    }
    for (auto& v : z) v /= total;
}

void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

}  // namespace

std::vector<double> FeedforwardNet::forward(std::span<const double> x) const {
    check_lengths(x.size(), input_size(), "forward");
    std::vector<double> act(x.begin(), x.end()), z;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        affine(layers_[l], act, z);
        if (l + 1 < layers_.size())
            for (auto& v : z) v = std::max(v, 0.0);
        act.swap(z);
    }
    if (head_ == OutputHead::Softmax) softmax_inplace(act);
    return act;
}

GradientSet GradientSet::zeros_like(const FeedforwardNet& net) {
    GradientSet g;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        g.weight.emplace_back(net.layer(l).weight.size(), 0.0);
        g.bias.emplace_back(net.layer(l).bias.size(), 0.0);
    }
    return g;
}

void GradientSet::add(const GradientSet& other) {
    check_lengths(weight.size(), other.weight.size(), "GradientSet::add");
    for (std::size_t l = 0; l < weight.size(); ++l) {
        check_lengths(weight[l].size(), other.weight[l].size(), "GradientSet::add");
        for (std::size_t i = 0; i < weight[l].size(); ++i) weight[l][i] += other.weight[l][i];
        for (std::size_t i = 0; i < bias[l].size(); ++i) bias[l][i] += other.bias[l][i];
    }
}

void GradientSet::scale(double s) {
    for (auto& w : weight)
        for (auto& v : w) v *= s;
    for (auto& b : bias)
        for (auto& v : b) v *= s;
}

bool GradientSet::all_zero() const {
    auto zero = [](const std::vector<double>& v) { return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }); };
    return std::all_of(weight.begin(), weight.end(), zero) && std::all_of(bias.begin(), bias.end(), zero);
}

double masked_l2_loss(std::span<const double> output, std::span<const double> target, std::span<const double> mask) {
    check_lengths(output.size(), target.size(), "masked_l2_loss");
    check_lengths(output.size(), mask.size(), "masked_l2_loss");
    double loss = 0.0;
    for (std::size_t f = 0; f < output.size(); ++f) {
        const double d = target[f] - output[f];
        loss += mask[f] * d * d;
    }
    return loss;
}

double accumulate_gradient(const FeedforwardNet& net, std::span<const double> x, std::span<const double> target,
                           std::span<const double> mask, GradientSet& acc) {
    check_lengths(x.size(), net.input_size(), "backward");
    check_lengths(target.size(), net.output_size(), "backward");
    check_lengths(mask.size(), net.output_size(), "backward");
    const std::size_t L = net.num_layers();

    // acts[l] is the input to layer l; acts[L] the net output.
    std::vector<std::vector<double>> acts(L + 1);
    acts[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < L; ++l) {
        affine(net.layer(l), acts[l], acts[l + 1]);
        if (l + 1 < L)
            for (auto& v : acts[l + 1]) v = std::max(v, 0.0);
    }
    if (net.head() == OutputHead::Softmax) softmax_inplace(acts[L]);
    const auto& out = acts[L];

    std::vector<double> delta(out.size());
    for (std::size_t f = 0; f < out.size(); ++f) delta[f] = -2.0 * mask[f] * (target[f] - out[f]);
    if (net.head() == OutputHead::Softmax) {
        double dot = 0.0;
        for (std::size_t f = 0; f < out.size(); ++f) dot += out[f] * delta[f];
        for (std::size_t f = 0; f < out.size(); ++f) delta[f] = out[f] * (delta[f] - dot);
    }

    for (std::size_t l = L; l-- > 0;) {
        const DenseLayer& layer = net.layer(l);
        const auto& input = acts[l];
        auto& gw = acc.weight[l];
        auto& gb = acc.bias[l];
        for (std::size_t i = 0; i < layer.out; ++i) {
            gb[i] += delta[i];
            if (delta[i] == 0.0) continue;
            double* row = gw.data() + i * layer.in;
            for (std::size_t j = 0; j < layer.in; ++j) row[j] += delta[i] * input[j];
        }
        if (l == 0) break;
        std::vector<double> prev(layer.in, 0.0);
        for (std::size_t i = 0; i < layer.out; ++i) {
            if (delta[i] == 0.0) continue;
            const double* row = layer.weight.data() + i * layer.in;
            for (std::size_t j = 0; j < layer.in; ++j) prev[j] += row[j] * delta[i];
        }
        // Rectifier derivative, taken as 0 at the kink.
        for (std::size_t j = 0; j < layer.in; ++j)
            if (input[j] <= 0.0) prev[j] = 0.0;
        delta.swap(prev);
    }
    return masked_l2_loss(out, target, mask);
}

GradientSet backward(const FeedforwardNet& net, std::span<const double> x, std::span<const double> target,
                     std::span<const double> mask) {
    auto g = GradientSet::zeros_like(net);
    accumulate_gradient(net, x, target, mask, g);
    return g;
}

void sgd_step(FeedforwardNet& net, const GradientSet& grads, double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: learning rate must be positive");
    check_lengths(grads.weight.size(), net.num_layers(), "sgd_step");
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        auto& layer = net.layer(l);
        check_lengths(grads.weight[l].size(), layer.weight.size(), "sgd_step");
        for (std::size_t i = 0; i < layer.weight.size(); ++i) layer.weight[i] -= lr * grads.weight[l][i];
        for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= lr * grads.bias[l][i];
        for (double w : layer.weight)
            if (!std::isfinite(w)) throw NumericalError("sgd_step: non-finite weight");
    }
}

void clone_into(const FeedforwardNet& source, FeedforwardNet& target) {
    if (!source.same_architecture(target)) throw std::invalid_argument("clone_into: architecture mismatch");
    target = source;
}

namespace {

void write_f64(std::ostream& os, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(buf, 8);
}

double read_f64(std::istream& is) {
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("net checkpoint truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_net(const FeedforwardNet& net, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    nlohmann::json header = {{"format", "cacherl-net"},
                             {"version", 1},
                             {"sizes", net.sizes()},
                             {"head", std::string(to_string(net.head()))},
                             {"dtype", "float64-le"}};
    os << header.dump() << '\n';
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        for (double w : net.layer(l).weight) write_f64(os, w);
        for (double b : net.layer(l).bias) write_f64(os, b);
    }
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

FeedforwardNet load_net(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(is, line);
    const auto header = nlohmann::json::parse(line);
    if (header.value("format", "") != "cacherl-net") throw std::runtime_error("not a net checkpoint: " + path.string());
    FeedforwardNet net(header.at("sizes").get<std::vector<std::size_t>>(),
                       output_head_from_string(header.at("head").get<std::string>()));
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        for (double& w : net.layer(l).weight) w = read_f64(is);
        for (double& b : net.layer(l).bias) b = read_f64(is);
    }
    if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("net checkpoint has trailing bytes");
    return net;
}

}  // namespace cacherl
