#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "cacherl/rng.hpp"

namespace cacherl {

enum class OutputHead { Linear, Softmax };

std::string_view to_string(OutputHead head);
OutputHead output_head_from_string(std::string_view name);

/// One affine map: W is out x in, row-major.
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;
    std::vector<double> bias;

    bool operator==(const DenseLayer&) const = default;
};

/// Fully connected net with rectifier hidden units.
class FeedforwardNet {
public:
    FeedforwardNet() = default;
    /// Zero-initialized net; `sizes` lists every layer width, input first.
    explicit FeedforwardNet(std::vector<std::size_t> sizes, OutputHead head = OutputHead::Linear);

    /// Weights and biases uniform on ±1/√fan_in.
    static FeedforwardNet random(std::vector<std::size_t> sizes, OutputHead head, Rng& rng);

    const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
    OutputHead head() const noexcept { return head_; }
    std::size_t input_size() const { return sizes_.front(); }
    std::size_t output_size() const { return sizes_.back(); }
    std::size_t num_layers() const noexcept { return layers_.size(); }
    DenseLayer& layer(std::size_t l) { return layers_[l]; }
    const DenseLayer& layer(std::size_t l) const { return layers_[l]; }
    std::size_t parameter_count() const;
    bool same_architecture(const FeedforwardNet& other) const { return sizes_ == other.sizes_ && head_ == other.head_; }

    std::vector<double> forward(std::span<const double> x) const;

    bool operator==(const FeedforwardNet&) const = default;

private:
    std::vector<std::size_t> sizes_;
    OutputHead head_ = OutputHead::Linear;
    std::vector<DenseLayer> layers_;
};

/// Per-layer gradients with the same shapes as the net.
struct GradientSet {
    std::vector<std::vector<double>> weight;
    std::vector<std::vector<double>> bias;

    static GradientSet zeros_like(const FeedforwardNet& net);
    void add(const GradientSet& other);
    void scale(double s);
    bool all_zero() const;
};

/// Σ_f mask_f (target_f − output_f)².
double masked_l2_loss(std::span<const double> output, std::span<const double> target, std::span<const double> mask);

/// Exact gradient of masked_l2_loss(forward(x), target, mask).
GradientSet backward(const FeedforwardNet& net, std::span<const double> x, std::span<const double> target,
                     std::span<const double> mask);

/// Adds the gradient into `acc` and returns the loss at x.
double accumulate_gradient(const FeedforwardNet& net, std::span<const double> x, std::span<const double> target,
                           std::span<const double> mask, GradientSet& acc);

/// θ ← θ − lr · g.
void sgd_step(FeedforwardNet& net, const GradientSet& grads, double lr);

/// Deep copy of parameters; throws std::invalid_argument on architecture mismatch.
void clone_into(const FeedforwardNet& source, FeedforwardNet& target);

/// Single-file checkpoint: one line of JSON header, then every layer's weights
/// (row-major) followed by its biases as little-endian float64.
void save_net(const FeedforwardNet& net, const std::filesystem::path& path);
FeedforwardNet load_net(const std::filesystem::path& path);

}  // namespace cacherl
