#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pimnet/autodiff.hpp"
#include "pimnet/layers.hpp"

namespace pimnet::models {

enum class Variant { static_lut, dynamic_fc3, lightweight_fc2 };
/// How each of the four convolution stages is realised.
enum class ConvBlock { standard, separable };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
std::string to_string(ConvBlock b);
ConvBlock conv_block_from_string(const std::string& s);

/// Architecture description.
///
/// Stage order: conv1, conv2, middle, conv3, conv4 where middle is
/// LUT + ReLU (static_lut) or 3 / 2 time-distributed FC layers with centered
/// sigmoid (dynamic_fc3 / lightweight_fc2).
///
/// `widths` lists output channels of conv1, conv2, each FC layer, then conv3;
/// conv4 always outputs 2 * rx_antennas. `kernel_sizes` and `dilations` hold
/// one entry per conv stage (4).
struct ModelSpec {
    Variant variant = Variant::lightweight_fc2;
    std::size_t tx_antennas = 4;
    std::size_t rx_antennas = 2;
    std::vector<std::size_t> widths;
    std::vector<std::size_t> kernel_sizes;
    std::vector<std::size_t> dilations;
    ConvBlock conv_block = ConvBlock::separable;
    nn::Activation conv_activation = nn::Activation::leaky_relu;
    nn::Activation separable_activation = nn::Activation::none;
    double leaky_slope = 0.01;
    nn::LutSpec lut;
    nn::NormSpec norm;

    std::size_t input_channels() const { return 2 * tx_antennas; }
    std::size_t output_channels() const { return 2 * rx_antennas; }
    std::size_t fc_layers() const;

    /// Throws ConfigError naming the offending stage.
    void validate() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Canonical JSON (sorted keys, no whitespace).
std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& json);

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Ordered set of named trainable tensors.
class ModelParams {
public:
    void add(std::string name, Tensor tensor);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t element_count() const;
    std::vector<NamedTensor>& entries() noexcept { return entries_; }
    const std::vector<NamedTensor>& entries() const noexcept { return entries_; }

    void set_requires_grad(bool on);
    void zero_grad();
    bool all_finite() const;

private:
    std::vector<NamedTensor> entries_;
};

/// Closed-form parameter total.
std::size_t param_count(const ModelSpec& spec);
/// 1 + sum over conv stages of (k - 1) * r.
std::size_t receptive_field(const ModelSpec& spec);

/// Allocates and initialises parameters: uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
/// weights, zero biases, identity LUT tables, unit norm scale. The final
/// projection is zero so an untrained model predicts exactly zero.
ModelParams build(const ModelSpec& spec, std::uint64_t seed);

/// x[2*tx, T] -> predicted PIM [2*rx, T - rf + 1]. Output sample i is aligned
/// with input sample i + rf - 1. Parameters are registered as tape leaves.
ad::Var forward(ad::Tape& tape, ModelParams& params, const ModelSpec& spec, ad::Var x);

/// Gradient-free evaluation.
Tensor predict(const ModelParams& params, const ModelSpec& spec, const Tensor& x);

} // namespace pimnet::models
