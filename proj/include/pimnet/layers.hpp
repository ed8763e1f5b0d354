#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "pimnet/autodiff.hpp"

namespace pimnet::nn {

using ad::Var;

enum class ConvKind { standard, depthwise, pointwise };
enum class Padding { none, zero_symmetric };

std::string to_string(ConvKind kind);
ConvKind conv_kind_from_string(const std::string& s);

/// One 1-D convolution over a [channels, time] signal.
///
/// Weight layouts: standard [c_out, c_in, k], depthwise [c_in, k],
/// pointwise [c_out, c_in]. Bias, when present, is [c_out].
struct ConvSpec {
    ConvKind kind = ConvKind::standard;
    std::size_t c_in = 1;
    std::size_t c_out = 1;
    std::size_t k = 1;
    std::size_t dilation = 1;
    Padding padding = Padding::none;
    bool bias = true;

    void validate() const;
    Shape weight_shape() const;
    std::size_t weight_count() const;
    std::size_t param_count() const { return weight_count() + (bias ? c_out : 0); }
    /// k + (k-1)(r-1)
    std::size_t receptive_field() const { return k + (k - 1) * (dilation - 1); }
    std::size_t output_length(std::size_t input_length) const;
};

/// y[c, i] = sum_k sum_c' w[c, c', k] * x[c', i + r*k] (+ b[c]).
Var conv1d_dilated(Var x, const ConvSpec& spec, Var weight, std::optional<Var> bias = std::nullopt);

enum class Activation { none, relu, leaky_relu, sigmoid, centered_sigmoid };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& s);

Var activate(Var x, Activation act, double leaky_slope = 0.01);

/// pointwise(act(depthwise(x))).
Var depthwise_separable(Var x, const ConvSpec& dw, Var dw_weight, std::optional<Var> dw_bias, const ConvSpec& pw,
                        Var pw_weight, std::optional<Var> pw_bias, Activation act, double leaky_slope = 0.01);

/// W x + b; x is [c_in] or time-distributed [c_in, T].
Var fully_connected(Var x, Var weight, std::optional<Var> bias = std::nullopt);

/// Trainable piecewise-linear lookup over [-a, a] with q uniformly spaced knots.
struct LutSpec {
    std::size_t q = 64;
    double range = 4.0;
    bool per_channel = true;

    void validate() const;
    std::size_t param_count(std::size_t channels) const { return per_channel ? q * channels : q; }

    friend bool operator==(const LutSpec&, const LutSpec&) = default;
};

/// Elementwise interpolation of x[C, T] through table [C, q] (or [1, q] shared).
/// Inputs are clamped to [-a, a]; the input gradient is zero outside (-a, a).
Var lut_forward(Var x, Var table, const LutSpec& spec);

/// Table whose interpolation is the identity on [-a, a].
Tensor lut_identity_table(const LutSpec& spec, std::size_t channels);

enum class NormKind { none, channel };

struct NormSpec {
    NormKind kind = NormKind::none;
    double epsilon = 1e-5;

    void validate() const;

    friend bool operator==(const NormSpec&, const NormSpec&) = default;
};

/// Per-channel normalisation over the time axis with trainable scale/shift [C].
Var channel_norm(Var x, Var scale, Var shift, double epsilon);

} // namespace pimnet::nn
