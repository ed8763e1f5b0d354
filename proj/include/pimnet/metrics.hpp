#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "pimnet/tensor.hpp"

namespace pimnet::eval {

/// Sentinel reported for a channel whose residual is exactly zero.
inline constexpr double kPerfectDepth = std::numeric_limits<double>::infinity();

/// Per-sample power I^2 + Q^2 of an interleaved-channel tensor [2C, N] -> [C, N].
Tensor channel_power(const Tensor& iq);

/// Average power error between per-sample powers meas[C, N] and ref[C, N].
///   linear: mean_c mean_i |P_meas - P_ref|
///   dB:     mean_c mean_i |10 log10(P_meas / P_ref)|
/// Samples with a non-positive power are skipped in the dB form and counted
/// in `exclusions`.
struct ApeResult {
    std::vector<double> per_channel_linear;
    double mean_linear = 0.0;
    std::vector<double> per_channel_db;
    double mean_db = 0.0;
    std::size_t exclusions = 0;
};

ApeResult ape(const Tensor& meas_power, const Tensor& ref_power);

/// Per complex channel: 10 log10(mean |z|^2 / mean |z - z_hat|^2). Inputs are
/// interleaved [2C, N]. A zero residual yields kPerfectDepth.
std::vector<double> cancellation_depth(const Tensor& z, const Tensor& z_hat);

/// Mean of finite per-channel depths; kPerfectDepth when every channel is perfect.
double mean_depth(const std::vector<double>& per_channel);

/// Headline evaluation numbers for an aligned (z, z_hat) pair.
struct ApeReport {
    std::vector<double> per_channel_ape_db;
    double mean_ape_db = 0.0;
    std::vector<double> per_channel_ape_linear;
    double mean_ape_linear = 0.0;
    std::vector<double> per_channel_depth_db;
    double mean_depth_db = 0.0;
    std::vector<double> per_channel_pim_power_db;       ///< before cancellation
    std::vector<double> per_channel_residual_power_db;  ///< after
    std::size_t n_samples = 0;
    std::size_t n_channels = 0;
    std::size_t ape_exclusions = 0;
};

ApeReport make_report(const Tensor& z, const Tensor& z_hat);

inline constexpr std::size_t kSpectrumFrame = 1024;

/// Averaged periodogram of one complex channel of iq [2C, N] over
/// floor(N / 1024) non-overlapping rectangular frames. Bin k holds
/// |X_k|^2 / 1024, so the bins sum to the mean frame energy.
std::vector<double> spectrum(const Tensor& iq, std::size_t channel);

/// Normalised frequency of periodogram bin k in [-0.5, 0.5).
double bin_frequency(std::size_t k);

} // namespace pimnet::eval
