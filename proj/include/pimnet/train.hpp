#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pimnet/autodiff.hpp"
#include "pimnet/keyvalue.hpp"
#include "pimnet/model.hpp"

namespace pimnet::train {

struct TrainConfig {
    double lr_min = 1e-4;
    double lr_max = 2e-3;
    std::size_t cycle_period = 2000;
    double clip_tau = 1.0;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t window_len = 2048;
    std::size_t batch_windows = 4;
    std::size_t truncate_margin = 16;
    std::size_t steps = 10000;
    std::uint64_t seed = 1;
    std::size_t eval_every = 500;
    double val_fraction = 0.1;  ///< share of the training signal held out for model selection
    std::size_t val_blocks = 8; ///< held-out share split into this many evenly spaced blocks
    bool balance_channels = true; ///< weight each receive channel's loss by its inverse PIM power

    /// Checks the recipe invariants against a model with receptive field `rf`.
    void validate(std::size_t receptive_field) const;
};

const std::vector<std::string>& train_config_keys();
/// Reads the keys above (same names) plus nothing else.
TrainConfig train_config_from(const KeyValueConfig& cfg);

/// Triangular cyclic learning rate.
double clr_lr(std::size_t step, const TrainConfig& cfg);

struct ClipResult {
    double norm = 0.0;   ///< global L2 norm before clipping
    double scale = 1.0;  ///< factor applied to every gradient
};

/// Global-norm clipping over all gradient buffers: if ||g|| > tau every
/// gradient is multiplied by tau / ||g||.
ClipResult clip_gradients(const std::vector<std::span<double>>& grads, double tau);
ClipResult clip_gradients(models::ModelParams& params, double tau);

struct OptimizerState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t t = 0;

    static OptimizerState for_params(const models::ModelParams& params);
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
};

/// Adam with decoupled weight decay, reading gradients from the parameters'
/// grad buffers: theta -= lr * (m_hat / (sqrt(v_hat) + eps) + lambda * theta).
/// A non-finite gradient aborts before any parameter changes; the error names
/// the tensor and `context`.
void adam_step(models::ModelParams& params, OptimizerState& state, double lr, const AdamConfig& cfg,
               const std::string& context = {});

/// Mean squared error over output samples [M, L - M) of every channel.
ad::Var truncated_mse(ad::Var prediction, const Tensor& target, std::size_t margin);

/// Training signals: x [2 tx, N] and the PIM z [2 rx, N] on the same time axis.
struct TrainData {
    Tensor x;
    Tensor z;
};

struct LogRow {
    std::size_t step = 0;
    double lr = 0.0;
    double loss = 0.0;
    double grad_norm = 0.0;
    double clip_scale = 1.0;
    std::optional<double> eval_depth_db;
};

/// Header: step,lr,loss,grad_norm,clip_scale,eval_depth_db
std::string log_csv(const std::vector<LogRow>& rows);

struct TrainState {
    models::ModelParams params;
    OptimizerState opt;
    std::size_t step = 0;
    double best_val_mse = std::numeric_limits<double>::infinity();
    models::ModelParams best_params;
};

TrainState initial_state(const models::ModelSpec& spec, std::uint64_t seed);

struct TrainOptions {
    /// When set, checkpoint.pimm (resumable) and best.pimm are written here at every evaluation.
    std::string checkpoint_dir;
    /// Stop after this many total steps instead of cfg.steps.
    std::optional<std::size_t> stop_at;
    std::function<void(const LogRow&)> on_log;
};

/// Thrown when training hits a non-finite loss; checkpoints on disk are left untouched.
class TrainingAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Runs steps state.step .. cfg.steps (or stop_at), appending to `log`.
void run_training(const models::ModelSpec& spec, TrainState& state, const TrainData& data, const TrainConfig& cfg,
                  std::vector<LogRow>& log, const TrainOptions& opts = {});

/// Half-open sample range [begin, end).
struct Interval {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t length() const { return end - begin; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Split of an N-sample training signal: N is cut into val_blocks strides and
/// the last floor(val_fraction * N / val_blocks) samples of each stride are
/// held out. Training windows come only from the remaining gaps.
struct HoldoutLayout {
    std::vector<Interval> train;
    std::vector<Interval> validation;
};
HoldoutLayout holdout_layout(std::size_t n_samples, const TrainConfig& cfg);

/// Per-row loss weights for z [2 rx, N]: sqrt(P_mean / P_r), with P_r the
/// mean I/Q power of receive channel r over the training gaps. All ones when
/// cfg.balance_channels is false or a channel has no power.
std::vector<double> channel_loss_weights(const TrainData& data, const TrainConfig& cfg);

/// Held-out metrics of `params` over the validation blocks of `data`; mse
/// uses the channel loss weights.
struct ValidationResult {
    double mse = 0.0;
    double depth_db = 0.0;
};
ValidationResult validate_held_out(const models::ModelSpec& spec, const models::ModelParams& params,
                                   const TrainData& data, const TrainConfig& cfg);

/// Resumable checkpoint: model tensors plus optimizer state, step counter and best model.
void save_train_checkpoint(const std::string& path, const models::ModelSpec& spec, const TrainState& state);
TrainState load_train_checkpoint(const std::string& path, models::ModelSpec* spec = nullptr);

} // namespace pimnet::train
