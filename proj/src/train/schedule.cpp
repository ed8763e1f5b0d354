#include <cmath>
#include <set>

#include "pimnet/errors.hpp"
#include "pimnet/train.hpp"

namespace pimnet::train {

double clr_lr(std::size_t step, const TrainConfig& cfg)
{
    const double p =
        static_cast<double>(step % cfg.cycle_period) / static_cast<double>(cfg.cycle_period);
    return cfg.lr_min + (cfg.lr_max - cfg.lr_min) * (1.0 - std::abs(2.0 * p - 1.0));
}

void TrainConfig::validate(std::size_t receptive_field) const
{
    if (!(lr_min > 0.0) || !(lr_min <= lr_max)) throw ConfigError("train config: need 0 < lr_min <= lr_max");
    if (cycle_period < 2 || cycle_period % 2 != 0)
        throw ConfigError("train config: cycle_period must be even and >= 2");
    if (!(clip_tau > 0.0)) throw ConfigError("train config: clip_tau must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("train config: weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0))
        throw ConfigError("train config: Adam betas must be in [0, 1) and epsilon positive");
    if (batch_windows == 0 || window_len == 0) throw ConfigError("train config: empty batch");
    if (batch_windows * window_len <= 1024)
        throw ConfigError("train config: batch_windows * window_len = " + std::to_string(batch_windows * window_len) +
                          " must exceed the 1024-sample FFT frame");
    if (2 * truncate_margin < receptive_field - 1)
        throw ConfigError("train config: truncate_margin " + std::to_string(truncate_margin) +
                          " is below (receptive_field - 1) / 2 for receptive field " + std::to_string(receptive_field));
    if (window_len < receptive_field + 2 * truncate_margin)
        throw ConfigError("train config: window_len " + std::to_string(window_len) +
                          " must be >= receptive field + 2 * truncate_margin = " +
                          std::to_string(receptive_field + 2 * truncate_margin));
    if (eval_every == 0) throw ConfigError("train config: eval_every must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 0.5)) throw ConfigError("train config: val_fraction must be in (0, 0.5)");
    if (val_blocks == 0) throw ConfigError("train config: val_blocks must be >= 1");
}

const std::vector<std::string>& train_config_keys()
{
    static const std::vector<std::string> keys{
        "lr_min",     "lr_max",        "cycle_period",    "clip_tau", "weight_decay", "beta1",
        "beta2",      "epsilon",       "window_len",      "batch_windows", "truncate_margin", "steps",
        "train_seed", "eval_every",    "val_fraction",    "val_blocks", "balance_channels"};
    return keys;
}

TrainConfig train_config_from(const KeyValueConfig& cfg)
{
    TrainConfig c;
    auto count = [&](const char* key, std::size_t fallback) {
        const auto v = cfg.get_int(key, static_cast<std::int64_t>(fallback));
        if (v < 0) throw ConfigError(cfg.origin() + ": " + key + " must be >= 0");
        return static_cast<std::size_t>(v);
    };
    c.lr_min = cfg.get_double("lr_min", c.lr_min);
    c.lr_max = cfg.get_double("lr_max", c.lr_max);
    c.cycle_period = count("cycle_period", c.cycle_period);
    c.clip_tau = cfg.get_double("clip_tau", c.clip_tau);
    c.weight_decay = cfg.get_double("weight_decay", c.weight_decay);
    c.beta1 = cfg.get_double("beta1", c.beta1);
    c.beta2 = cfg.get_double("beta2", c.beta2);
    c.epsilon = cfg.get_double("epsilon", c.epsilon);
    c.window_len = count("window_len", c.window_len);
    c.batch_windows = count("batch_windows", c.batch_windows);
    c.truncate_margin = count("truncate_margin", c.truncate_margin);
    c.steps = count("steps", c.steps);
    c.seed = static_cast<std::uint64_t>(cfg.get_int("train_seed", static_cast<std::int64_t>(c.seed)));
    c.eval_every = count("eval_every", c.eval_every);
    c.val_fraction = cfg.get_double("val_fraction", c.val_fraction);
    c.val_blocks = count("val_blocks", c.val_blocks);
    c.balance_channels = cfg.get_bool("balance_channels", c.balance_channels);
    return c;
}

} // namespace pimnet::train
